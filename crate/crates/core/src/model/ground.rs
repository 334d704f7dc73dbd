//! Grounding of lifted operators into a finite task over indexed atoms.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use num_integer::Integer;

use super::pddl::{AtomTemplate, DomainModel, GroundAtom, ProblemModel, Term, TypeRef};
use super::{ModelError, Rational};

pub const DEFAULT_GROUNDING_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u32);

/// Index into [`GroundTask::objects`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjId(pub u32);

impl AtomId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl ActionId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl ObjId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// A set of true atoms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorldState(FixedBitSet);

impl WorldState {
    pub fn empty(num_atoms: usize) -> Self {
        WorldState(FixedBitSet::with_capacity(num_atoms))
    }

    pub fn from_atoms(num_atoms: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = Self::empty(num_atoms);
        for a in atoms {
            s.insert(a);
        }
        s
    }

    pub fn contains(&self, a: AtomId) -> bool {
        self.0.contains(a.idx())
    }

    pub fn insert(&mut self, a: AtomId) {
        self.0.insert(a.idx());
    }

    pub fn remove(&mut self, a: AtomId) {
        self.0.set(a.idx(), false);
    }

    pub fn contains_all(&self, atoms: &[AtomId]) -> bool {
        atoms.iter().all(|a| self.contains(*a))
    }

    pub fn is_superset(&self, other: &WorldState) -> bool {
        other.0.is_subset(&self.0)
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.0.ones().map(|i| AtomId(i as u32))
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Debug for WorldState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.atoms().map(|a| a.0)).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub id: ActionId,
    pub operator: String,
    pub args: Vec<String>,
    pub pre: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
    /// Duration in ticks.
    pub dur: u64,
}

impl GroundAction {
    pub fn name(&self) -> String {
        let mut s = format!("({}", self.operator);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s.push(')');
        s
    }
}

/// The grounded, immutable planning task.
#[derive(Debug, Clone)]
pub struct GroundTask {
    pub domain_name: String,
    pub problem_name: String,
    atoms: Vec<GroundAtom>,
    atom_index: HashMap<GroundAtom, AtomId>,
    actions: Vec<GroundAction>,
    adders: Vec<Vec<ActionId>>,
    init: WorldState,
    goal: Vec<AtomId>,
    time_scale: i64,
    objects: Vec<String>,
    object_index: HashMap<String, ObjId>,
    /// predicate -> per parameter, the objects that fit its declared type.
    param_domains: HashMap<String, Vec<Vec<ObjId>>>,
}

impl GroundTask {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.idx()]
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom_id(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn find_atom(&self, predicate: &str, args: &[&str]) -> Option<AtomId> {
        self.atom_id(&GroundAtom::new(predicate, args))
    }

    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    pub fn action(&self, id: ActionId) -> &GroundAction {
        &self.actions[id.idx()]
    }

    pub fn find_action(&self, operator: &str, args: &[&str]) -> Option<&GroundAction> {
        self.actions.iter().find(|a| a.operator == operator && a.args == args)
    }

    /// Actions that add `atom`, in id order.
    pub fn adders(&self, atom: AtomId) -> &[ActionId] {
        &self.adders[atom.idx()]
    }

    pub fn init(&self) -> &WorldState {
        &self.init
    }

    pub fn goal(&self) -> &[AtomId] {
        &self.goal
    }

    /// Ticks per time unit.
    pub fn time_scale(&self) -> i64 {
        self.time_scale
    }

    pub fn ticks_to_time(&self, ticks: u64) -> Rational {
        Rational::new(ticks as i64, self.time_scale)
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn object(&self, id: ObjId) -> &str {
        &self.objects[id.idx()]
    }

    pub fn object_id(&self, name: &str) -> Option<ObjId> {
        self.object_index.get(name).copied()
    }

    /// Objects admissible at parameter `param` of `predicate`.
    pub fn param_domain(&self, predicate: &str, param: usize) -> Option<&[ObjId]> {
        self.param_domains.get(predicate).and_then(|d| d.get(param)).map(Vec::as_slice)
    }

    pub fn predicate_arity(&self, predicate: &str) -> Option<usize> {
        self.param_domains.get(predicate).map(Vec::len)
    }

    pub fn state(&self, atoms: impl IntoIterator<Item = AtomId>) -> WorldState {
        WorldState::from_atoms(self.num_atoms(), atoms)
    }

    pub fn empty_state(&self) -> WorldState {
        WorldState::empty(self.num_atoms())
    }

    /// Sum of all action durations, in ticks.
    pub fn total_duration(&self) -> u64 {
        self.actions.iter().map(|a| a.dur).sum()
    }

    pub fn max_duration(&self) -> u64 {
        self.actions.iter().map(|a| a.dur).max().unwrap_or(0)
    }

    pub fn describe_state(&self, s: &WorldState) -> Vec<String> {
        s.atoms().map(|a| self.atom(a).to_string()).collect()
    }
}

pub fn ground(domain: &DomainModel, problem: &ProblemModel) -> Result<GroundTask, ModelError> {
    ground_with_cap(domain, problem, DEFAULT_GROUNDING_CAP)
}

struct Candidate {
    operator: String,
    args: Vec<String>,
    pre: Vec<GroundAtom>,
    add: Vec<GroundAtom>,
    del: Vec<GroundAtom>,
    dur: Rational,
}

fn instantiate(tpl: &AtomTemplate, params: &[String], binding: &[usize], objects: &[&str]) -> GroundAtom {
    let args = tpl
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => {
                let i = params.iter().position(|p| p == v).expect("validated variable");
                objects[binding[i]].to_string()
            }
            Term::Const(c) => c.clone(),
        })
        .collect();
    GroundAtom { predicate: tpl.predicate.clone(), args }
}

/// Highest parameter index a template depends on, or None when it is ground.
fn last_param(tpl: &AtomTemplate, params: &[String]) -> Option<usize> {
    tpl.args
        .iter()
        .filter_map(|t| match t {
            Term::Var(v) => params.iter().position(|p| p == v),
            Term::Const(_) => None,
        })
        .max()
}

/// Instantiates every operator over type-consistent objects, prunes actions
/// whose static preconditions fail or that are unreachable in the
/// delete-relaxation, and indexes the result.
pub fn ground_with_cap(
    domain: &DomainModel,
    problem: &ProblemModel,
    cap: usize,
) -> Result<GroundTask, ModelError> {
    let all_objects = problem.all_objects(domain);
    let object_names: Vec<&str> = all_objects.iter().map(|(n, _)| *n).collect();

    let fits = |ty: &TypeRef| -> Vec<usize> {
        all_objects
            .iter()
            .enumerate()
            .filter(|(_, (_, t))| domain.conforms(t, ty))
            .map(|(i, _)| i)
            .collect()
    };

    let fluent_preds: HashSet<&str> = domain
        .operators
        .iter()
        .flat_map(|o| o.add.iter().chain(&o.del))
        .map(|a| a.predicate.as_str())
        .collect();
    let init_set: HashSet<GroundAtom> = problem.init.iter().cloned().collect();

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut instantiations = 0usize;
    for op in &domain.operators {
        let params: Vec<String> = op.params.iter().map(|p| p.name.clone()).collect();
        let domains: Vec<Vec<usize>> = op.params.iter().map(|p| fits(&p.ty)).collect();
        // static preconditions checked as soon as their last variable is bound
        let mut static_at: Vec<Vec<&AtomTemplate>> = vec![Vec::new(); params.len().max(1)];
        let mut ground_static: Vec<&AtomTemplate> = Vec::new();
        for tpl in op.pre.iter().filter(|t| !fluent_preds.contains(t.predicate.as_str())) {
            match last_param(tpl, &params) {
                Some(i) => static_at[i].push(tpl),
                None => ground_static.push(tpl),
            }
        }
        if ground_static
            .iter()
            .any(|t| !init_set.contains(&instantiate(t, &params, &[], &object_names)))
        {
            continue;
        }
        let mut binding = vec![0usize; params.len()];
        let mut stack: Vec<usize> = vec![0];
        // iterative backtracking over parameter positions
        while let Some(&choice) = stack.last() {
            let depth = stack.len() - 1;
            if depth == params.len() {
                instantiations += 1;
                if instantiations > cap {
                    return Err(ModelError::GroundingExplosion { cap });
                }
                let pre = op
                    .pre
                    .iter()
                    .filter(|t| fluent_preds.contains(t.predicate.as_str()))
                    .map(|t| instantiate(t, &params, &binding, &object_names))
                    .collect();
                let add: Vec<GroundAtom> =
                    op.add.iter().map(|t| instantiate(t, &params, &binding, &object_names)).collect();
                let del = op
                    .del
                    .iter()
                    .map(|t| instantiate(t, &params, &binding, &object_names))
                    .filter(|a| !add.contains(a))
                    .collect();
                candidates.push(Candidate {
                    operator: op.name.clone(),
                    args: binding.iter().map(|&i| object_names[i].to_string()).collect(),
                    pre,
                    add,
                    del,
                    dur: op.duration,
                });
                stack.pop();
                if let Some(top) = stack.last_mut() {
                    *top += 1;
                }
                continue;
            }
            if choice >= domains[depth].len() {
                stack.pop();
                if let Some(top) = stack.last_mut() {
                    *top += 1;
                }
                continue;
            }
            binding[depth] = domains[depth][choice];
            let ok = static_at[depth].iter().all(|t| {
                init_set.contains(&instantiate(t, &params, &binding[..=depth], &object_names))
            });
            if ok {
                stack.push(0);
            } else {
                *stack.last_mut().unwrap() += 1;
            }
        }
    }

    // delete-relaxed reachability fixpoint
    let mut reachable: HashSet<GroundAtom> = init_set.clone();
    let mut enabled = vec![false; candidates.len()];
    loop {
        let mut changed = false;
        for (i, c) in candidates.iter().enumerate() {
            if !enabled[i] && c.pre.iter().all(|p| reachable.contains(p)) {
                enabled[i] = true;
                changed = true;
                for a in &c.add {
                    reachable.insert(a.clone());
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut kept: Vec<Candidate> =
        candidates.into_iter().zip(enabled).filter(|(_, e)| *e).map(|(c, _)| c).collect();
    kept.sort_by(|a, b| (&a.operator, &a.args).cmp(&(&b.operator, &b.args)));

    // atom universe: reachable atoms, goal atoms, and every typed grounding
    // of the goal predicates (station values may name unreachable atoms)
    let mut universe: BTreeSet<GroundAtom> = reachable.iter().cloned().collect();
    universe.extend(problem.goal.iter().cloned());
    let goal_preds: BTreeSet<&str> = problem.goal.iter().map(|g| g.predicate.as_str()).collect();
    for pred in &goal_preds {
        let decl = domain.predicate(pred).expect("validated goal predicate");
        let doms: Vec<Vec<usize>> = decl.params.iter().map(|p| fits(&p.ty)).collect();
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for d in &doms {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    d.iter().map(move |&o| {
                        let mut c = c.clone();
                        c.push(o);
                        c
                    })
                })
                .collect();
            if combos.len() > cap {
                return Err(ModelError::GroundingExplosion { cap });
            }
        }
        for c in combos {
            universe.insert(GroundAtom {
                predicate: pred.to_string(),
                args: c.iter().map(|&i| object_names[i].to_string()).collect(),
            });
        }
    }
    let atoms: Vec<GroundAtom> = universe.into_iter().collect();
    let atom_index: HashMap<GroundAtom, AtomId> =
        atoms.iter().enumerate().map(|(i, a)| (a.clone(), AtomId(i as u32))).collect();

    let time_scale = kept.iter().fold(1i64, |acc, c| acc.lcm(c.dur.denom()));

    let ids = |v: &[GroundAtom]| -> Vec<AtomId> {
        let mut out: Vec<AtomId> = v.iter().filter_map(|a| atom_index.get(a).copied()).collect();
        out.sort();
        out.dedup();
        out
    };
    let actions: Vec<GroundAction> = kept
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ticks = c.dur * Rational::from_integer(time_scale);
            debug_assert!(ticks.is_integer());
            GroundAction {
                id: ActionId(i as u32),
                operator: c.operator.clone(),
                args: c.args.clone(),
                pre: ids(&c.pre),
                add: ids(&c.add),
                del: ids(&c.del),
                dur: ticks.to_integer() as u64,
            }
        })
        .collect();

    let mut adders = vec![Vec::new(); atoms.len()];
    for a in &actions {
        for p in &a.add {
            adders[p.idx()].push(a.id);
        }
    }

    let init = WorldState::from_atoms(atoms.len(), problem.init.iter().map(|a| atom_index[a]));
    let mut goal: Vec<AtomId> = problem.goal.iter().map(|a| atom_index[a]).collect();
    goal.sort();
    goal.dedup();

    let objects: Vec<String> = object_names.iter().map(|s| s.to_string()).collect();
    let object_index = objects.iter().enumerate().map(|(i, o)| (o.clone(), ObjId(i as u32))).collect();
    let param_domains = domain
        .predicates
        .iter()
        .map(|p| {
            let doms = p
                .params
                .iter()
                .map(|t| fits(&t.ty).into_iter().map(|i| ObjId(i as u32)).collect())
                .collect();
            (p.name.clone(), doms)
        })
        .collect();

    Ok(GroundTask {
        domain_name: domain.name.clone(),
        problem_name: problem.name.clone(),
        atoms,
        atom_index,
        actions,
        adders,
        init,
        goal,
        time_scale,
        objects,
        object_index,
        param_domains,
    })
}
