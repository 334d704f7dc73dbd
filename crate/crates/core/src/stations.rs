//! Stations: partial states over the goal's exclusive fluents, and the
//! genomes built from them.
//!
//! A *goal line* is one exclusive key of a station predicate that appears in
//! the goal, e.g. `(at person1 ?)`. A station assigns each line a value and
//! an active flag; inactive lines impose nothing on the sub-planner.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::model::{AtomId, GroundTask, InvariantSpec, ObjId, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StationError {
    #[error("no n in [{n_min}, {n_max}] satisfies n * d_max >= lines (d_max = {d_max}, lines = {lines})")]
    InitInfeasible { n_min: usize, n_max: usize, d_max: usize, lines: usize },
    #[error("goal assigns two values to exclusive key `{key}` of `{predicate}`")]
    ConflictingGoal { predicate: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalLine {
    pub predicate: String,
    /// Position of the exclusive argument in the binary predicate.
    pub key_pos: usize,
    pub key: ObjId,
    pub goal_value: ObjId,
    pub init_value: Option<ObjId>,
    /// Type-conforming values, in object order.
    pub domain: Vec<ObjId>,
    /// Atom id for each entry of `domain`.
    atoms: Vec<AtomId>,
}

impl GoalLine {
    pub fn atom(&self, value: ObjId) -> Option<AtomId> {
        self.domain.iter().position(|v| *v == value).map(|i| self.atoms[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entry {
    pub key: ObjId,
    pub value: ObjId,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Station {
    pub entries: Vec<Entry>,
}

/// Value per goal line, `None` where the line says nothing.
pub type Projection = Vec<Option<ObjId>>;

impl Station {
    pub fn values(&self) -> Projection {
        self.entries.iter().map(|e| e.active.then_some(e.value)).collect()
    }

    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.active).count()
    }
}

/// Ordered list of stations; init and goal are implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Genome {
    pub stations: Vec<Station>,
}

impl Genome {
    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitParams {
    pub n_min: usize,
    pub n_max: usize,
    pub d_max: usize,
    pub extra_moves: usize,
    pub p_mask: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams { n_min: 2, n_max: 10, d_max: 3, extra_moves: 6, p_mask: 0.1 }
    }
}

/// Probabilities of the three station sub-mutations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationRates {
    pub change: f64,
    pub deactivate: f64,
    pub reactivate: f64,
}

impl Default for StationRates {
    fn default() -> Self {
        StationRates { change: 0.75, deactivate: 0.125, reactivate: 0.125 }
    }
}

/// Goal lines of a task plus the derived init and goal anchors.
#[derive(Debug, Clone)]
pub struct StationSpace {
    pub lines: Vec<GoalLine>,
    init: Projection,
    goal: Station,
}

impl StationSpace {
    pub fn new(task: &GroundTask, inv: &InvariantSpec) -> Result<Self, StationError> {
        let mut lines: Vec<GoalLine> = Vec::new();
        for &g in task.goal() {
            let atom = task.atom(g);
            if !inv.is_station_predicate(&atom.predicate) || atom.args.len() != 2 {
                continue;
            }
            let Some(key_pos) = inv.exclusive_arg(&atom.predicate) else { continue };
            let val_pos = 1 - key_pos;
            let key = task.object_id(&atom.args[key_pos]).expect("goal object");
            let goal_value = task.object_id(&atom.args[val_pos]).expect("goal object");
            if let Some(l) = lines.iter().find(|l| l.predicate == atom.predicate && l.key == key) {
                if l.goal_value != goal_value {
                    return Err(StationError::ConflictingGoal {
                        predicate: atom.predicate.clone(),
                        key: atom.args[key_pos].clone(),
                    });
                }
                continue;
            }
            let domain: Vec<ObjId> =
                task.param_domain(&atom.predicate, val_pos).map(<[_]>::to_vec).unwrap_or_default();
            let atoms: Vec<AtomId> = domain
                .iter()
                .map(|&v| {
                    let (k, v) = (task.object(key), task.object(v));
                    let args = if key_pos == 0 { [k, v] } else { [v, k] };
                    task.find_atom(&atom.predicate, &args).expect("goal predicates are fully grounded")
                })
                .collect();
            let init_value = domain
                .iter()
                .zip(&atoms)
                .find(|(_, a)| task.init().contains(**a))
                .map(|(v, _)| *v);
            lines.push(GoalLine { predicate: atom.predicate.clone(), key_pos, key, goal_value, init_value, domain, atoms });
        }
        let init = lines.iter().map(|l| l.init_value).collect();
        let goal = Station {
            entries: lines.iter().map(|l| Entry { key: l.key, value: l.goal_value, active: true }).collect(),
        };
        Ok(StationSpace { lines, init, goal })
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn init_projection(&self) -> &Projection {
        &self.init
    }

    pub fn goal_station(&self) -> &Station {
        &self.goal
    }

    /// Values the lines take in a full state.
    pub fn project(&self, state: &WorldState) -> Projection {
        self.lines
            .iter()
            .map(|l| l.domain.iter().zip(&l.atoms).find(|(_, a)| state.contains(**a)).map(|(v, _)| *v))
            .collect()
    }

    /// Station whose active entries are the defined values of `proj`.
    pub fn station_from(&self, proj: &Projection) -> Station {
        Station {
            entries: self
                .lines
                .iter()
                .zip(proj)
                .map(|(l, v)| Entry { key: l.key, value: v.unwrap_or(l.goal_value), active: v.is_some() })
                .collect(),
        }
    }

    /// Goal atoms of the active entries.
    pub fn goal_atoms(&self, st: &Station) -> Vec<AtomId> {
        let mut out: Vec<AtomId> = st
            .entries
            .iter()
            .filter(|e| e.active)
            .filter_map(|e| {
                let line = self.lines.iter().find(|l| l.key == e.key)?;
                line.atom(e.value)
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    fn line_of(&self, key: ObjId) -> Option<&GoalLine> {
        self.lines.iter().find(|l| l.key == key)
    }

    /// Values of the station preceding genome position `k` (init for 0);
    /// masked entries stay unknown.
    fn neighbor_values(&self, g: &Genome, k: usize) -> Projection {
        match k {
            0 => self.init.clone(),
            _ => g.stations[k - 1].values(),
        }
    }

    fn next_station<'a>(&'a self, g: &'a Genome, k: usize) -> &'a Station {
        g.stations.get(k).unwrap_or(&self.goal)
    }

    pub fn dump(&self, task: &GroundTask, g: &Genome) -> String {
        let mut out = String::new();
        for (i, st) in g.stations.iter().enumerate() {
            out.push_str(&format!("station {}\n", i + 1));
            for e in &st.entries {
                let pred = self.line_of(e.key).map_or("?", |l| l.predicate.as_str());
                if e.active {
                    out.push_str(&format!("  {pred}: {} -> {}\n", task.object(e.key), task.object(e.value)));
                } else {
                    out.push_str(&format!("  {pred}: {} -> #masked\n", task.object(e.key)));
                }
            }
        }
        out
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.active {
            write!(f, "{}->{}", self.key.0, self.value.0)
        } else {
            write!(f, "{}->#", self.key.0)
        }
    }
}

/// Active entries of `to` whose line has another value (or none) in `from`.
/// Lines active in `to` whose value differs from a known value in `from`;
/// an unknown (masked) source value constrains nothing and counts zero.
pub fn distance(from: &Projection, to: &Station) -> usize {
    to.entries
        .iter()
        .zip(from)
        .filter(|(e, v)| e.active && v.is_some_and(|v| v != e.value))
        .count()
}

pub fn distance_from_state(space: &StationSpace, from: &WorldState, to: &Station) -> usize {
    distance(&space.project(from), to)
}

/// No exclusive key active twice, and every active value in its line's domain.
pub fn is_consistent(space: &StationSpace, st: &Station) -> bool {
    let mut seen: Vec<ObjId> = Vec::new();
    for e in st.entries.iter().filter(|e| e.active) {
        if seen.contains(&e.key) {
            return false;
        }
        seen.push(e.key);
        match space.line_of(e.key) {
            Some(l) if l.domain.contains(&e.value) => {}
            _ => return false,
        }
    }
    true
}

/// Randomised construction: a (lines x n) move matrix with at least one
/// move per line and at most `d_max` per column, filled from both ends, then
/// sparsely masked.
pub fn random_init<R: Rng + ?Sized>(
    space: &StationSpace,
    p: &InitParams,
    rng: &mut R,
) -> Result<Genome, StationError> {
    let lines = space.num_lines();
    let feasible: Vec<usize> = (p.n_min..=p.n_max).filter(|n| n * p.d_max >= lines).collect();
    let Some(&n) = feasible.choose(rng) else {
        return Err(StationError::InitInfeasible { n_min: p.n_min, n_max: p.n_max, d_max: p.d_max, lines });
    };
    // markers[l][c]: line l moves in interior column c (0-based)
    let mut markers = vec![vec![false; n]; lines];
    let mut per_col = vec![0usize; n];
    for row in markers.iter_mut() {
        let open: Vec<usize> = (0..n).filter(|&c| per_col[c] < p.d_max).collect();
        let c = *open.choose(rng).expect("capacity n * d_max >= lines");
        row[c] = true;
        per_col[c] += 1;
    }
    for _ in 0..p.extra_moves {
        let open: Vec<(usize, usize)> = (0..lines)
            .flat_map(|l| (0..n).map(move |c| (l, c)))
            .filter(|&(l, c)| !markers[l][c] && per_col[c] < p.d_max)
            .collect();
        let Some(&(l, c)) = open.choose(rng) else { break };
        markers[l][c] = true;
        per_col[c] += 1;
    }

    let mut cols: Vec<Projection> = vec![vec![None; lines]; n];
    for (l, line) in space.lines.iter().enumerate() {
        let marks: Vec<usize> = (0..n).filter(|&c| markers[l][c]).collect();
        let last = *marks.last().expect("one marker per line");
        let mut cur = line.init_value;
        for (c, col) in cols.iter_mut().enumerate() {
            if c >= last {
                cur = Some(line.goal_value);
            } else if markers[l][c] {
                let fresh: Vec<ObjId> = line.domain.iter().copied().filter(|v| Some(*v) != cur).collect();
                cur = fresh.choose(rng).copied().or(cur);
            }
            col[l] = cur;
        }
    }
    let mut stations: Vec<Station> = cols.iter().map(|c| space.station_from(c)).collect();

    let mut prev = space.init.clone();
    for k in 0..n {
        for l in 0..lines {
            if !stations[k].entries[l].active || !rng.gen_bool(p.p_mask) {
                continue;
            }
            let mut masked = stations[k].clone();
            masked.entries[l].active = false;
            let next = stations.get(k + 1).unwrap_or(&space.goal);
            let keeps_move = distance(&prev, &stations[k]) != 1 || distance(&prev, &masked) == 1;
            if keeps_move && distance(&masked.values(), next) <= p.d_max {
                stations[k] = masked;
            }
        }
        prev = stations[k].values();
    }
    Ok(Genome { stations })
}

/// New station is legal if neither neighbour distance grows beyond
/// `max(d_max, current)`.
fn legal(prev: &Projection, next: &Station, d_max: usize, old: &Station, new: &Station) -> bool {
    let before_in = distance(prev, old);
    let before_out = distance(&old.values(), next);
    distance(prev, new) <= d_max.max(before_in) && distance(&new.values(), next) <= d_max.max(before_out)
}

fn change_value<R: Rng + ?Sized>(
    space: &StationSpace,
    st: &Station,
    prev: &Projection,
    next: &Station,
    d_max: usize,
    idx: usize,
    rng: &mut R,
) -> Option<Station> {
    let e = st.entries[idx];
    let line = space.line_of(e.key)?;
    let options: Vec<Station> = line
        .domain
        .iter()
        .filter(|v| !(e.active && **v == e.value))
        .map(|&v| {
            let mut s = st.clone();
            s.entries[idx].value = v;
            s.entries[idx].active = true;
            s
        })
        .filter(|s| legal(prev, next, d_max, st, s))
        .collect();
    options.choose(rng).cloned()
}

fn mutate_between<R: Rng + ?Sized>(
    space: &StationSpace,
    st: &Station,
    prev: &Projection,
    next: &Station,
    d_max: usize,
    rates: &StationRates,
    rng: &mut R,
) -> Station {
    let active: Vec<usize> = (0..st.entries.len()).filter(|&i| st.entries[i].active).collect();
    let inactive: Vec<usize> = (0..st.entries.len()).filter(|&i| !st.entries[i].active).collect();
    let u: f64 = rng.gen();
    let out = if u < rates.change {
        active.choose(rng).and_then(|&i| change_value(space, st, prev, next, d_max, i, rng))
    } else if u < rates.change + rates.deactivate {
        active.choose(rng).and_then(|&i| {
            let mut s = st.clone();
            s.entries[i].active = false;
            legal(prev, next, d_max, st, &s).then_some(s)
        })
    } else {
        inactive.choose(rng).and_then(|&i| change_value(space, st, prev, next, d_max, i, rng))
    };
    out.unwrap_or_else(|| st.clone())
}

/// Mutates station `k` of `g` against its neighbours (init before the
/// first, goal after the last).
pub fn mutate_station<R: Rng + ?Sized>(
    space: &StationSpace,
    g: &Genome,
    k: usize,
    d_max: usize,
    rates: &StationRates,
    rng: &mut R,
) -> Station {
    let prev = space.neighbor_values(g, k);
    let next = space.next_station(g, k + 1);
    mutate_between(space, &g.stations[k], &prev, next, d_max, rates, rng)
}

/// Inserts a station at a uniform position: a copy of its left neighbour
/// with up to `d_max` values redrawn.
pub fn mutate_add<R: Rng + ?Sized>(
    space: &StationSpace,
    g: &Genome,
    d_max: usize,
    n_max: usize,
    rng: &mut R,
) -> Genome {
    let pos = rng.gen_range(0..=g.len());
    mutate_add_at(space, g, pos, d_max, n_max, rng)
}

/// [`mutate_add`] at a given position (`0..=len`).
pub fn mutate_add_at<R: Rng + ?Sized>(
    space: &StationSpace,
    g: &Genome,
    pos: usize,
    d_max: usize,
    n_max: usize,
    rng: &mut R,
) -> Genome {
    if g.len() >= n_max {
        return g.clone();
    }
    let prev = space.neighbor_values(g, pos);
    let next = space.next_station(g, pos);
    let mut st = if pos == 0 { space.station_from(&prev) } else { g.stations[pos - 1].clone() };
    let redraws = rng.gen_range(1..=d_max.max(1));
    for _ in 0..redraws {
        let active: Vec<usize> = (0..st.entries.len()).filter(|&i| st.entries[i].active).collect();
        if let Some(&i) = active.choose(rng) {
            if let Some(s) = change_value(space, &st, &prev, next, d_max, i, rng) {
                st = s;
            }
        }
    }
    let mut out = g.clone();
    out.stations.insert(pos, st);
    out
}

/// Removes a uniformly chosen station; no-op on an empty genome.
pub fn mutate_del<R: Rng + ?Sized>(g: &Genome, rng: &mut R) -> Genome {
    let mut out = g.clone();
    if !out.stations.is_empty() {
        let pos = rng.gen_range(0..out.stations.len());
        out.stations.remove(pos);
    }
    out
}

/// Distances along init, s_1..s_n, goal.
pub fn chain_distances(space: &StationSpace, g: &Genome) -> Vec<usize> {
    (0..=g.len()).map(|k| distance(&space.neighbor_values(g, k), space.next_station(g, k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::mini_zeno;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (GroundTask, StationSpace) {
        let mz = mini_zeno::build();
        let t = mz.task().unwrap();
        let s = StationSpace::new(&t, &mz.invariants).unwrap();
        (t, s)
    }

    fn obj(t: &GroundTask, n: &str) -> ObjId {
        t.object_id(n).unwrap()
    }

    #[test]
    fn five_goal_lines_over_city_values() {
        let (t, s) = setup();
        assert_eq!(s.num_lines(), 5);
        for l in &s.lines {
            assert_eq!(l.domain.len(), 5);
            assert_eq!(l.init_value, Some(obj(&t, "city0")));
            assert_eq!(l.goal_value, obj(&t, "city4"));
        }
        assert_eq!(distance(s.init_projection(), s.goal_station()), 5);
        assert_eq!(distance(&s.goal_station().values(), s.goal_station()), 0);
    }

    #[test]
    fn unknown_source_values_cost_nothing() {
        let (t, s) = setup();
        let goal = s.goal_station();
        let mut from = s.init_projection().clone();
        from[0] = None;
        from[1] = Some(obj(&t, "city4"));
        assert_eq!(distance(&from, goal), 3);
        let mut masked = goal.clone();
        masked.entries[2].active = false;
        assert_eq!(distance(&from, &masked), 2);
    }

    #[test]
    fn duplicate_active_key_is_inconsistent() {
        let (t, s) = setup();
        let mut st = s.goal_station().clone();
        assert!(is_consistent(&s, &st));
        st.entries[1] = Entry { key: st.entries[0].key, value: obj(&t, "city2"), active: true };
        assert!(!is_consistent(&s, &st));
        for e in &mut st.entries {
            e.active = false;
        }
        assert!(is_consistent(&s, &st));
    }

    #[test]
    fn init_infeasible_by_pigeonhole() {
        let (_, s) = setup();
        let p = InitParams { n_min: 1, n_max: 1, d_max: 1, ..InitParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(random_init(&s, &p, &mut rng), Err(StationError::InitInfeasible { .. })));
    }

    #[test]
    fn random_init_respects_column_caps() {
        let (_, s) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = InitParams::default();
        for _ in 0..500 {
            let g = random_init(&s, &p, &mut rng).unwrap();
            assert!((2..=10).contains(&g.len()));
            assert!(g.stations.iter().all(|st| is_consistent(&s, st)));
            assert!(chain_distances(&s, &g).iter().all(|&d| d <= p.d_max), "{:?}", chain_distances(&s, &g));
        }
    }

    #[test]
    fn change_on_fully_masked_station_is_noop() {
        let (_, s) = setup();
        let mut st = s.goal_station().clone();
        for e in &mut st.entries {
            e.active = false;
        }
        let g = Genome { stations: vec![st.clone()] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rates = StationRates { change: 1.0, deactivate: 0.0, reactivate: 0.0 };
        assert_eq!(mutate_station(&s, &g, 0, 3, &rates, &mut rng), st);
    }

    #[test]
    fn zero_d_max_freezes_values() {
        let (_, s) = setup();
        // one active entry equal to both neighbours
        let mut st = s.station_from(s.init_projection());
        for e in st.entries.iter_mut().skip(1) {
            e.active = false;
        }
        let g = Genome { stations: vec![st.clone(), st.clone()] };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rates = StationRates { change: 1.0, deactivate: 0.0, reactivate: 0.0 };
        assert_eq!(mutate_station(&s, &g, 0, 0, &rates, &mut rng), st);
    }

    #[test]
    fn add_and_del() {
        let (_, s) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = mutate_add(&s, &Genome::default(), 3, 20, &mut rng);
        assert_eq!(g.len(), 1);
        assert!(distance(s.init_projection(), &g.stations[0]) <= 3);
        assert!(mutate_del(&g, &mut rng).is_empty());
        assert!(mutate_del(&Genome::default(), &mut rng).is_empty());
    }

    #[test]
    fn dump_format() {
        let (t, s) = setup();
        let mut st = s.goal_station().clone();
        st.entries[0].active = false;
        let text = s.dump(&t, &Genome { stations: vec![st] });
        assert!(text.starts_with("station 1\n"));
        assert!(text.contains("  at: person1 -> #masked\n"));
        assert!(text.contains("-> city4"));
    }
}
