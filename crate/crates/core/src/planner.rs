//! Exact, resource-bounded sub-planner: depth-first branch-and-bound over
//! action sequences, each prefix scored by its compressed makespan.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ActionId, AtomId, GroundAction, GroundTask, WorldState};
use crate::schedule::{dominates, CompressionTracker, Schedule, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("action {0} is not applicable")]
    NotApplicable(String),
    #[error("goal atom {0} is absent and added by no action")]
    GoalUnsupportable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SearchLimits {
    pub max_backtracks: u64,
    pub max_sequence_length: usize,
    /// Prune every prefix whose makespan bound exceeds this many ticks.
    pub max_makespan_bound: Option<u64>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_backtracks: 2_000, max_sequence_length: 24, max_makespan_bound: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubProblem {
    pub init: WorldState,
    pub goal: Vec<AtomId>,
}

impl SubProblem {
    pub fn whole(task: &GroundTask) -> Self {
        SubProblem { init: task.init().clone(), goal: task.goal().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Solved {
        sequence: Vec<ActionId>,
        schedule: Schedule,
        /// False when the backtrack limit fired before optimality was proven.
        optimal: bool,
    },
    BacktrackLimit,
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanResult {
    pub outcome: Outcome,
    pub backtracks_used: u64,
    pub nodes_expanded: u64,
}

impl PlanResult {
    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, Outcome::Solved { .. })
    }

    pub fn makespan(&self) -> Option<u64> {
        match &self.outcome {
            Outcome::Solved { schedule, .. } => Some(schedule.makespan()),
            _ => None,
        }
    }

    pub fn sequence(&self) -> Option<&[ActionId]> {
        match &self.outcome {
            Outcome::Solved { sequence, .. } => Some(sequence),
            _ => None,
        }
    }
}

pub fn applicable(state: &WorldState, action: &GroundAction) -> bool {
    state.contains_all(&action.pre)
}

pub fn apply(state: &WorldState, action: &GroundAction) -> Result<WorldState, PlanError> {
    if !applicable(state, action) {
        return Err(PlanError::NotApplicable(action.name()));
    }
    let mut next = state.clone();
    for &p in &action.del {
        next.remove(p);
    }
    for &p in &action.add {
        next.insert(p);
    }
    Ok(next)
}

/// Max over unsatisfied goal atoms of the shortest duration of an adder.
pub fn heuristic(state: &WorldState, goal: &[AtomId], task: &GroundTask) -> Result<u64, PlanError> {
    let mut h = 0;
    for &g in goal.iter().filter(|g| !state.contains(**g)) {
        let best = task.adders(g).iter().map(|a| task.action(*a).dur).min();
        match best {
            Some(d) => h = h.max(d),
            None => return Err(PlanError::GoalUnsupportable(task.atom(g).to_string())),
        }
    }
    Ok(h)
}

pub(crate) const INF: u64 = u64::MAX;

/// Relaxed earliest tick at which each atom can hold, given the interference
/// bounds already fixed by the prefix. Admissible for the compressed
/// makespan of any extension that only uses `actions`.
pub(crate) fn earliest_times(task: &GroundTask, actions: &[ActionId], tr: &CompressionTracker) -> Vec<u64> {
    let mut est: Vec<u64> = (0..task.num_atoms())
        .map(|i| {
            let p = AtomId(i as u32);
            if tr.state().contains(p) {
                tr.true_since(p)
            } else {
                INF
            }
        })
        .collect();
    loop {
        let mut changed = false;
        for &id in actions {
            let a = task.action(id);
            let mut s = 0u64;
            for &q in &a.pre {
                s = s.max(est[q.idx()]);
            }
            if s == INF {
                continue;
            }
            for &q in a.pre.iter().chain(&a.add) {
                s = s.max(tr.del_end(q));
            }
            for &q in &a.del {
                s = s.max(tr.use_end(q));
            }
            let e = s + a.dur;
            for &p in &a.add {
                if e < est[p.idx()] {
                    est[p.idx()] = e;
                    changed = true;
                }
            }
        }
        if !changed {
            return est;
        }
    }
}

/// Actions that can contribute to `goal`: adders of goal atoms, closed under
/// "adds a precondition of a relevant action". Dropping any other action from
/// a plan never delays the remaining ones.
pub fn relevant_actions(task: &GroundTask, goal: &[AtomId]) -> Vec<ActionId> {
    let mut wanted = vec![false; task.num_atoms()];
    let mut taken = vec![false; task.actions().len()];
    let mut stack: Vec<AtomId> = goal.to_vec();
    for &g in goal {
        wanted[g.idx()] = true;
    }
    while let Some(p) = stack.pop() {
        for &a in task.adders(p) {
            if taken[a.idx()] {
                continue;
            }
            taken[a.idx()] = true;
            for &q in &task.action(a).pre {
                if !wanted[q.idx()] {
                    wanted[q.idx()] = true;
                    stack.push(q);
                }
            }
        }
    }
    task.actions().iter().map(|a| a.id).filter(|a| taken[a.idx()]).collect()
}

struct Search<'a> {
    task: &'a GroundTask,
    goal: &'a [AtomId],
    actions: Vec<ActionId>,
    limits: SearchLimits,
    visited: HashMap<WorldState, Vec<Signature>>,
    threshold: u64,
    next_threshold: u64,
    best: Option<Vec<ActionId>>,
    prefix: Vec<ActionId>,
    backtracks: u64,
    nodes: u64,
    aborted: bool,
}

impl Search<'_> {
    fn bound(&self, tr: &CompressionTracker) -> u64 {
        if tr.state().contains_all(self.goal) {
            return tr.makespan();
        }
        let est = earliest_times(self.task, &self.actions, tr);
        self.goal.iter().fold(tr.makespan(), |b, g| b.max(est[g.idx()]))
    }

    /// Prefixes whose bound exceeds the current threshold; records the
    /// smallest such bound as the next threshold.
    fn over(&mut self, bound: u64) -> bool {
        if bound == INF || self.limits.max_makespan_bound.is_some_and(|m| bound > m) {
            return true;
        }
        if bound > self.threshold {
            self.next_threshold = self.next_threshold.min(bound);
            return true;
        }
        false
    }

    /// Revisits of a state whose compression signature is no better than a
    /// recorded one are pruned.
    fn dominated(&mut self, tr: &CompressionTracker) -> bool {
        let sig = tr.signature();
        let entries = self.visited.entry(tr.state().clone()).or_default();
        if entries.iter().any(|s| dominates(s, &sig)) {
            return true;
        }
        entries.retain(|s| !dominates(&sig, s));
        entries.push(sig);
        false
    }

    fn visit(&mut self, tr: &CompressionTracker, bound: u64) {
        let depth = self.prefix.len();
        if self.over(bound) {
            return;
        }
        if tr.state().contains_all(self.goal) {
            self.best = Some(self.prefix.clone());
            return;
        }
        if depth >= self.limits.max_sequence_length || self.dominated(tr) {
            return;
        }
        self.nodes += 1;
        let mut children: Vec<(u64, ActionId, CompressionTracker)> = Vec::new();
        for i in 0..self.actions.len() {
            let id = self.actions[i];
            let a = self.task.action(id);
            if !applicable(tr.state(), a) {
                continue;
            }
            let mut child = tr.clone();
            child.push(a);
            let b = self.bound(&child);
            if !self.over(b) {
                children.push((b, id, child));
            }
        }
        // most promising first; ties keep action order
        children.sort_by_key(|(b, id, _)| (*b, *id));
        for (b, id, child) in children {
            if self.aborted || self.best.is_some() {
                return;
            }
            self.prefix.push(id);
            self.visit(&child, b);
            self.prefix.pop();
        }
        self.backtracks += 1;
        if self.backtracks >= self.limits.max_backtracks {
            self.aborted = true;
        }
    }

    /// Depth-first passes with a rising makespan threshold: each pass admits
    /// only prefixes whose bound is within it, so the first goal reached is
    /// makespan-optimal.
    fn run(&mut self, root: &CompressionTracker) {
        let b = self.bound(root);
        self.threshold = b;
        while !self.aborted && self.best.is_none() && self.threshold != INF {
            self.next_threshold = INF;
            self.visited.clear();
            self.visit(root, b);
            self.threshold = self.next_threshold;
        }
    }
}

/// Action elimination: drop an action together with every later action
/// that it alone enabled, as long as the rest stays executable, still reaches
/// the goal and is no slower.
fn prune_redundant(task: &GroundTask, sub: &SubProblem, mut seq: Vec<ActionId>) -> Vec<ActionId> {
    let makespan = |seq: &[ActionId]| -> u64 {
        let mut tr = CompressionTracker::new(task, &sub.init);
        for &id in seq {
            tr.push(task.action(id));
        }
        tr.makespan()
    };
    let mut ms = makespan(&seq);
    let mut i = 0;
    while i < seq.len() {
        let mut state = sub.init.clone();
        let mut kept = Vec::with_capacity(seq.len());
        for (j, &id) in seq.iter().enumerate() {
            let a = task.action(id);
            if j == i || (j > i && !applicable(&state, a)) {
                continue;
            }
            state = apply(&state, a).expect("checked applicable");
            kept.push(id);
        }
        if state.contains_all(&sub.goal) && makespan(&kept) <= ms {
            ms = makespan(&kept);
            seq = kept;
        } else {
            i += 1;
        }
    }
    seq
}

pub fn solve(task: &GroundTask, sub: &SubProblem, limits: &SearchLimits) -> PlanResult {
    if heuristic(&sub.init, &sub.goal, task).is_err() {
        return PlanResult { outcome: Outcome::Unsolvable, backtracks_used: 0, nodes_expanded: 0 };
    }
    let mut search = Search {
        task,
        goal: &sub.goal,
        actions: relevant_actions(task, &sub.goal),
        limits: *limits,
        visited: HashMap::new(),
        threshold: 0,
        next_threshold: INF,
        best: None,
        prefix: Vec::new(),
        backtracks: 0,
        nodes: 0,
        aborted: false,
    };
    search.run(&CompressionTracker::new(task, &sub.init));
    let outcome = match search.best {
        Some(sequence) => {
            let sequence = prune_redundant(task, sub, sequence);
            let schedule = CompressionTracker::compress(task, &sequence, &sub.init)
                .expect("search only extends applicable prefixes");
            Outcome::Solved { sequence, schedule, optimal: !search.aborted }
        }
        None if search.aborted => Outcome::BacktrackLimit,
        None => Outcome::Unsolvable,
    };
    PlanResult { outcome, backtracks_used: search.backtracks, nodes_expanded: search.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::mini_zeno;
    use crate::schedule::validate;

    fn task() -> GroundTask {
        mini_zeno::build().task().unwrap()
    }

    fn act<'a>(t: &'a GroundTask, op: &str, args: &[&str]) -> &'a GroundAction {
        t.find_action(op, args).unwrap()
    }

    #[test]
    fn fly_is_applicable_at_start() {
        let t = task();
        assert!(applicable(t.init(), act(&t, "fly-short", &["plane1", "city0", "city1"])));
        assert!(!applicable(t.init(), act(&t, "fly-short", &["plane1", "city1", "city4"])));
    }

    #[test]
    fn fly_moves_the_plane() {
        let t = task();
        let s = apply(t.init(), act(&t, "fly-short", &["plane1", "city0", "city1"])).unwrap();
        assert!(!s.contains(t.find_atom("at", &["plane1", "city0"]).unwrap()));
        assert!(s.contains(t.find_atom("at", &["plane1", "city1"]).unwrap()));
        assert!(apply(t.init(), act(&t, "fly-short", &["plane1", "city1", "city4"])).is_err());
    }

    #[test]
    fn board_then_debark_restores_state() {
        let t = task();
        let b = apply(t.init(), act(&t, "board", &["person1", "plane1", "city0"])).unwrap();
        let d = apply(&b, act(&t, "debark", &["person1", "plane1", "city0"])).unwrap();
        assert_ne!(&b, t.init());
        assert_eq!(&d, t.init());
    }

    #[test]
    fn heuristic_values() {
        let t = task();
        assert_eq!(heuristic(t.init(), &[], &t), Ok(0));
        let at11 = t.find_atom("at", &["plane1", "city1"]).unwrap();
        assert_eq!(heuristic(t.init(), &[at11], &t), Ok(4));
        let unreachable = t.find_atom("at", &["person1", "city4"]).unwrap();
        let mut empty = t.empty_state();
        empty.insert(unreachable);
        assert_eq!(heuristic(&empty, &[unreachable], &t), Ok(0));
    }

    #[test]
    fn whole_problem_has_makespan_8() {
        let t = task();
        let r = solve(&t, &SubProblem::whole(&t), &SearchLimits::default());
        let Outcome::Solved { schedule, optimal, sequence } = &r.outcome else { panic!("{r:?}") };
        assert!(optimal);
        assert_eq!(schedule.makespan(), 8);
        assert_eq!(validate(&t, schedule, t.init()), Ok(()));
        let end = crate::schedule::final_state(&t, schedule, t.init());
        assert!(end.contains_all(t.goal()));
        // 3 boards, 4 flights, 3 debarks
        assert_eq!(sequence.len(), 10);
    }

    #[test]
    fn goal_in_init_is_empty_plan() {
        let t = task();
        let sub = SubProblem { init: t.init().clone(), goal: vec![t.find_atom("at", &["plane1", "city0"]).unwrap()] };
        let r = solve(&t, &sub, &SearchLimits::default());
        assert_eq!(r.makespan(), Some(0));
        assert_eq!(r.sequence(), Some(&[][..]));
    }

    #[test]
    fn tiny_backtrack_budget() {
        let t = task();
        let limits = SearchLimits { max_backtracks: 1, ..SearchLimits::default() };
        let r = solve(&t, &SubProblem::whole(&t), &limits);
        assert!(matches!(r.outcome, Outcome::BacktrackLimit | Outcome::Solved { optimal: false, .. }));
        assert_eq!(r.backtracks_used, 1);
    }
}
