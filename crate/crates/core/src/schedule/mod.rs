//! Temporal semantics over ground actions: interference, validity,
//! earliest-start compression, makespan and cost.
//!
//! Time is in integer ticks. An occurrence `<a, t>` needs `pre(a)` true at
//! `t` and makes its effects visible at `t + dur(a)`. Within one tick the
//! order is: effects of positive-duration occurrences ending there (adds win
//! over deletes), then zero-duration occurrences in rank order (each checks
//! its preconditions and applies its effects), then the precondition checks
//! of positive-duration occurrences starting there.

mod cost;
mod tracker;

pub use cost::{evaluate_cost, CostEvaluator};
pub use tracker::{dominates, CompressionTracker, Signature};

use std::fmt;

use thiserror::Error;

use crate::model::{fmt_rational, ActionId, AtomId, GroundAction, GroundTask, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Occurrence {
    pub action: ActionId,
    pub start: u64,
    pub dur: u64,
    /// Position in the generating total order.
    pub rank: usize,
}

impl Occurrence {
    pub fn end(&self) -> u64 {
        self.start + self.dur
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub occurrences: Vec<Occurrence>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, task: &GroundTask, action: ActionId, start: u64) {
        let rank = self.occurrences.len();
        self.occurrences.push(Occurrence { action, start, dur: task.action(action).dur, rank });
    }

    pub fn len(&self) -> usize {
        self.occurrences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty()
    }

    pub fn makespan(&self) -> u64 {
        makespan(self)
    }

    /// Actions in rank order.
    pub fn sequence(&self) -> Vec<ActionId> {
        let mut occ = self.occurrences.clone();
        occ.sort_by_key(|o| o.rank);
        occ.into_iter().map(|o| o.action).collect()
    }

    pub fn starts(&self) -> Vec<u64> {
        let mut occ = self.occurrences.clone();
        occ.sort_by_key(|o| o.rank);
        occ.into_iter().map(|o| o.start).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PreconditionUnmet { rank: usize, action: ActionId, atom: AtomId, time: u64 },
    InterferenceOverlap { ranks: (usize, usize), actions: (ActionId, ActionId), time: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PreconditionUnmet { rank, atom, time, .. } => {
                write!(f, "occurrence #{rank}: precondition atom {} unmet at tick {time}", atom.0)
            }
            Violation::InterferenceOverlap { ranks, time, .. } => {
                write!(f, "occurrences #{} and #{} interfere and overlap at tick {time}", ranks.0, ranks.1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("action #{rank} ({action}) is not applicable after its predecessors")]
    NotSequentiallyExecutable { rank: usize, action: String },
    #[error("invalid schedule: {} violation(s), first: {}", .0.len(), .0[0])]
    InvalidSchedule(Vec<Violation>),
}

fn intersects(a: &[AtomId], b: &[AtomId]) -> bool {
    // both sorted
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// One deletes a precondition or add effect of the other.
pub fn interferes(a: &GroundAction, b: &GroundAction) -> bool {
    intersects(&a.del, &b.pre)
        || intersects(&a.del, &b.add)
        || intersects(&b.del, &a.pre)
        || intersects(&b.del, &a.add)
}

/// Closed intervals `[s, s+d]` sharing more than one point. With integer
/// endpoints that is a strict interior intersection.
pub fn overlaps(o1: &Occurrence, o2: &Occurrence) -> bool {
    o1.start < o2.end() && o2.start < o1.end()
}

pub fn makespan(sched: &Schedule) -> u64 {
    sched.occurrences.iter().map(Occurrence::end).max().unwrap_or(0)
}

/// Callbacks fired while replaying a schedule tick by tick.
pub(crate) trait Observer {
    /// `occ` is about to execute; `state` is the world at its start.
    fn check(&mut self, occ: &Occurrence, state: &WorldState);
}

impl<F: FnMut(&Occurrence, &WorldState)> Observer for F {
    fn check(&mut self, occ: &Occurrence, state: &WorldState) {
        self(occ, state)
    }
}

fn apply_effects(task: &GroundTask, state: &mut WorldState, occs: &[&Occurrence]) {
    for o in occs {
        for &p in &task.action(o.action).del {
            state.remove(p);
        }
    }
    for o in occs {
        for &p in &task.action(o.action).add {
            state.insert(p);
        }
    }
}

/// Replays `sched` from `init`, calling `obs` at each occurrence start.
/// Returns the final state.
pub(crate) fn replay(
    task: &GroundTask,
    sched: &Schedule,
    init: &WorldState,
    obs: &mut impl Observer,
) -> WorldState {
    let mut state = init.clone();
    let mut ticks: Vec<u64> =
        sched.occurrences.iter().flat_map(|o| [o.start, o.end()]).collect();
    ticks.sort_unstable();
    ticks.dedup();
    let mut by_end: Vec<&Occurrence> = sched.occurrences.iter().filter(|o| o.dur > 0).collect();
    by_end.sort_by_key(|o| (o.end(), o.rank));
    let mut zero: Vec<&Occurrence> = sched.occurrences.iter().filter(|o| o.dur == 0).collect();
    zero.sort_by_key(|o| (o.start, o.rank));
    let mut by_start: Vec<&Occurrence> = sched.occurrences.iter().filter(|o| o.dur > 0).collect();
    by_start.sort_by_key(|o| (o.start, o.rank));
    let (mut ie, mut iz, mut is) = (0, 0, 0);
    for t in ticks {
        let from = ie;
        while ie < by_end.len() && by_end[ie].end() == t {
            ie += 1;
        }
        apply_effects(task, &mut state, &by_end[from..ie]);
        while iz < zero.len() && zero[iz].start == t {
            obs.check(zero[iz], &state);
            apply_effects(task, &mut state, &zero[iz..=iz]);
            iz += 1;
        }
        while is < by_start.len() && by_start[is].start == t {
            obs.check(by_start[is], &state);
            is += 1;
        }
    }
    state
}

/// State reached at the end of the schedule.
pub fn final_state(task: &GroundTask, sched: &Schedule, init: &WorldState) -> WorldState {
    replay(task, sched, init, &mut |_: &Occurrence, _: &WorldState| {})
}

/// Checks preconditions under the inductive truth definition and the
/// no-overlap rule for interfering pairs. Reports every violation.
pub fn validate(task: &GroundTask, sched: &Schedule, init: &WorldState) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let occ = &sched.occurrences;
    for i in 0..occ.len() {
        for j in i + 1..occ.len() {
            let (a, b) = (&occ[i], &occ[j]);
            if overlaps(a, b) && interferes(task.action(a.action), task.action(b.action)) {
                let (a, b) = if a.rank <= b.rank { (a, b) } else { (b, a) };
                out.push(Violation::InterferenceOverlap {
                    ranks: (a.rank, b.rank),
                    actions: (a.action, b.action),
                    time: a.start.max(b.start),
                });
            }
        }
    }
    let mut pre_fail = Vec::new();
    replay(task, sched, init, &mut |o: &Occurrence, s: &WorldState| {
        for &p in &task.action(o.action).pre {
            if !s.contains(p) {
                pre_fail.push(Violation::PreconditionUnmet { rank: o.rank, action: o.action, atom: p, time: o.start });
            }
        }
    });
    out.extend(pre_fail);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Applies `seq` sequentially (STRIPS semantics) and returns the final state.
pub fn execute_sequence(
    task: &GroundTask,
    seq: &[ActionId],
    init: &WorldState,
) -> Result<WorldState, ScheduleError> {
    let mut state = init.clone();
    for (rank, &a) in seq.iter().enumerate() {
        let act = task.action(a);
        if !state.contains_all(&act.pre) {
            return Err(ScheduleError::NotSequentiallyExecutable { rank, action: act.name() });
        }
        for &p in &act.del {
            state.remove(p);
        }
        for &p in &act.add {
            state.insert(p);
        }
    }
    Ok(state)
}

/// Greedy earliest-start list scheduling in sequence order: each occurrence
/// starts no earlier than the end of every earlier occurrence it interferes
/// with, at the first tick where its preconditions hold given everything
/// placed before it.
pub fn compress(task: &GroundTask, seq: &[ActionId], init: &WorldState) -> Result<Schedule, ScheduleError> {
    execute_sequence(task, seq, init)?;
    let mut placed: Vec<Occurrence> = Vec::with_capacity(seq.len());
    for (rank, &a) in seq.iter().enumerate() {
        let act = task.action(a);
        let lb = placed
            .iter()
            .filter(|o| interferes(task.action(o.action), act))
            .map(Occurrence::end)
            .max()
            .unwrap_or(0);
        // prefix events in tick order: positive ends first, then zero-duration by rank
        let mut events: Vec<&Occurrence> = placed.iter().collect();
        events.sort_by_key(|o| (o.end(), o.dur == 0, o.rank));
        let mut state = init.clone();
        let mut k = 0;
        let advance = |state: &mut WorldState, k: &mut usize, t: u64| {
            while *k < events.len() && events[*k].end() <= t {
                let tick = events[*k].end();
                let from = *k;
                while *k < events.len() && events[*k].end() == tick && events[*k].dur > 0 {
                    *k += 1;
                }
                apply_effects(task, state, &events[from..*k]);
                while *k < events.len() && events[*k].end() == tick {
                    apply_effects(task, state, &events[*k..=*k]);
                    *k += 1;
                }
            }
        };
        let mut candidates: Vec<u64> = placed.iter().map(Occurrence::end).filter(|&e| e > lb).collect();
        candidates.push(lb);
        candidates.sort_unstable();
        candidates.dedup();
        let mut start = None;
        for t in candidates {
            advance(&mut state, &mut k, t);
            if state.contains_all(&act.pre) {
                start = Some(t);
                break;
            }
        }
        let start = start.expect("sequentially executable sequence always fits after its prefix");
        placed.push(Occurrence { action: a, start, dur: act.dur, rank });
    }
    Ok(Schedule { occurrences: placed })
}

/// Plan text: `t: (action args) [dur]` per line, sorted by start then rank,
/// times in the problem's own units.
pub fn format_plan(task: &GroundTask, sched: &Schedule) -> String {
    let mut occ = sched.occurrences.clone();
    occ.sort_by_key(|o| (o.start, o.rank));
    let mut out = String::new();
    for o in occ {
        let a = task.action(o.action);
        out.push_str(&format!(
            "{}: {} [{}]\n",
            fmt_rational(&task.ticks_to_time(o.start)),
            a.name(),
            fmt_rational(&task.ticks_to_time(o.dur))
        ));
    }
    out
}
