//! Incremental form of [`compress`](super::compress): appending one action
//! at a time using per-atom summaries of the placed prefix instead of the
//! full timeline.

use crate::model::{ActionId, GroundAction, GroundTask, WorldState};

use super::{Occurrence, Schedule, ScheduleError};

/// Per-atom summary of a compressed prefix.
///
/// * `del_end[p]`: latest end of an occurrence deleting `p`
/// * `use_end[p]`: latest end of an occurrence with `p` in pre or add
/// * `true_since[p]`: tick from which `p` holds for good (0 while false)
///
/// Every start time computed from these is monotone in each component, so a
/// componentwise-smaller summary over the same state can never lead to a
/// later schedule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompressionTracker {
    state: WorldState,
    del_end: Vec<u64>,
    use_end: Vec<u64>,
    true_since: Vec<u64>,
    makespan: u64,
}

/// Flattened `(makespan, del_end, use_end, true_since)` for dominance tests.
pub type Signature = Vec<u64>;

impl CompressionTracker {
    pub fn new(task: &GroundTask, init: &WorldState) -> Self {
        let n = task.num_atoms();
        CompressionTracker {
            state: init.clone(),
            del_end: vec![0; n],
            use_end: vec![0; n],
            true_since: vec![0; n],
            makespan: 0,
        }
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn makespan(&self) -> u64 {
        self.makespan
    }

    /// Earliest start `a` would get if appended now.
    pub fn earliest_start(&self, a: &GroundAction) -> u64 {
        let mut s = 0;
        for &p in a.pre.iter().chain(&a.add) {
            s = s.max(self.del_end[p.idx()]);
        }
        for &p in &a.del {
            s = s.max(self.use_end[p.idx()]);
        }
        for &p in &a.pre {
            s = s.max(self.true_since[p.idx()]);
        }
        s
    }

    /// Lower bound on the start of any occurrence that deletes `p` or needs
    /// it, ignoring preconditions.
    pub fn del_end(&self, p: crate::model::AtomId) -> u64 {
        self.del_end[p.idx()]
    }

    pub fn use_end(&self, p: crate::model::AtomId) -> u64 {
        self.use_end[p.idx()]
    }

    pub fn true_since(&self, p: crate::model::AtomId) -> u64 {
        self.true_since[p.idx()]
    }

    /// Appends `a` (which must be applicable) and returns its start.
    pub fn push(&mut self, a: &GroundAction) -> u64 {
        debug_assert!(self.state.contains_all(&a.pre));
        let s = self.earliest_start(a);
        let e = s + a.dur;
        for &p in &a.del {
            let i = p.idx();
            self.del_end[i] = self.del_end[i].max(e);
            self.state.remove(p);
            self.true_since[i] = 0;
        }
        for &p in a.pre.iter().chain(&a.add) {
            let i = p.idx();
            self.use_end[i] = self.use_end[i].max(e);
        }
        for &p in &a.add {
            let i = p.idx();
            self.true_since[i] = if self.state.contains(p) { self.true_since[i].min(e) } else { e };
            self.state.insert(p);
        }
        self.makespan = self.makespan.max(e);
        s
    }

    pub fn signature(&self) -> Signature {
        let mut sig = Vec::with_capacity(1 + 3 * self.del_end.len());
        sig.push(self.makespan);
        sig.extend_from_slice(&self.del_end);
        sig.extend_from_slice(&self.use_end);
        sig.extend_from_slice(&self.true_since);
        sig
    }

    /// Compresses a whole sequence; same result as [`super::compress`].
    pub fn compress(task: &GroundTask, seq: &[ActionId], init: &WorldState) -> Result<Schedule, ScheduleError> {
        let mut tr = CompressionTracker::new(task, init);
        let mut sched = Schedule::new();
        for (rank, &id) in seq.iter().enumerate() {
            let a = task.action(id);
            if !tr.state.contains_all(&a.pre) {
                return Err(ScheduleError::NotSequentiallyExecutable { rank, action: a.name() });
            }
            let start = tr.push(a);
            sched.occurrences.push(Occurrence { action: id, start, dur: a.dur, rank });
        }
        Ok(sched)
    }
}

/// `a` is componentwise no greater than `b`.
pub fn dominates(a: &[u64], b: &[u64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x <= y)
}
