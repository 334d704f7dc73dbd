//! Exhaustive Pareto oracle: enumerates sequentially executable action
//! sequences, compresses each goal-reaching one and keeps the non-dominated
//! raw (makespan, cost) pairs.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{ActionId, CostModel, GroundTask, Rational, WorldState};
use crate::planner::{applicable, earliest_times, INF};
use crate::schedule::{compress, dominates, validate, CompressionTracker, CostEvaluator, Signature};

use super::front::{ParetoFront, Provenance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle expanded more than {cap} nodes")]
    CapExceeded { cap: u64 },
    #[error("schedule for {plan} is invalid: {detail}")]
    InvalidSchedule { plan: String, detail: String },
    #[error("cost of {plan} changed after later actions were appended")]
    NonMonotoneCost { plan: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBounds {
    pub max_sequence_length: usize,
    pub node_cap: u64,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds { max_sequence_length: 12, node_cap: 50_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleStats {
    pub nodes: u64,
    pub leaves: u64,
}

struct Oracle<'a> {
    task: &'a GroundTask,
    eval: CostEvaluator,
    bounds: OracleBounds,
    front: ParetoFront,
    visited: HashMap<WorldState, Vec<(Signature, Rational, usize)>>,
    prefix: Vec<ActionId>,
    actions: Vec<ActionId>,
    stats: OracleStats,
}

impl Oracle<'_> {
    fn plan_text(&self) -> String {
        let names: Vec<String> = self.prefix.iter().map(|a| self.task.action(*a).name()).collect();
        names.join(" ")
    }

    fn leaf(&mut self, tr: &CompressionTracker, cost: Rational) -> Result<(), OracleError> {
        self.stats.leaves += 1;
        let init = self.task.init();
        let sched = compress(self.task, &self.prefix, init)
            .map_err(|e| OracleError::InvalidSchedule { plan: self.plan_text(), detail: e.to_string() })?;
        if let Err(v) = validate(self.task, &sched, init) {
            return Err(OracleError::InvalidSchedule { plan: self.plan_text(), detail: v[0].to_string() });
        }
        let exact = self.eval.evaluate_unchecked(self.task, &sched, init);
        if exact != cost || sched.makespan() != tr.makespan() {
            return Err(OracleError::NonMonotoneCost { plan: self.plan_text() });
        }
        self.front.insert(sched.makespan(), exact, Provenance::Oracle);
        Ok(())
    }

    fn dominated(&mut self, tr: &CompressionTracker, cost: Rational, depth: usize) -> bool {
        let sig = tr.signature();
        let entries = self.visited.entry(tr.state().clone()).or_default();
        if entries.iter().any(|(s, c, d)| *d <= depth && *c <= cost && dominates(s, &sig)) {
            return true;
        }
        entries.retain(|(s, c, d)| !(depth <= *d && cost <= *c && dominates(&sig, s)));
        entries.push((sig, cost, depth));
        false
    }

    fn visit(&mut self, tr: &CompressionTracker, cost: Rational) -> Result<(), OracleError> {
        let goal = self.task.goal();
        if tr.state().contains_all(goal) {
            // extensions never lower makespan or cost
            return self.leaf(tr, cost);
        }
        let depth = self.prefix.len();
        if depth >= self.bounds.max_sequence_length {
            return Ok(());
        }
        let est = earliest_times(self.task, &self.actions, tr);
        let lb = goal.iter().fold(tr.makespan(), |m, g| m.max(est[g.idx()]));
        if lb == INF || self.front.covers(lb, cost) || self.dominated(tr, cost, depth) {
            return Ok(());
        }
        self.stats.nodes += 1;
        if self.stats.nodes > self.bounds.node_cap {
            return Err(OracleError::CapExceeded { cap: self.bounds.node_cap });
        }
        for a in self.task.actions() {
            if !applicable(tr.state(), a) {
                continue;
            }
            let mut child = tr.clone();
            let child_cost = if self.eval.is_move(a.id) {
                self.eval.combine(cost, self.eval.action_value(a.id, tr.state()))
            } else {
                cost
            };
            child.push(a);
            self.prefix.push(a.id);
            let r = self.visit(&child, child_cost);
            self.prefix.pop();
            r?;
        }
        Ok(())
    }
}

/// Non-dominated (makespan, cost) pairs over all goal-reaching sequences of
/// at most `bounds.max_sequence_length` actions.
pub fn brute_force_pareto(
    task: &GroundTask,
    cm: &CostModel,
    bounds: &OracleBounds,
) -> Result<(ParetoFront, OracleStats), OracleError> {
    let mut o = Oracle {
        task,
        eval: CostEvaluator::new(task, cm),
        bounds: *bounds,
        front: ParetoFront::new(),
        visited: HashMap::new(),
        prefix: Vec::new(),
        actions: task.actions().iter().map(|a| a.id).collect(),
        stats: OracleStats::default(),
    };
    o.visit(&CompressionTracker::new(task, task.init()), Rational::default())?;
    Ok((o.front, o.stats))
}
