//! Cost of a schedule under a [`CostModel`].

use std::collections::HashMap;

use crate::model::{Accrual, ActionId, AtomId, CostMode, CostModel, GroundTask, Rational, WorldState};

use super::{replay, validate, Occurrence, Schedule, ScheduleError};

/// A cost model compiled against one task.
#[derive(Debug, Clone)]
pub struct CostEvaluator {
    mode: CostMode,
    accrual: Accrual,
    /// Per action: (aboard atoms of its vehicle, v(origin) + v(destination)).
    moves: Vec<Option<(usize, Rational)>>,
    aboard: Vec<Vec<AtomId>>,
}

impl CostEvaluator {
    pub fn new(task: &GroundTask, cm: &CostModel) -> Self {
        let (aboard_pred, vehicle_arg) = &cm.aboard;
        let mut vehicles: HashMap<&str, usize> = HashMap::new();
        let mut aboard: Vec<Vec<AtomId>> = Vec::new();
        let mut moves = Vec::with_capacity(task.actions().len());
        for a in task.actions() {
            let rule = cm.move_rule(&a.operator).filter(|r| {
                r.vehicle.max(r.origin).max(r.dest) < a.args.len()
            });
            moves.push(rule.map(|r| {
                let v = a.args[r.vehicle].as_str();
                let slot = *vehicles.entry(v).or_insert_with(|| {
                    aboard.push(
                        task.atoms()
                            .iter()
                            .enumerate()
                            .filter(|(_, at)| {
                                &at.predicate == aboard_pred
                                    && at.args.get(*vehicle_arg).map(String::as_str) == Some(v)
                            })
                            .map(|(i, _)| AtomId(i as u32))
                            .collect(),
                    );
                    aboard.len() - 1
                });
                (slot, cm.value(&a.args[r.origin]) + cm.value(&a.args[r.dest]))
            }));
        }
        CostEvaluator { mode: cm.mode, accrual: cm.accrual, moves, aboard }
    }

    /// Largest value a single event can take.
    pub fn max_event_value(&self, _task: &GroundTask) -> Rational {
        self.moves
            .iter()
            .flatten()
            .map(|(slot, base)| match (self.mode, self.accrual) {
                (CostMode::Additive, Accrual::Occupancy) => {
                    base * Rational::from_integer(1 + self.aboard[*slot].len() as i64)
                }
                _ => *base,
            })
            .max()
            .unwrap_or_default()
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    pub fn is_move(&self, action: ActionId) -> bool {
        self.moves[action.idx()].is_some()
    }

    /// Folds one event value into a running total.
    pub fn combine(&self, total: Rational, v: Rational) -> Rational {
        match self.mode {
            CostMode::Additive => total + v,
            CostMode::Max => total.max(v),
        }
    }

    /// Value of one movement occurrence given the state at its start.
    pub fn event_value(&self, occ: &Occurrence, state: &WorldState) -> Rational {
        self.action_value(occ.action, state)
    }

    pub fn action_value(&self, action: ActionId, state: &WorldState) -> Rational {
        let Some((slot, base)) = self.moves[action.idx()] else {
            return Rational::default();
        };
        match (self.mode, self.accrual) {
            (CostMode::Max, _) | (CostMode::Additive, Accrual::Flight) => base,
            (CostMode::Additive, Accrual::Occupancy) => {
                let aboard = self.aboard[slot].iter().filter(|p| state.contains(**p)).count();
                base * Rational::from_integer(1 + aboard as i64)
            }
        }
    }

    /// Combines event values per the mode; assumes a valid schedule.
    pub fn evaluate_unchecked(&self, task: &GroundTask, sched: &Schedule, init: &WorldState) -> Rational {
        let mut total = Rational::default();
        replay(task, sched, init, &mut |o: &Occurrence, s: &WorldState| {
            if self.moves[o.action.idx()].is_some() {
                total = self.combine(total, self.event_value(o, s));
            }
        });
        total
    }

    pub fn evaluate(&self, task: &GroundTask, sched: &Schedule, init: &WorldState) -> Result<Rational, ScheduleError> {
        validate(task, sched, init).map_err(ScheduleError::InvalidSchedule)?;
        Ok(self.evaluate_unchecked(task, sched, init))
    }
}

pub fn evaluate_cost(
    task: &GroundTask,
    sched: &Schedule,
    init: &WorldState,
    cm: &CostModel,
) -> Result<Rational, ScheduleError> {
    CostEvaluator::new(task, cm).evaluate(task, sched, init)
}
