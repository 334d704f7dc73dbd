//! Evolutionary layer: decoding genomes through the sub-planner, fitness
//! and objectives, variation operators, and the two engines.

mod es;
mod nsga2;

pub use es::{es_step, run_es, EsParams, EsReport};
pub use nsga2::{crowding_distance, non_dominated_sort, nsga2_step, run_nsga2, Nsga2Params, Nsga2Report, Ranked};

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::harness::{ParetoFront, Provenance};
use crate::model::{ActionId, AtomId, CostModel, GroundTask, Rational, WorldState};
use crate::planner::{solve, Outcome, PlanResult, SearchLimits, SubProblem};
use crate::schedule::{CompressionTracker, CostEvaluator, Schedule};
use crate::stations::{
    mutate_add, mutate_add_at, mutate_del, mutate_station, Genome, InitParams, StationRates, StationSpace,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalResult {
    pub feasible: bool,
    pub fail_index: Option<usize>,
    pub remaining_after_failure: usize,
    pub sub_plans: Vec<Arc<PlanResult>>,
    pub sub_makespans: Vec<u64>,
    pub sub_costs: Vec<Rational>,
    pub global_schedule: Option<Schedule>,
    pub total_makespan: u64,
    pub total_cost: Rational,
    pub sequence: Vec<ActionId>,
}

impl EvalResult {
    pub fn planner_calls(&self) -> u64 {
        self.sub_plans.len() as u64
    }

    pub fn backtracks(&self) -> u64 {
        self.sub_plans.iter().map(|p| p.backtracks_used).sum()
    }

    pub fn raw(&self) -> Option<(u64, Rational)> {
        self.feasible.then_some((self.total_makespan, self.total_cost))
    }
}

type SubKey = (WorldState, Vec<AtomId>);

/// Everything decode needs, plus a sub-problem cache shared by concurrent
/// evaluations (solve is deterministic, so sharing cannot change results).
pub struct Decoder<'a> {
    pub task: &'a GroundTask,
    pub space: &'a StationSpace,
    pub limits: SearchLimits,
    pub cost: Option<CostEvaluator>,
    /// Genome length cap; enters the penalty constant.
    pub n_max_hard: usize,
    cache: Mutex<HashMap<SubKey, Arc<PlanResult>>>,
}

impl<'a> Decoder<'a> {
    pub fn new(
        task: &'a GroundTask,
        space: &'a StationSpace,
        limits: SearchLimits,
        cost: Option<&CostModel>,
        n_max_hard: usize,
    ) -> Self {
        Decoder {
            task,
            space,
            limits,
            cost: cost.map(|cm| CostEvaluator::new(task, cm)),
            n_max_hard,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn solve_cached(&self, init: &WorldState, goal: Vec<AtomId>) -> Arc<PlanResult> {
        let key = (init.clone(), goal);
        if let Some(r) = self.cache.lock().expect("cache lock").get(&key) {
            return r.clone();
        }
        let sub = SubProblem { init: key.0.clone(), goal: key.1.clone() };
        let r = Arc::new(solve(self.task, &sub, &self.limits));
        self.cache.lock().expect("cache lock").entry(key).or_insert(r).clone()
    }

    /// Penalty unit for makespan-based fitness: exceeds any feasible value.
    pub fn big(&self) -> Rational {
        let bound = (self.n_max_hard as u64 + 1) * self.limits.max_sequence_length as u64 * self.task.max_duration();
        Rational::from_integer(1 + bound as i64)
    }

    /// Penalty unit for the cost objective.
    pub fn big_cost(&self) -> Rational {
        let Some(ev) = &self.cost else { return Rational::from_integer(1) };
        let per_action = ev.max_event_value(self.task);
        let k = Rational::from_integer(2 * (self.n_max_hard as i64 + 1) * self.limits.max_sequence_length as i64);
        Rational::from_integer(1) + k * per_action
    }

    pub fn decode(&self, g: &Genome) -> EvalResult {
        let task = self.task;
        let n = g.len();
        let mut state = task.init().clone();
        let mut sub_plans = Vec::with_capacity(n + 1);
        let mut sub_makespans = Vec::with_capacity(n + 1);
        let mut sub_costs = Vec::with_capacity(n + 1);
        let mut sequence: Vec<ActionId> = Vec::new();
        for k in 0..=n {
            let goal = if k < n { self.space.goal_atoms(&g.stations[k]) } else { task.goal().to_vec() };
            let r = self.solve_cached(&state, goal);
            let Outcome::Solved { sequence: seq, schedule, .. } = &r.outcome else {
                sub_plans.push(r);
                return EvalResult {
                    feasible: false,
                    fail_index: Some(k),
                    remaining_after_failure: n + 1 - k,
                    sub_plans,
                    sub_makespans,
                    sub_costs,
                    global_schedule: None,
                    total_makespan: 0,
                    total_cost: Rational::default(),
                    sequence,
                };
            };
            sub_makespans.push(schedule.makespan());
            if let Some(ev) = &self.cost {
                sub_costs.push(ev.evaluate_unchecked(task, schedule, &state));
            }
            state = crate::schedule::execute_sequence(task, seq, &state).expect("solved plans execute");
            sequence.extend_from_slice(seq);
            sub_plans.push(r.clone());
        }
        let global = CompressionTracker::compress(task, &sequence, task.init()).expect("concatenation executes");
        let total_cost = self
            .cost
            .as_ref()
            .map(|ev| ev.evaluate_unchecked(task, &global, task.init()))
            .unwrap_or_default();
        EvalResult {
            feasible: true,
            fail_index: None,
            remaining_after_failure: 0,
            sub_plans,
            sub_makespans,
            sub_costs,
            total_makespan: global.makespan(),
            global_schedule: Some(global),
            total_cost,
            sequence,
        }
    }

    /// Mean of (total + sum of sub-makespans); penalised when infeasible.
    pub fn fitness_single(&self, e: &EvalResult) -> Rational {
        fitness_single(e, self.big())
    }

    pub fn objectives_multi(&self, e: &EvalResult) -> (Rational, Rational) {
        objectives_multi(e, self.big(), self.big_cost())
    }
}

pub fn fitness_single(e: &EvalResult, big: Rational) -> Rational {
    if e.feasible {
        let sum: u64 = e.sub_makespans.iter().sum();
        Rational::new((e.total_makespan + sum) as i64, 2)
    } else {
        big * Rational::from_integer(1 + e.remaining_after_failure as i64)
    }
}

/// (f1, f2): f1 as [`fitness_single`]; f2 = total cost plus the mean cost of
/// the sub-plans with non-zero makespan.
pub fn objectives_multi(e: &EvalResult, big: Rational, big_cost: Rational) -> (Rational, Rational) {
    if !e.feasible {
        let k = Rational::from_integer(1 + e.remaining_after_failure as i64);
        return (big * k, big_cost * k);
    }
    let counted: Vec<Rational> = e
        .sub_costs
        .iter()
        .zip(&e.sub_makespans)
        .filter(|(_, m)| **m > 0)
        .map(|(c, _)| *c)
        .collect();
    let mean = if counted.is_empty() {
        Rational::default()
    } else {
        counted.iter().sum::<Rational>() / Rational::from_integer(counted.len() as i64)
    };
    (fitness_single(e, big), e.total_cost + mean)
}

/// Tail exchange at independent uniform cut points.
pub fn crossover_1pt<R: Rng + ?Sized>(a: &Genome, b: &Genome, n_max: usize, rng: &mut R) -> (Genome, Genome) {
    let u = rng.gen_range(0..=a.len());
    let v = rng.gen_range(0..=b.len());
    crossover_at(a, b, u, v, n_max)
}

pub fn crossover_at(a: &Genome, b: &Genome, u: usize, v: usize, n_max: usize) -> (Genome, Genome) {
    let mut c1: Vec<_> = a.stations[..u].iter().chain(&b.stations[v..]).cloned().collect();
    let mut c2: Vec<_> = b.stations[..v].iter().chain(&a.stations[u..]).cloned().collect();
    c1.truncate(n_max);
    c2.truncate(n_max);
    (Genome { stations: c1 }, Genome { stations: c2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationParams {
    pub p_crossover: f64,
    pub p_add: f64,
    pub p_del: f64,
    pub p_station: f64,
    pub station: StationRates,
    pub d_max: usize,
    pub n_max_hard: usize,
    /// Place Add/Del by sub-problem difficulty instead of uniformly.
    pub guided: bool,
}

impl Default for VariationParams {
    fn default() -> Self {
        VariationParams {
            p_crossover: 0.25,
            p_add: 0.25,
            p_del: 0.25,
            p_station: 0.5,
            station: StationRates::default(),
            d_max: 3,
            n_max_hard: 20,
            guided: false,
        }
    }
}

/// Index of the hardest sub-problem (most backtracks; the failing one when
/// infeasible).
fn hardest(e: &EvalResult) -> usize {
    if let Some(k) = e.fail_index {
        return k;
    }
    let mut best = 0;
    for (k, p) in e.sub_plans.iter().enumerate() {
        if p.backtracks_used > e.sub_plans[best].backtracks_used {
            best = k;
        }
    }
    best
}

/// One mutation: Add, Del or per-station mutation at the configured split.
pub fn mutate<R: Rng + ?Sized>(
    space: &StationSpace,
    g: &Genome,
    eval: Option<&EvalResult>,
    p: &VariationParams,
    rng: &mut R,
) -> Genome {
    let total = p.p_add + p.p_del + p.p_station;
    let u: f64 = rng.gen::<f64>() * total;
    if u < p.p_add {
        match eval.filter(|_| p.guided) {
            // insert just before the hardest sub-goal
            Some(e) => mutate_add_at(space, g, hardest(e).min(g.len()), p.d_max, p.n_max_hard, rng),
            _ => mutate_add(space, g, p.d_max, p.n_max_hard, rng),
        }
    } else if u < p.p_add + p.p_del {
        match eval.filter(|_| p.guided && !g.is_empty()) {
            Some(e) => {
                let mut out = g.clone();
                out.stations.remove(hardest(e).min(g.len() - 1));
                out
            }
            None => mutate_del(g, rng),
        }
    } else {
        let mut out = g.clone();
        let n = out.len();
        for k in 0..n {
            if rng.gen_bool(1.0 / n as f64) {
                out.stations[k] = mutate_station(space, &out, k, p.d_max, &p.station, rng);
            }
        }
        out
    }
}

/// Derives the RNG stream of one child from (seed, generation, index).
pub fn child_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

/// Creates one child from `parents` (selected by `pick`).
pub(crate) fn make_child<R: Rng + ?Sized>(
    space: &StationSpace,
    parents: &[(&Genome, &EvalResult)],
    p: &VariationParams,
    mut pick: impl FnMut(&mut R) -> usize,
    rng: &mut R,
) -> Genome {
    if parents.len() >= 2 && rng.gen_bool(p.p_crossover) {
        let i = pick(rng);
        let mut j = pick(rng);
        let mut guard = 0;
        while j == i && guard < 8 {
            j = pick(rng);
            guard += 1;
        }
        let (c1, c2) = crossover_1pt(parents[i].0, parents[j].0, p.n_max_hard, rng);
        if rng.gen_bool(0.5) {
            c1
        } else {
            c2
        }
    } else {
        let i = pick(rng);
        mutate(space, parents[i].0, Some(parents[i].1), p, rng)
    }
}

/// Genome-level evaluation cache of one run; new genomes of a batch are
/// decoded in parallel, and the batch's counters only depend on its contents.
/// Runs may share a decoder (and so its sub-problem cache).
pub struct Evaluator<'a> {
    pub decoder: &'a Decoder<'a>,
    cache: HashMap<Genome, Arc<EvalResult>>,
    pub planner_calls: u64,
    pub backtracks: u64,
    /// Archive of raw (makespan, cost) pairs over every feasible evaluation.
    pub archive: ParetoFront,
    pub run: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(decoder: &'a Decoder<'a>, run: usize) -> Self {
        Evaluator { decoder, cache: HashMap::new(), planner_calls: 0, backtracks: 0, archive: ParetoFront::new(), run }
    }

    /// Distinct genomes evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.cache.len()
    }

    pub fn evaluate_batch(&mut self, genomes: &[Genome], generation: usize) -> Vec<Arc<EvalResult>> {
        let mut fresh: Vec<&Genome> = Vec::new();
        for g in genomes {
            if !self.cache.contains_key(g) && !fresh.contains(&g) {
                fresh.push(g);
            }
        }
        let decoder = self.decoder;
        let results: Vec<EvalResult> = fresh.par_iter().map(|g| decoder.decode(g)).collect();
        for (g, e) in fresh.into_iter().zip(results) {
            self.planner_calls += e.planner_calls();
            self.backtracks += e.backtracks();
            if let Some((m, c)) = e.raw() {
                self.archive.insert(m, c, Provenance::Run { run: self.run, generation });
            }
            self.cache.insert(g.clone(), Arc::new(e));
        }
        genomes.iter().map(|g| self.cache[g].clone()).collect()
    }
}

/// Per-generation statistics row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GenStats {
    pub generation: usize,
    pub best_fitness: String,
    pub best_makespan: Option<u64>,
    pub feasible: usize,
    pub mean_length: f64,
    pub planner_calls: u64,
    pub backtracks: u64,
}

/// Shared knobs of both engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineCommon {
    pub seed: u64,
    pub generations: usize,
    pub init: InitParams,
    pub variation: VariationParams,
}

impl Default for EngineCommon {
    fn default() -> Self {
        EngineCommon { seed: 1, generations: 30, init: InitParams::default(), variation: VariationParams::default() }
    }
}

/// One evaluated member of a population.
#[derive(Debug, Clone)]
pub struct Individual {
    /// Creation order within the run; unique.
    pub id: u64,
    pub genome: Genome,
    pub eval: Arc<EvalResult>,
}

pub(crate) fn random_population(
    space: &StationSpace,
    size: usize,
    common: &EngineCommon,
    generation: usize,
) -> Result<Vec<Genome>, crate::stations::StationError> {
    (0..size)
        .map(|i| {
            let mut rng = child_rng(common.seed, generation, i);
            crate::stations::random_init(space, &common.init, &mut rng)
        })
        .collect()
}
