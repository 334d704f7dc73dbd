//! Multi-run experiment driver and its on-disk outputs.
//!
//! Layout of the output directory:
//!
//! ```text
//! summary.json        per-run best makespan, fronts and effort counters
//! front.csv           makespan,cost,run,generation (every run's archive)
//! gen_stats.csv       run,generation,... (all runs)
//! best_plan.txt       best schedule over all runs
//! timing.json         wall-clock times (the only non-reproducible file)
//! run-NN/             the same files restricted to run NN, plus fronts.csv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::evolve::{
    run_es, run_nsga2, Decoder, EngineCommon, EsParams, Evaluator, GenStats, Individual, Nsga2Params,
};
use crate::model::{fmt_rational, GroundTask, Rational};
use crate::schedule::format_plan;

use super::config::{ConfigError, Engine, ExperimentConfig, Instance, Objective};
use super::front::{ParetoFront, Provenance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrontRow {
    pub makespan: String,
    pub cost: String,
    pub run: usize,
    pub generation: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// 1-based.
    pub run: usize,
    pub seed: u64,
    pub best_makespan: Option<String>,
    pub best_cost: Option<String>,
    pub evaluations: usize,
    pub planner_calls: u64,
    pub backtracks: u64,
    pub front: Vec<FrontRow>,
    #[serde(skip)]
    pub archive: ParetoFront,
    #[serde(skip)]
    pub archive_history: Vec<ParetoFront>,
    #[serde(skip)]
    pub stats: Vec<GenStats>,
    #[serde(skip)]
    pub best_plan: Option<String>,
    #[serde(skip)]
    best_key: Option<(u64, Rational)>,
    #[serde(skip)]
    pub wall: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub engine: Engine,
    pub objective: Objective,
    pub master_seed: u64,
    pub runs: Vec<RunReport>,
    /// Non-dominated union of all run archives.
    pub front: Vec<FrontRow>,
    pub planner_calls: u64,
    pub backtracks: u64,
    #[serde(skip)]
    pub wall: Duration,
}

impl ExperimentReport {
    /// Run (1-based) holding the overall best plan.
    fn best_run(&self) -> Option<&RunReport> {
        self.runs.iter().filter(|r| r.best_key.is_some()).min_by_key(|r| (r.best_key, r.run))
    }
}

fn front_rows(task: &GroundTask, f: &ParetoFront) -> Vec<FrontRow> {
    let mut pts = f.points().to_vec();
    pts.sort_by(|a, b| (a.makespan, a.cost).cmp(&(b.makespan, b.cost)));
    pts.iter()
        .map(|p| {
            let (run, generation) = match p.source {
                Provenance::Run { run, generation } => (run, generation),
                Provenance::Oracle => (0, 0),
            };
            FrontRow { makespan: fmt_rational(&task.ticks_to_time(p.makespan)), cost: fmt_rational(&p.cost), run, generation }
        })
        .collect()
}

fn best_of<'a>(inds: impl IntoIterator<Item = &'a Individual>) -> Option<&'a Individual> {
    inds.into_iter()
        .filter(|i| i.eval.feasible)
        .min_by_key(|i| (i.eval.total_makespan, i.eval.total_cost, i.id))
}

fn one_run(cfg: &ExperimentConfig, decoder: &Decoder, r: usize) -> Result<RunReport, ConfigError> {
    let started = Instant::now();
    let task = decoder.task;
    let common = EngineCommon { seed: cfg.run_seed(r), generations: cfg.generations, ..EngineCommon::default() };
    let mut ev = Evaluator::new(decoder, r + 1);
    let (best, stats, history) = match cfg.engine {
        Engine::Es => {
            let rep = run_es(&mut ev, &EsParams { mu: cfg.mu, lambda: cfg.lambda, common })?;
            let best = rep.best.eval.feasible.then_some(rep.best);
            (best, rep.stats, Vec::new())
        }
        Engine::Nsga2 => {
            let rep = run_nsga2(&mut ev, &Nsga2Params { pop: cfg.pop, common })?;
            let best = best_of(rep.population.iter().map(|x| &x.ind)).cloned();
            (best, rep.stats, rep.archive_history)
        }
    };
    let plan = best.as_ref().and_then(|b| b.eval.global_schedule.as_ref().map(|s| format_plan(task, s)));
    let front = match cfg.objective() {
        Objective::MakespanCost => front_rows(task, &ev.archive),
        Objective::Makespan => Vec::new(),
    };
    Ok(RunReport {
        run: r + 1,
        seed: cfg.run_seed(r),
        best_makespan: best.as_ref().map(|b| fmt_rational(&task.ticks_to_time(b.eval.total_makespan))),
        best_cost: match (&best, cfg.objective()) {
            (Some(b), Objective::MakespanCost) => Some(fmt_rational(&b.eval.total_cost)),
            _ => None,
        },
        evaluations: ev.evaluations(),
        planner_calls: ev.planner_calls,
        backtracks: ev.backtracks,
        front,
        archive: ev.archive.clone(),
        archive_history: history,
        stats,
        best_plan: plan,
        best_key: best.as_ref().map(|b| (b.eval.total_makespan, b.eval.total_cost)),
        wall: started.elapsed(),
    })
}

/// Runs every configured run; runs share one sub-problem cache, which does
/// not affect results since the planner is deterministic.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let started = Instant::now();
    let inst = Instance::from_config(cfg)?;
    let space = inst.station_space()?;
    let decoder = Decoder::new(&inst.task, &space, cfg.limits, inst.cost.as_ref(), 20);
    let runs: Vec<RunReport> = if cfg.concurrent {
        (0..cfg.runs).into_par_iter().map(|r| one_run(cfg, &decoder, r)).collect::<Result<_, _>>()?
    } else {
        (0..cfg.runs).map(|r| one_run(cfg, &decoder, r)).collect::<Result<_, _>>()?
    };
    let mut union = ParetoFront::new();
    for r in &runs {
        for p in r.archive.points() {
            union.insert(p.makespan, p.cost, p.source);
        }
    }
    Ok(ExperimentReport {
        engine: cfg.engine,
        objective: cfg.objective(),
        master_seed: cfg.seed,
        front: match cfg.objective() {
            Objective::MakespanCost => front_rows(&inst.task, &union),
            Objective::Makespan => Vec::new(),
        },
        planner_calls: runs.iter().map(|r| r.planner_calls).sum(),
        backtracks: runs.iter().map(|r| r.backtracks).sum(),
        runs,
        wall: started.elapsed(),
    })
}

fn csv_text<T: Serialize>(rows: &[T]) -> std::io::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct StatsRow<'a> {
    run: usize,
    generation: usize,
    best_fitness: &'a str,
    best_makespan: Option<u64>,
    feasible: usize,
    mean_length: f64,
    planner_calls: u64,
    backtracks: u64,
}

#[derive(Serialize)]
struct HistoryRow {
    generation: usize,
    makespan: String,
    cost: String,
}

#[derive(Serialize)]
struct Timing {
    total_seconds: f64,
    runs: Vec<f64>,
}

fn stats_rows(r: &RunReport) -> Vec<StatsRow<'_>> {
    r.stats
        .iter()
        .map(|s| StatsRow {
            run: r.run,
            generation: s.generation,
            best_fitness: &s.best_fitness,
            best_makespan: s.best_makespan,
            feasible: s.feasible,
            mean_length: s.mean_length,
            planner_calls: s.planner_calls,
            backtracks: s.backtracks,
        })
        .collect()
}

/// Writes the report files under `dir` (created if needed).
pub fn write_outputs(task: &GroundTask, report: &ExperimentReport, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), to_json(report))?;
    fs::write(dir.join("front.csv"), csv_text(&report.runs.iter().flat_map(|r| r.front.clone()).collect::<Vec<_>>())?)?;
    fs::write(dir.join("gen_stats.csv"), csv_text(&report.runs.iter().flat_map(stats_rows).collect::<Vec<_>>())?)?;
    let best = report.best_run().and_then(|r| r.best_plan.clone()).unwrap_or_default();
    fs::write(dir.join("best_plan.txt"), best)?;
    let timing = Timing {
        total_seconds: report.wall.as_secs_f64(),
        runs: report.runs.iter().map(|r| r.wall.as_secs_f64()).collect(),
    };
    fs::write(dir.join("timing.json"), to_json(&timing))?;
    for r in &report.runs {
        let sub = dir.join(format!("run-{:02}", r.run));
        fs::create_dir_all(&sub)?;
        fs::write(sub.join("summary.json"), to_json(r))?;
        fs::write(sub.join("front.csv"), csv_text(&r.front)?)?;
        fs::write(sub.join("gen_stats.csv"), csv_text(&stats_rows(r))?)?;
        fs::write(sub.join("best_plan.txt"), r.best_plan.clone().unwrap_or_default())?;
        if !r.archive_history.is_empty() {
            let mut rows = Vec::new();
            for (g, f) in r.archive_history.iter().enumerate() {
                for p in front_rows(task, f) {
                    rows.push(HistoryRow { generation: g, makespan: p.makespan, cost: p.cost });
                }
            }
            fs::write(sub.join("fronts.csv"), csv_text(&rows)?)?;
        }
    }
    Ok(())
}

/// Human-readable one-screen summary.
pub fn describe(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for r in &report.runs {
        let _ = write!(out, "run {:>2} seed {:>3}: best makespan {}", r.run, r.seed, r.best_makespan.as_deref().unwrap_or("-"));
        if report.objective == Objective::MakespanCost {
            let pts: Vec<String> = r.front.iter().map(|p| format!("({}, {})", p.makespan, p.cost)).collect();
            let _ = write!(out, "  front {{{}}}", pts.join(", "));
        }
        let _ = writeln!(out, "  [{} planner calls]", r.planner_calls);
    }
    if report.objective == Objective::MakespanCost {
        let pts: Vec<String> = report.front.iter().map(|p| format!("({}, {})", p.makespan, p.cost)).collect();
        let _ = writeln!(out, "overall front {{{}}}", pts.join(", "));
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}
