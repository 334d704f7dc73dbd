use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dae_core::harness::{
    brute_force_pareto, experiment, run_experiment, write_outputs, ConfigError, ExperimentConfig, Instance,
    OracleBounds, Settings,
};
use dae_core::model::fmt_rational;
use dae_core::planner::{solve, Outcome, SubProblem};
use dae_core::schedule::format_plan;

#[derive(Parser)]
#[command(name = "dae", version, about = "Divide-and-Evolve temporal planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the whole problem with the embedded planner.
    Solve(Common),
    /// Evolve station sequences (ES by default).
    Evolve(Common),
    /// Multi-objective makespan/cost search (NSGA-II).
    Pareto(Common),
    /// Exhaustive makespan/cost front of a small instance.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Longest action sequence the oracle enumerates.
        #[arg(long, default_value_t = 12)]
        max_length: usize,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` file; explicit flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    invariants: Option<PathBuf>,
    #[arg(long)]
    cost: Option<PathBuf>,
    #[arg(long, value_parser = ["es", "nsga2"])]
    engine: Option<String>,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_backtracks: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Execute runs concurrently.
    #[arg(long)]
    concurrent: bool,
}

impl Common {
    fn settings(&self, engine: Option<&str>) -> Result<Settings, ConfigError> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        let paths = [
            ("domain", &self.domain),
            ("problem", &self.problem),
            ("invariants", &self.invariants),
            ("cost", &self.cost),
            ("out", &self.out),
        ];
        for (k, v) in paths {
            if let Some(v) = v {
                s.set(k, v.display());
            }
        }
        let numbers = [
            ("mu", self.mu.map(|v| v as u64)),
            ("lambda", self.lambda.map(|v| v as u64)),
            ("pop", self.pop.map(|v| v as u64)),
            ("gens", self.gens.map(|v| v as u64)),
            ("runs", self.runs.map(|v| v as u64)),
            ("seed", self.seed),
            ("max-backtracks", self.max_backtracks),
        ];
        for (k, v) in numbers {
            if let Some(v) = v {
                s.set(k, v);
            }
        }
        if let Some(e) = &self.engine {
            s.set("engine", e);
        }
        if self.concurrent {
            s.set("concurrent", true);
        }
        // the subcommand fixes the engine where it implies one
        if let Some(e) = engine {
            s.set("engine", e);
        }
        Ok(s)
    }

    fn config(&self, engine: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_settings(&self.settings(engine)?)
    }
}

fn io(path: &std::path::Path) -> impl Fn(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io { path: path.to_path_buf(), source }
}

fn cmd_solve(c: &Common) -> Result<(), ConfigError> {
    let cfg = c.config(None)?;
    let inst = Instance::from_config(&cfg)?;
    let r = solve(&inst.task, &SubProblem::whole(&inst.task), &cfg.limits);
    match &r.outcome {
        Outcome::Solved { schedule, optimal, .. } => {
            let plan = format_plan(&inst.task, schedule);
            print!("{plan}");
            let ms = fmt_rational(&inst.task.ticks_to_time(schedule.makespan()));
            let proof = if *optimal { "optimal" } else { "not proven optimal" };
            println!("makespan {ms} ({proof}; {} backtracks)", r.backtracks_used);
            if let Some(dir) = &cfg.out {
                std::fs::create_dir_all(dir).map_err(io(dir))?;
                let f = dir.join("best_plan.txt");
                std::fs::write(&f, plan).map_err(io(&f))?;
            }
        }
        Outcome::BacktrackLimit => println!("no plan within {} backtracks", cfg.limits.max_backtracks),
        Outcome::Unsolvable => println!("unsolvable within {} actions", cfg.limits.max_sequence_length),
    }
    Ok(())
}

fn cmd_evolve(c: &Common, engine: Option<&str>) -> Result<(), ConfigError> {
    let cfg = c.config(engine)?;
    let report = run_experiment(&cfg)?;
    print!("{}", experiment::describe(&report));
    if let Some(dir) = &cfg.out {
        let inst = Instance::from_config(&cfg)?;
        write_outputs(&inst.task, &report, dir).map_err(io(dir))?;
    }
    Ok(())
}

fn cmd_oracle(c: &Common, max_length: usize) -> Result<(), ConfigError> {
    let cfg = c.config(None)?;
    let inst = Instance::from_config(&cfg)?;
    let cm = inst.cost.as_ref().ok_or(ConfigError::MissingCost)?;
    let bounds = OracleBounds { max_sequence_length: max_length, ..OracleBounds::default() };
    match brute_force_pareto(&inst.task, cm, &bounds) {
        Ok((front, stats)) => {
            println!("{front}  ({} nodes, {} plans)", stats.nodes, stats.leaves);
            if let Some(dir) = &cfg.out {
                std::fs::create_dir_all(dir).map_err(io(dir))?;
                let mut text = String::from("makespan,cost,run,generation\n");
                for (m, cost) in front.pairs() {
                    text += &format!("{},{},0,0\n", fmt_rational(&inst.task.ticks_to_time(m)), fmt_rational(&cost));
                }
                let f = dir.join("front.csv");
                std::fs::write(&f, text).map_err(io(&f))?;
            }
        }
        Err(e) => println!("oracle failed: {e}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::Evolve(c) => cmd_evolve(c, None),
        Command::Pareto(c) => cmd_evolve(c, Some("nsga2")),
        Command::Oracle { common, max_length } => cmd_oracle(common, *max_length),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
