//! Experiment configuration: `key = value` files layered under command-line
//! flags, and loading of the referenced instance files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    ground, parse_cost_model, parse_domain, parse_invariants, parse_problem, CostModel, GroundTask,
    InvariantSpec, ModelError,
};
use crate::planner::SearchLimits;
use crate::stations::{StationError, StationSpace};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error("{0}")]
    Stations(#[from] StationError),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("missing required `{0}`")]
    Missing(&'static str),
    #[error("the makespan+cost objective needs a cost file")]
    MissingCost,
    #[error("runs must be at least 1")]
    NoRuns,
}

pub const KEYS: &[&str] = &[
    "domain",
    "problem",
    "invariants",
    "cost",
    "engine",
    "mu",
    "lambda",
    "pop",
    "gens",
    "runs",
    "seed",
    "max-backtracks",
    "max-length",
    "out",
    "concurrent",
];

/// Raw settings by key. Later layers overwrite earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings(pub BTreeMap<String, String>);

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
            let (k, v) = (k.trim().replace('_', "-"), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k));
            }
            map.insert(k, v);
        }
        Ok(Settings(map))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.clone() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Es,
    Nsga2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Objective {
    #[serde(rename = "makespan")]
    Makespan,
    #[serde(rename = "makespan+cost")]
    MakespanCost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub domain: PathBuf,
    pub problem: PathBuf,
    pub invariants: Option<PathBuf>,
    pub cost: Option<PathBuf>,
    pub engine: Engine,
    pub mu: usize,
    pub lambda: usize,
    pub pop: usize,
    pub generations: usize,
    pub runs: usize,
    pub seed: u64,
    pub limits: SearchLimits,
    pub out: Option<PathBuf>,
    pub concurrent: bool,
}

impl ExperimentConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let path = |k: &str| s.0.get(k).map(PathBuf::from);
        let engine = match s.0.get("engine").map(String::as_str) {
            None | Some("es") => Engine::Es,
            Some("nsga2") => Engine::Nsga2,
            Some(v) => return Err(ConfigError::BadValue { key: "engine".into(), value: v.into() }),
        };
        let defaults = SearchLimits::default();
        let cfg = ExperimentConfig {
            domain: path("domain").ok_or(ConfigError::Missing("domain"))?,
            problem: path("problem").ok_or(ConfigError::Missing("problem"))?,
            invariants: path("invariants"),
            cost: path("cost"),
            engine,
            mu: s.get("mu")?.unwrap_or(10),
            lambda: s.get("lambda")?.unwrap_or(70),
            pop: s.get("pop")?.unwrap_or(100),
            generations: s.get("gens")?.unwrap_or(30),
            runs: s.get("runs")?.unwrap_or(1),
            seed: s.get("seed")?.unwrap_or(1),
            limits: SearchLimits {
                max_backtracks: s.get("max-backtracks")?.unwrap_or(defaults.max_backtracks),
                max_sequence_length: s.get("max-length")?.unwrap_or(defaults.max_sequence_length),
                max_makespan_bound: None,
            },
            out: path("out"),
            concurrent: s.get("concurrent")?.unwrap_or(false),
        };
        if cfg.runs == 0 {
            return Err(ConfigError::NoRuns);
        }
        if cfg.objective() == Objective::MakespanCost && cfg.cost.is_none() {
            return Err(ConfigError::MissingCost);
        }
        Ok(cfg)
    }

    pub fn objective(&self) -> Objective {
        match self.engine {
            Engine::Es => Objective::Makespan,
            Engine::Nsga2 => Objective::MakespanCost,
        }
    }

    /// Seed of run `r` (0-based).
    pub fn run_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

/// Parsed and grounded instance files.
#[derive(Debug, Clone)]
pub struct Instance {
    pub task: GroundTask,
    pub invariants: Option<InvariantSpec>,
    pub cost: Option<CostModel>,
}

impl Instance {
    pub fn load(domain: &Path, problem: &Path, invariants: Option<&Path>, cost: Option<&Path>) -> Result<Self, ConfigError> {
        let dom = parse_domain(&read(domain)?).map_err(model(domain))?;
        let prob = parse_problem(&read(problem)?, &dom).map_err(model(problem))?;
        let task = ground(&dom, &prob).map_err(model(problem))?;
        let invariants = match invariants {
            Some(p) => Some(parse_invariants(&read(p)?, &dom).map_err(model(p))?),
            None => None,
        };
        let cost = match cost {
            Some(p) => Some(parse_cost_model(&read(p)?).map_err(model(p))?),
            None => None,
        };
        Ok(Instance { task, invariants, cost })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        Self::load(&cfg.domain, &cfg.problem, cfg.invariants.as_deref(), cfg.cost.as_deref())
    }

    pub fn station_space(&self) -> Result<StationSpace, ConfigError> {
        let inv = self.invariants.as_ref().ok_or(ConfigError::Missing("invariants"))?;
        Ok(StationSpace::new(&self.task, inv)?)
    }
}

fn model(path: &Path) -> impl Fn(ModelError) -> ConfigError + '_ {
    move |source| ConfigError::Model { path: path.to_path_buf(), source }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Settings {
        let mut s = Settings::default();
        s.set("domain", "d.pddl");
        s.set("problem", "p.pddl");
        s
    }

    #[test]
    fn parses_key_values_and_comments() {
        let s = Settings::parse("# header\nengine = nsga2\nmax_backtracks = 500  # inline\n\n").unwrap();
        assert_eq!(s.0.get("engine").map(String::as_str), Some("nsga2"));
        assert_eq!(s.0.get("max-backtracks").map(String::as_str), Some("500"));
        assert!(matches!(Settings::parse("engine"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(Settings::parse("colour = red"), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn defaults_follow_the_es() {
        let cfg = ExperimentConfig::from_settings(&base()).unwrap();
        assert_eq!((cfg.engine, cfg.mu, cfg.lambda, cfg.runs), (Engine::Es, 10, 70, 1));
        assert_eq!(cfg.objective(), Objective::Makespan);
        assert_eq!(cfg.run_seed(3), 4);
    }

    #[test]
    fn later_layers_win() {
        let mut s = base();
        s.0.extend(Settings::parse("pop = 20\nseed = 9").unwrap().0);
        s.set("seed", 5);
        let cfg = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!((cfg.pop, cfg.seed), (20, 5));
    }

    #[test]
    fn cost_objective_needs_cost_file() {
        let mut s = base();
        s.set("engine", "nsga2");
        assert!(matches!(ExperimentConfig::from_settings(&s), Err(ConfigError::MissingCost)));
        s.set("cost", "c.txt");
        assert!(ExperimentConfig::from_settings(&s).is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let mut s = base();
        s.set("runs", "0");
        assert!(matches!(ExperimentConfig::from_settings(&s), Err(ConfigError::NoRuns)));
        s.set("runs", "many");
        assert!(matches!(ExperimentConfig::from_settings(&s), Err(ConfigError::BadValue { .. })));
        assert!(matches!(ExperimentConfig::from_settings(&Settings::default()), Err(ConfigError::Missing("domain"))));
    }

    #[test]
    fn missing_file_is_reported() {
        let e = Instance::load(Path::new("/nonexistent/d.pddl"), Path::new("p"), None, None).unwrap_err();
        assert!(matches!(e, ConfigError::Io { .. }));
    }
}
