//! Fixed-seed reruns produce byte-identical output files.

mod common;

use std::path::PathBuf;

use dae_core::harness::{run_experiment, write_outputs, ExperimentConfig, Instance, Settings};

fn data(file: &str) -> String {
    format!("{}/data/mini-zeno/{file}", env!("CARGO_MANIFEST_DIR"))
}

fn config(engine: &str) -> ExperimentConfig {
    let mut s = Settings::default();
    s.set("domain", data("domain.pddl"));
    s.set("problem", data("problem.pddl"));
    s.set("invariants", data("invariants.txt"));
    s.set("cost", data("cost-additive.txt"));
    s.set("engine", engine);
    s.set("pop", 16);
    s.set("mu", 4);
    s.set("lambda", 16);
    s.set("gens", 4);
    s.set("runs", 2);
    s.set("seed", 3);
    s.set("max-backtracks", 300);
    ExperimentConfig::from_settings(&s).unwrap()
}

fn outputs(cfg: &ExperimentConfig) -> (tempfile::TempDir, Vec<(String, Vec<u8>)>) {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(cfg).unwrap();
    let inst = Instance::from_config(cfg).unwrap();
    write_outputs(&inst.task, &report, dir.path()).unwrap();
    let files = common::tree(dir.path(), "timing.json");
    (dir, files)
}

fn assert_reproducible(engine: &str) {
    let cfg = config(engine);
    let (_a, first) = outputs(&cfg);
    let (_b, second) = outputs(&cfg);
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    for f in ["summary.json", "front.csv", "gen_stats.csv", "best_plan.txt"] {
        assert!(names.contains(&f), "{f} missing from {names:?}");
    }
    assert_eq!(first, second);
}

#[test]
fn es_reruns_are_byte_identical() {
    assert_reproducible("es");
}

#[test]
fn nsga2_reruns_are_byte_identical() {
    assert_reproducible("nsga2");
}

#[test]
fn concurrent_runs_match_sequential_ones() {
    let mut cfg = config("nsga2");
    let (_a, seq) = outputs(&cfg);
    cfg.concurrent = true;
    let (_b, par) = outputs(&cfg);
    assert_eq!(seq, par);
}

#[test]
fn front_csv_has_the_documented_header() {
    let (dir, _) = outputs(&config("nsga2"));
    let text = std::fs::read_to_string(PathBuf::from(dir.path()).join("front.csv")).unwrap();
    assert!(text.starts_with("makespan,cost,run,generation\n"), "{text}");
}
