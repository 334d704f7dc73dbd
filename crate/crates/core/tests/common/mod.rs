//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use dae_core::evolve::{mutate, Decoder, EvalResult, VariationParams};
use dae_core::model::{ActionId, GroundTask, Rational};
use dae_core::schedule::{compress, execute_sequence, makespan, validate, CompressionTracker};
use dae_core::stations::{random_init, Genome, InitParams, StationSpace};

/// Random walk over applicable actions, up to `max_len` steps.
pub fn random_sequence<R: Rng>(task: &GroundTask, max_len: usize, rng: &mut R) -> Vec<ActionId> {
    let mut state = task.init().clone();
    let mut seq = Vec::new();
    let len = rng.gen_range(0..=max_len);
    for _ in 0..len {
        let ok: Vec<ActionId> =
            task.actions().iter().filter(|a| state.contains_all(&a.pre)).map(|a| a.id).collect();
        let Some(&a) = ok.choose(rng) else { break };
        state = execute_sequence(task, &[a], &state).expect("applicable");
        seq.push(a);
    }
    seq
}

/// Compression of an executable sequence: validates, agrees with the
/// incremental tracker, never exceeds the serial makespan and is idempotent.
pub fn check_compress(task: &GroundTask, seq: &[ActionId]) -> Result<(), String> {
    let init = task.init();
    let s = compress(task, seq, init).map_err(|e| e.to_string())?;
    validate(task, &s, init).map_err(|v| format!("{v:?}"))?;
    let serial: u64 = seq.iter().map(|&a| task.action(a).dur).sum();
    if makespan(&s) > serial {
        return Err(format!("makespan {} > serial {}", makespan(&s), serial));
    }
    let t = CompressionTracker::compress(task, seq, init).map_err(|e| e.to_string())?;
    if t.starts() != s.starts() {
        return Err(format!("tracker starts {:?} != {:?}", t.starts(), s.starts()));
    }
    let mut by_start: Vec<(u64, usize, ActionId)> =
        s.occurrences.iter().map(|o| (o.start, o.rank, o.action)).collect();
    by_start.sort();
    let again = compress(task, &by_start.iter().map(|x| x.2).collect::<Vec<_>>(), init).map_err(|e| e.to_string())?;
    if makespan(&again) > makespan(&s) {
        return Err(format!("recompression grew {} -> {}", makespan(&s), makespan(&again)));
    }
    Ok(())
}

/// A random-init genome followed by up to three random mutations.
pub fn random_genome<R: Rng>(space: &StationSpace, rng: &mut R) -> Genome {
    let mut g = random_init(space, &InitParams::default(), rng).expect("init is feasible");
    let p = VariationParams::default();
    for _ in 0..rng.gen_range(0..=3) {
        g = mutate(space, &g, None, &p, rng);
    }
    g
}

/// Internal consistency of one decode.
pub fn check_decode(dec: &Decoder, g: &Genome, e: &EvalResult) -> Result<(), String> {
    let task = dec.task;
    let n = g.len();
    if e.feasible {
        if e.sub_plans.len() != n + 1 || e.sub_makespans.len() != n + 1 {
            return Err(format!("{} sub-plans for {} stations", e.sub_plans.len(), n));
        }
        let s = e.global_schedule.as_ref().ok_or("feasible without schedule")?;
        validate(task, s, task.init()).map_err(|v| format!("{v:?}"))?;
        let end = execute_sequence(task, &e.sequence, task.init()).map_err(|x| x.to_string())?;
        if !end.contains_all(task.goal()) {
            return Err("concatenated plan misses the goal".into());
        }
        if s.sequence() != e.sequence || s.makespan() != e.total_makespan {
            return Err("schedule disagrees with the recorded sequence".into());
        }
        let sum: u64 = e.sub_makespans.iter().sum();
        if e.total_makespan > sum {
            return Err(format!("total {} > sum of sub-makespans {}", e.total_makespan, sum));
        }
        let lens: usize = e.sub_plans.iter().map(|p| p.sequence().map_or(0, <[_]>::len)).sum();
        if lens != e.sequence.len() {
            return Err("sub-plan lengths do not add up".into());
        }
    } else {
        let k = e.fail_index.ok_or("infeasible without fail index")?;
        if k > n || e.sub_plans.len() != k + 1 || e.remaining_after_failure != n + 1 - k {
            return Err(format!("fail index {k} inconsistent with {} stations", n));
        }
        if e.sub_plans[k].is_solved() || e.sub_plans[..k].iter().any(|p| !p.is_solved()) {
            return Err("solved flags disagree with the fail index".into());
        }
    }
    Ok(())
}

/// Every feasible fitness and objective vector is strictly below every
/// infeasible one.
pub fn check_penalty(dec: &Decoder, evals: &[EvalResult]) -> Result<(), String> {
    let (feas, infeas): (Vec<&EvalResult>, Vec<&EvalResult>) = evals.iter().partition(|e| e.feasible);
    let max = |v: Vec<Rational>| v.into_iter().max();
    let min = |v: Vec<Rational>| v.into_iter().min();
    let f_hi = max(feas.iter().map(|e| dec.fitness_single(e)).collect());
    let f_lo = min(infeas.iter().map(|e| dec.fitness_single(e)).collect());
    let o1_hi = max(feas.iter().map(|e| dec.objectives_multi(e).0).collect());
    let o1_lo = min(infeas.iter().map(|e| dec.objectives_multi(e).0).collect());
    let o2_hi = max(feas.iter().map(|e| dec.objectives_multi(e).1).collect());
    let o2_lo = min(infeas.iter().map(|e| dec.objectives_multi(e).1).collect());
    for (name, hi, lo) in [("fitness", f_hi, f_lo), ("f1", o1_hi, o1_lo), ("f2", o2_hi, o2_lo)] {
        if let (Some(hi), Some(lo)) = (hi, lo) {
            if hi >= lo {
                return Err(format!("{name}: feasible {hi} >= infeasible {lo}"));
            }
        }
    }
    Ok(())
}

/// Fronts by repeated extraction of the non-dominated remainder.
pub fn brute_force_fronts(points: &[[i64; 2]]) -> Vec<Vec<usize>> {
    let dom = |a: &[i64; 2], b: &[i64; 2]| a[0] <= b[0] && a[1] <= b[1] && a != b;
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let (front, rest): (Vec<usize>, Vec<usize>) =
            left.iter().partition(|&&i| !left.iter().any(|&j| dom(&points[j], &points[i])));
        fronts.push(front);
        left = rest;
    }
    fronts
}

/// Relative path and contents of every file under `dir`, sorted; files named
/// `skip` are left out.
pub fn tree(dir: &Path, skip: &str) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != skip) {
                let rel = p.strip_prefix(dir).expect("under dir").display().to_string();
                out.push((rel, std::fs::read(&p).expect("readable file")));
            }
        }
    }
    out.sort();
    out
}
