//! (mu, lambda) evolution strategy with comma selection.

use rand::Rng;

use crate::model::{fmt_rational, Rational};
use crate::stations::StationError;

use super::{child_rng, make_child, random_population, EngineCommon, Evaluator, GenStats, Individual};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsParams {
    pub mu: usize,
    pub lambda: usize,
    pub common: EngineCommon,
}

impl Default for EsParams {
    fn default() -> Self {
        EsParams { mu: 10, lambda: 70, common: EngineCommon::default() }
    }
}

fn ranked(ev: &Evaluator, mut pop: Vec<Individual>) -> Vec<(Rational, Individual)> {
    let mut out: Vec<(Rational, Individual)> =
        pop.drain(..).map(|i| (ev.decoder.fitness_single(&i.eval), i)).collect();
    out.sort_by(|(fa, a), (fb, b)| {
        (fa, a.eval.total_makespan, a.id).cmp(&(fb, b.eval.total_makespan, b.id))
    });
    out
}

/// Produces lambda children from `parents` and keeps the mu best of them.
pub fn es_step(
    ev: &mut Evaluator,
    parents: &[Individual],
    p: &EsParams,
    generation: usize,
    next_id: &mut u64,
) -> Vec<Individual> {
    let space = ev.decoder.space;
    let pairs: Vec<_> = parents.iter().map(|i| (&i.genome, i.eval.as_ref())).collect();
    let mu = parents.len();
    let genomes: Vec<_> = (0..p.lambda)
        .map(|i| {
            let mut rng = child_rng(p.common.seed, generation, i);
            make_child(space, &pairs, &p.common.variation, |r: &mut _| r.gen_range(0..mu), &mut rng)
        })
        .collect();
    let evals = ev.evaluate_batch(&genomes, generation);
    let children: Vec<Individual> = genomes
        .into_iter()
        .zip(evals)
        .map(|(genome, eval)| {
            *next_id += 1;
            Individual { id: *next_id, genome, eval }
        })
        .collect();
    ranked(ev, children).into_iter().take(p.mu).map(|(_, i)| i).collect()
}

pub(crate) fn stats(ev: &Evaluator, pop: &[Individual], generation: usize, best: Rational) -> GenStats {
    let feasible: Vec<&Individual> = pop.iter().filter(|i| i.eval.feasible).collect();
    GenStats {
        generation,
        best_fitness: fmt_rational(&best),
        best_makespan: feasible.iter().map(|i| i.eval.total_makespan).min(),
        feasible: feasible.len(),
        mean_length: pop.iter().map(|i| i.genome.len()).sum::<usize>() as f64 / pop.len().max(1) as f64,
        planner_calls: ev.planner_calls,
        backtracks: ev.backtracks,
    }
}

#[derive(Debug, Clone)]
pub struct EsReport {
    pub best: Individual,
    pub best_fitness: Rational,
    pub parents: Vec<Individual>,
    pub stats: Vec<GenStats>,
}

pub fn run_es(ev: &mut Evaluator, p: &EsParams) -> Result<EsReport, StationError> {
    let genomes = random_population(ev.decoder.space, p.mu, &p.common, 0)?;
    let evals = ev.evaluate_batch(&genomes, 0);
    let mut next_id = 0u64;
    let initial: Vec<Individual> = genomes
        .into_iter()
        .zip(evals)
        .map(|(genome, eval)| {
            next_id += 1;
            Individual { id: next_id, genome, eval }
        })
        .collect();
    let mut parents: Vec<Individual> = ranked(ev, initial).into_iter().map(|(_, i)| i).collect();
    let score = |ev: &Evaluator, i: &Individual| ev.decoder.fitness_single(&i.eval);
    let mut best = parents[0].clone();
    let mut best_fitness = score(ev, &best);
    let mut stats_rows = vec![stats(ev, &parents, 0, best_fitness)];
    for generation in 1..=p.common.generations {
        parents = es_step(ev, &parents, p, generation, &mut next_id);
        let f = score(ev, &parents[0]);
        if (f, parents[0].eval.total_makespan) < (best_fitness, best.eval.total_makespan) {
            best = parents[0].clone();
            best_fitness = f;
        }
        stats_rows.push(stats(ev, &parents, generation, f));
    }
    Ok(EsReport { best, best_fitness, parents, stats: stats_rows })
}

