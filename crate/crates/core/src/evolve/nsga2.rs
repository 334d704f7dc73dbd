//! NSGA-II: fast non-dominated sorting, crowding distance, binary
//! tournaments and elitist (mu + lambda) replacement.

use std::cmp::Ordering;

use num_traits::ToPrimitive;
use rand::Rng;

use crate::harness::{ParetoFront, Provenance};
use crate::model::Rational;
use crate::stations::StationError;

use super::es::stats;
use super::{child_rng, make_child, random_population, EngineCommon, Evaluator, GenStats, Individual};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nsga2Params {
    pub pop: usize,
    pub common: EngineCommon,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Nsga2Params { pop: 100, common: EngineCommon::default() }
    }
}

fn dominates<T: PartialOrd>(a: &[T; 2], b: &[T; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Fronts of indices, best first (Deb's fast non-dominated sort).
pub fn non_dominated_sort<T: PartialOrd>(points: &[[T; 2]]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..n {
        for j in 0..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
            } else if dominates(&points[j], &points[i]) {
                count[i] += 1;
            }
        }
        if count[i] == 0 {
            fronts[0].push(i);
        }
    }
    let mut k = 0;
    while !fronts[k].is_empty() {
        let mut next = Vec::new();
        for &i in &fronts[k] {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(next);
        k += 1;
    }
    fronts.pop();
    fronts
}

/// Crowding distance of each member of `front` (same order); boundary
/// points get infinity.
pub fn crowding_distance(points: &[[f64; 2]], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for obj in 0..2 {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            points[front[a]][obj].partial_cmp(&points[front[b]][obj]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        let lo = points[front[order[0]]][obj];
        let hi = points[front[order[m - 1]]][obj];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let gap = points[front[order[w + 1]]][obj] - points[front[order[w - 1]]][obj];
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

/// Population member with its selection attributes.
#[derive(Debug, Clone)]
pub struct Ranked {
    pub ind: Individual,
    pub objectives: [Rational; 2],
    pub rank: usize,
    pub crowding: f64,
}

fn to_f64(p: &[Rational; 2]) -> [f64; 2] {
    [p[0].to_f64().unwrap_or(f64::MAX), p[1].to_f64().unwrap_or(f64::MAX)]
}

/// Keeps `size` members of `pool`. Members repeating an objective vector
/// seen earlier in the pool are only considered once all distinct vectors are
/// placed; otherwise clones of one point flood the first front.
fn environmental_selection(pool: Vec<(Individual, [Rational; 2])>, size: usize) -> Vec<Ranked> {
    let mut seen = std::collections::HashSet::new();
    let (distinct, clones): (Vec<_>, Vec<_>) = pool.into_iter().partition(|(_, o)| seen.insert(*o));
    let mut out = select_by_rank(distinct, size);
    if out.len() < size && !clones.is_empty() {
        let offset = out.iter().map(|r| r.rank + 1).max().unwrap_or(0);
        for mut r in environmental_selection(clones, size - out.len()) {
            r.rank += offset;
            out.push(r);
        }
    }
    out
}

/// Sorts `pool` into fronts and keeps `size` members by rank, then
/// descending crowding, then creation order.
fn select_by_rank(pool: Vec<(Individual, [Rational; 2])>, size: usize) -> Vec<Ranked> {
    let objs: Vec<[Rational; 2]> = pool.iter().map(|(_, o)| *o).collect();
    let floats: Vec<[f64; 2]> = objs.iter().map(to_f64).collect();
    let fronts = non_dominated_sort(&objs);
    let mut slots: Vec<Option<(Individual, [Rational; 2])>> = pool.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(size);
    for (rank, front) in fronts.iter().enumerate() {
        if out.len() >= size {
            break;
        }
        let crowd = crowding_distance(&floats, front);
        let mut members: Vec<(usize, f64)> = front.iter().copied().zip(crowd).collect();
        members.sort_by(|a, b| {
            let ida = slots[a.0].as_ref().map(|s| s.0.id);
            let idb = slots[b.0].as_ref().map(|s| s.0.id);
            b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(ida.cmp(&idb))
        });
        for (i, crowding) in members.into_iter().take(size - out.len()) {
            let (ind, objectives) = slots[i].take().expect("each index used once");
            out.push(Ranked { ind, objectives, rank, crowding });
        }
    }
    out
}

fn tournament<R: Rng + ?Sized>(pop: &[Ranked], rng: &mut R) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    let better = |x: &Ranked, y: &Ranked| {
        x.rank < y.rank || (x.rank == y.rank && x.crowding > y.crowding)
    };
    if better(&pop[b], &pop[a]) {
        b
    } else {
        a
    }
}

fn objectives(ev: &Evaluator, ind: &Individual) -> [Rational; 2] {
    let (f1, f2) = ev.decoder.objectives_multi(&ind.eval);
    [f1, f2]
}

pub fn nsga2_step(
    ev: &mut Evaluator,
    pop: &[Ranked],
    p: &Nsga2Params,
    generation: usize,
    next_id: &mut u64,
) -> Vec<Ranked> {
    let space = ev.decoder.space;
    let pairs: Vec<_> = pop.iter().map(|r| (&r.ind.genome, r.ind.eval.as_ref())).collect();
    let genomes: Vec<_> = (0..p.pop)
        .map(|i| {
            let mut rng = child_rng(p.common.seed, generation, i);
            make_child(space, &pairs, &p.common.variation, |r: &mut _| tournament(pop, r), &mut rng)
        })
        .collect();
    let evals = ev.evaluate_batch(&genomes, generation);
    let mut pool: Vec<(Individual, [Rational; 2])> =
        pop.iter().map(|r| (r.ind.clone(), r.objectives)).collect();
    for (genome, eval) in genomes.into_iter().zip(evals) {
        *next_id += 1;
        let ind = Individual { id: *next_id, genome, eval };
        let o = objectives(ev, &ind);
        pool.push((ind, o));
    }
    environmental_selection(pool, p.pop)
}

#[derive(Debug, Clone)]
pub struct Nsga2Report {
    pub population: Vec<Ranked>,
    /// Non-dominated raw pairs over every feasible evaluation of the run.
    pub archive: ParetoFront,
    /// Non-dominated raw pairs of the final population.
    pub final_front: ParetoFront,
    /// Archive snapshot after each generation.
    pub archive_history: Vec<ParetoFront>,
    pub stats: Vec<GenStats>,
}

pub fn run_nsga2(ev: &mut Evaluator, p: &Nsga2Params) -> Result<Nsga2Report, StationError> {
    let genomes = random_population(ev.decoder.space, p.pop, &p.common, 0)?;
    let evals = ev.evaluate_batch(&genomes, 0);
    let mut next_id = 0u64;
    let mut pool = Vec::with_capacity(p.pop);
    for (genome, eval) in genomes.into_iter().zip(evals) {
        next_id += 1;
        let ind = Individual { id: next_id, genome, eval };
        let o = objectives(ev, &ind);
        pool.push((ind, o));
    }
    let mut pop = environmental_selection(pool, p.pop);
    let best_f1 = |pop: &[Ranked]| pop.iter().map(|r| r.objectives[0]).min().unwrap_or_default();
    let inds = |pop: &[Ranked]| pop.iter().map(|r| r.ind.clone()).collect::<Vec<_>>();
    let mut stats_rows = vec![stats(ev, &inds(&pop), 0, best_f1(&pop))];
    let mut history = vec![ev.archive.clone()];
    for generation in 1..=p.common.generations {
        pop = nsga2_step(ev, &pop, p, generation, &mut next_id);
        stats_rows.push(stats(ev, &inds(&pop), generation, best_f1(&pop)));
        history.push(ev.archive.clone());
    }
    let mut final_front = ParetoFront::new();
    for r in &pop {
        if let Some((m, c)) = r.ind.eval.raw() {
            final_front.insert(m, c, Provenance::Run { run: ev.run, generation: p.common.generations });
        }
    }
    Ok(Nsga2Report { population: pop, archive: ev.archive.clone(), final_front, archive_history: history, stats: stats_rows })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::evolve::EvalResult;
    use crate::stations::Genome;

    #[test]
    fn sort_simple_fronts() {
        let pts = [[8, 800], [16, 80], [9, 900], [24, 8], [30, 900]];
        assert_eq!(non_dominated_sort(&pts), vec![vec![0, 1, 3], vec![2], vec![4]]);
    }

    #[test]
    fn identical_points_share_rank_one() {
        let pts = [[1, 1]; 4];
        assert_eq!(non_dominated_sort(&pts), vec![vec![0, 1, 2, 3]]);
        let f = [[1.0, 1.0]; 4];
        let d = crowding_distance(&f, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() && d[3].is_infinite() || d.iter().filter(|x| x.is_infinite()).count() == 2);
    }

    #[test]
    fn crowding_interior_point() {
        let f = [[0.0, 4.0], [1.0, 2.0], [4.0, 0.0]];
        let d = crowding_distance(&f, &[0, 1, 2]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clones_rank_behind_distinct_points() {
        let eval = Arc::new(EvalResult {
            feasible: true,
            fail_index: None,
            remaining_after_failure: 0,
            sub_plans: vec![],
            sub_makespans: vec![],
            sub_costs: vec![],
            global_schedule: None,
            total_makespan: 0,
            total_cost: Rational::from_integer(0),
            sequence: vec![],
        });
        let r = Rational::from_integer;
        let objs = [[r(1), r(1)], [r(1), r(1)], [r(1), r(1)], [r(5), r(5)], [r(6), r(6)]];
        let pool = objs
            .iter()
            .enumerate()
            .map(|(i, o)| (Individual { id: i as u64, genome: Genome::default(), eval: eval.clone() }, *o))
            .collect();
        let kept = environmental_selection(pool, 4);
        let ids: Vec<u64> = kept.iter().map(|k| k.ind.id).collect();
        assert_eq!(ids, vec![0, 3, 4, 1]);
        assert_eq!(kept.iter().map(|k| k.rank).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }
}
