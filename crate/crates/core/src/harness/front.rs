//! Archive of mutually non-dominating raw (makespan, cost) pairs.

use std::fmt;

use serde::Serialize;

use crate::model::{fmt_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Oracle,
    Run { run: usize, generation: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontPoint {
    pub makespan: u64,
    pub cost: Rational,
    pub source: Provenance,
}

/// `a` is no worse on both coordinates and better on one.
pub fn dominates(a: (u64, Rational), b: (u64, Rational)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParetoFront {
    points: Vec<FrontPoint>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the point unless an existing one is at least as good on both
    /// coordinates; evicts points it dominates. Returns whether it was kept.
    pub fn insert(&mut self, makespan: u64, cost: Rational, source: Provenance) -> bool {
        if self.points.iter().any(|p| p.makespan <= makespan && p.cost <= cost) {
            return false;
        }
        self.points.retain(|p| !(makespan <= p.makespan && cost <= p.cost));
        let at = self.points.partition_point(|p| (p.makespan, p.cost) < (makespan, cost));
        self.points.insert(at, FrontPoint { makespan, cost, source });
        true
    }

    /// Weakly dominated by some point of the front.
    pub fn covers(&self, makespan: u64, cost: Rational) -> bool {
        self.points.iter().any(|p| p.makespan <= makespan && p.cost <= cost)
    }

    pub fn points(&self) -> &[FrontPoint] {
        &self.points
    }

    pub fn pairs(&self) -> Vec<(u64, Rational)> {
        self.points.iter().map(|p| (p.makespan, p.cost)).collect()
    }

    pub fn contains(&self, makespan: u64, cost: Rational) -> bool {
        self.points.iter().any(|p| p.makespan == makespan && p.cost == cost)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// No stored point dominates another.
    pub fn is_consistent(&self) -> bool {
        self.points.iter().all(|a| {
            self.points.iter().all(|b| !dominates((a.makespan, a.cost), (b.makespan, b.cost)))
        })
    }
}

impl fmt::Display for ParetoFront {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> =
            self.points.iter().map(|p| format!("({}, {})", p.makespan, fmt_rational(&p.cost))).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn keeps_only_non_dominated() {
        let mut f = ParetoFront::new();
        assert!(f.insert(9, r(900), Provenance::Oracle));
        assert!(f.insert(8, r(800), Provenance::Oracle));
        assert!(f.insert(16, r(80), Provenance::Oracle));
        assert!(!f.insert(16, r(80), Provenance::Oracle));
        assert!(!f.insert(17, r(100), Provenance::Oracle));
        assert_eq!(f.pairs(), vec![(8, r(800)), (16, r(80))]);
        assert!(f.is_consistent());
        assert_eq!(f.to_string(), "{(8, 800), (16, 80)}");
    }

    #[test]
    fn dominance_definition() {
        assert!(dominates((8, r(800)), (9, r(900))));
        assert!(!dominates((8, r(800)), (16, r(80))));
        assert!(!dominates((16, r(80)), (8, r(800))));
        assert!(!dominates((8, r(800)), (8, r(800))));
    }
}
