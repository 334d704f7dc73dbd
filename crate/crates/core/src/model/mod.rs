//! Planning model: PDDL subset reader, grounding, and the sidecar
//! invariants and cost files.

mod cost;
mod ground;
mod invariants;
mod pddl;
pub mod sexpr;

pub use cost::{parse_cost_model, Accrual, CostMode, CostModel, MoveRule};
pub use ground::{
    ground, ground_with_cap, ActionId, AtomId, GroundAction, GroundTask, ObjId, WorldState,
    DEFAULT_GROUNDING_CAP,
};
pub use invariants::{parse_invariants, InvariantSpec};
pub use pddl::{
    parse_domain, parse_problem, AtomTemplate, DomainModel, GroundAtom, Operator, OperatorKind,
    PredicateDecl, ProblemModel, Term, TypeDecl, TypeRef, TypedName,
};
pub use sexpr::Pos;

use thiserror::Error;

/// Exact rational used for durations and costs.
pub type Rational = num_rational::Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unsupported feature at {pos}: {construct}")]
    UnsupportedFeature { pos: Pos, construct: String },
    #[error("unknown {kind} `{name}` at {pos}")]
    UnknownSymbol { pos: Pos, kind: &'static str, name: String },
    #[error("type mismatch at {pos}: {message}")]
    TypeMismatch { pos: Pos, message: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("grounding produced more than {cap} actions")]
    GroundingExplosion { cap: usize },
    #[error("invariants file declares no station predicate")]
    MissingStationPredicates,
}

/// Formats a rational as `n` or `n/d`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `n`, `n/d` or a decimal literal.
pub fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        return (d != 0).then(|| Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let whole: i64 = match int {
            "" | "-" => 0,
            _ => int.parse().ok()?,
        };
        let den = 10i64.pow(frac.len() as u32);
        let mag = whole.abs() * den + frac.parse::<i64>().ok()?;
        return Some(Rational::new(if neg { -mag } else { mag }, den));
    }
    s.parse::<i64>().ok().map(Rational::from_integer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("4/5"), Some(Rational::new(4, 5)));
        assert_eq!(parse_rational("0.8"), Some(Rational::new(4, 5)));
        assert_eq!(parse_rational("-1.25"), Some(Rational::new(-5, 4)));
        assert_eq!(parse_rational("12"), Some(Rational::from_integer(12)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(fmt_rational(&Rational::new(10, 4)), "5/2");
    }
}
