//! The bundled five-city benchmark: two planes and three persons start in
//! City0 and must all reach City4 through one of three two-leg routes
//! (via City1: 4+4, via City2: 8+8, via City3: 12+12).

use crate::model::{
    ground, parse_cost_model, parse_domain, parse_invariants, parse_problem, CostModel, DomainModel,
    GroundTask, InvariantSpec, ModelError, ProblemModel,
};

pub const DOMAIN: &str = include_str!("../../data/mini-zeno/domain.pddl");
pub const PROBLEM: &str = include_str!("../../data/mini-zeno/problem.pddl");
pub const INVARIANTS: &str = include_str!("../../data/mini-zeno/invariants.txt");
pub const COST_ADDITIVE: &str = include_str!("../../data/mini-zeno/cost-additive.txt");
pub const COST_MAX: &str = include_str!("../../data/mini-zeno/cost-max.txt");

#[derive(Debug, Clone)]
pub struct MiniZeno {
    pub domain: DomainModel,
    pub problem: ProblemModel,
    pub invariants: InvariantSpec,
    pub cost_additive: CostModel,
    pub cost_max: CostModel,
}

impl MiniZeno {
    pub fn task(&self) -> Result<GroundTask, ModelError> {
        ground(&self.domain, &self.problem)
    }
}

fn parse_all() -> Result<MiniZeno, ModelError> {
    let domain = parse_domain(DOMAIN)?;
    let problem = parse_problem(PROBLEM, &domain)?;
    let invariants = parse_invariants(INVARIANTS, &domain)?;
    Ok(MiniZeno {
        cost_additive: parse_cost_model(COST_ADDITIVE)?,
        cost_max: parse_cost_model(COST_MAX)?,
        domain,
        problem,
        invariants,
    })
}

/// Parses the embedded instance files.
pub fn build() -> MiniZeno {
    parse_all().expect("bundled instance is well-formed")
}
