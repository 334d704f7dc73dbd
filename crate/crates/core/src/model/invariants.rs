//! Sidecar invariants file: which predicates may appear in stations and
//! which argument of each is exclusive.
//!
//! ```text
//! # comment
//! station-predicate at
//! exclusive at 1
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::pddl::DomainModel;
use super::{ModelError, Pos};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvariantSpec {
    pub station_predicates: BTreeSet<String>,
    /// predicate -> 1-based index of the exclusive argument.
    pub exclusivity: BTreeMap<String, usize>,
}

impl InvariantSpec {
    /// 0-based position of the exclusive argument of `predicate`.
    pub fn exclusive_arg(&self, predicate: &str) -> Option<usize> {
        self.exclusivity.get(predicate).map(|i| i - 1)
    }

    pub fn is_station_predicate(&self, predicate: &str) -> bool {
        self.station_predicates.contains(predicate)
    }
}

impl std::fmt::Display for InvariantSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.station_predicates {
            writeln!(f, "station-predicate {p}")?;
        }
        for (p, i) in &self.exclusivity {
            writeln!(f, "exclusive {p} {i}")?;
        }
        Ok(())
    }
}

pub fn parse_invariants(text: &str, domain: &DomainModel) -> Result<InvariantSpec, ModelError> {
    let mut spec = InvariantSpec::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let pos = Pos { line: n + 1, col: raw.len() - raw.trim_start().len() + 1 };
        let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
        let syntax = |message: String| ModelError::Syntax { pos, message };
        let lookup = |name: &str| {
            domain.predicate(name).ok_or_else(|| ModelError::UnknownSymbol {
                pos,
                kind: "predicate",
                name: name.to_string(),
            })
        };
        match words.as_slice() {
            [d, name] if d == "station-predicate" => {
                lookup(name)?;
                spec.station_predicates.insert(name.clone());
            }
            [d, name, idx] if d == "exclusive" => {
                let decl = lookup(name)?;
                let i: usize = idx
                    .parse()
                    .map_err(|_| syntax(format!("argument index `{idx}` is not a positive integer")))?;
                if i == 0 || i > decl.arity() {
                    return Err(syntax(format!(
                        "argument index {i} outside arity {} of `{name}`",
                        decl.arity()
                    )));
                }
                spec.exclusivity.insert(name.clone(), i);
            }
            _ => return Err(syntax(format!("unrecognised directive `{line}`"))),
        }
    }
    if spec.station_predicates.is_empty() {
        return Err(ModelError::MissingStationPredicates);
    }
    Ok(spec)
}
