//! Sidecar cost file: values attached to locations, and the rule that turns
//! movements into cost events.
//!
//! ```text
//! mode additive
//! value City1 80
//! value City3 4/5
//! accrual occupancy          # optional, default
//! move fly-* 1 2 3           # optional: operator, vehicle/origin/destination args
//! aboard in 2                # optional: predicate and its vehicle argument
//! ```

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;

use super::{fmt_rational, parse_rational, ModelError, Pos, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    Additive,
    Max,
}

/// How a movement event is priced in additive mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accrual {
    /// (v(origin) + v(destination)) * (1 + passengers aboard)
    Occupancy,
    /// v(origin) + v(destination)
    Flight,
}

/// Which ground actions are movements, and where to find their arguments
/// (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveRule {
    /// Operator name; a trailing `*` matches any suffix.
    pub operator: String,
    pub vehicle: usize,
    pub origin: usize,
    pub dest: usize,
}

impl MoveRule {
    pub fn matches(&self, operator: &str) -> bool {
        match self.operator.strip_suffix('*') {
            Some(prefix) => operator.starts_with(prefix),
            None => operator == self.operator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    pub mode: CostMode,
    pub accrual: Accrual,
    /// Objects absent from the map are worth 0.
    pub values: BTreeMap<String, Rational>,
    pub moves: Vec<MoveRule>,
    /// Predicate whose presence means "passenger aboard vehicle", and the
    /// 0-based position of the vehicle argument.
    pub aboard: (String, usize),
}

impl CostModel {
    pub fn new(mode: CostMode) -> Self {
        CostModel {
            mode,
            accrual: Accrual::Occupancy,
            values: BTreeMap::new(),
            moves: default_moves(),
            aboard: ("in".to_string(), 1),
        }
    }

    pub fn with_value(mut self, object: &str, value: Rational) -> Self {
        self.values.insert(object.to_ascii_lowercase(), value);
        self
    }

    pub fn value(&self, object: &str) -> Rational {
        self.values.get(object).copied().unwrap_or_default()
    }

    pub fn move_rule(&self, operator: &str) -> Option<&MoveRule> {
        self.moves.iter().find(|m| m.matches(operator))
    }
}

fn default_moves() -> Vec<MoveRule> {
    ["fly", "fly-*"]
        .iter()
        .map(|op| MoveRule { operator: op.to_string(), vehicle: 0, origin: 1, dest: 2 })
        .collect()
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            CostMode::Additive => "additive",
            CostMode::Max => "max",
        };
        writeln!(f, "mode {mode}")?;
        let accrual = match self.accrual {
            Accrual::Occupancy => "occupancy",
            Accrual::Flight => "flight",
        };
        writeln!(f, "accrual {accrual}")?;
        for (o, v) in &self.values {
            writeln!(f, "value {o} {}", fmt_rational(v))?;
        }
        for m in &self.moves {
            writeln!(f, "move {} {} {} {}", m.operator, m.vehicle + 1, m.origin + 1, m.dest + 1)?;
        }
        writeln!(f, "aboard {} {}", self.aboard.0, self.aboard.1 + 1)
    }
}

pub fn parse_cost_model(text: &str) -> Result<CostModel, ModelError> {
    let mut mode = None;
    let mut accrual = Accrual::Occupancy;
    let mut values = BTreeMap::new();
    let mut moves = Vec::new();
    let mut aboard = ("in".to_string(), 1);
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let pos = Pos { line: n + 1, col: 1 };
        let syntax = |message: String| ModelError::Syntax { pos, message };
        let index = |s: &str| -> Result<usize, ModelError> {
            match s.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(syntax(format!("`{s}` is not a 1-based argument index"))),
            }
        };
        let words: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
        match words.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["mode", "additive"] => mode = Some(CostMode::Additive),
            ["mode", "max"] => mode = Some(CostMode::Max),
            ["accrual", "occupancy"] => accrual = Accrual::Occupancy,
            ["accrual", "flight"] => accrual = Accrual::Flight,
            ["value", obj, v] => {
                let v = parse_rational(v).ok_or_else(|| syntax(format!("bad value `{v}`")))?;
                if v.is_negative() {
                    return Err(syntax(format!("negative value for `{obj}`")));
                }
                if values.insert(obj.to_string(), v).is_some() {
                    return Err(ModelError::Duplicate { kind: "cost value", name: obj.to_string() });
                }
            }
            ["move", op, v, o, d] => moves.push(MoveRule {
                operator: op.to_string(),
                vehicle: index(v)?,
                origin: index(o)?,
                dest: index(d)?,
            }),
            ["aboard", pred, v] => aboard = (pred.to_string(), index(v)?),
            _ => return Err(syntax(format!("unrecognised directive `{line}`"))),
        }
    }
    let mode = mode.ok_or(ModelError::Syntax {
        pos: Pos { line: 1, col: 1 },
        message: "missing `mode additive|max` directive".into(),
    })?;
    if moves.is_empty() {
        moves = default_moves();
    }
    Ok(CostModel { mode, accrual, values, moves, aboard })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_and_defaults() {
        let cm = parse_cost_model("mode additive\nvalue City1 100\nvalue City3 0.8\n").unwrap();
        assert_eq!(cm.mode, CostMode::Additive);
        assert_eq!(cm.accrual, Accrual::Occupancy);
        assert_eq!(cm.value("city1"), Rational::from_integer(100));
        assert_eq!(cm.value("city3"), Rational::new(4, 5));
        assert_eq!(cm.value("city0"), Rational::from_integer(0));
        assert!(cm.move_rule("fly").is_some());
        assert!(cm.move_rule("fly-long").is_some());
        assert!(cm.move_rule("board").is_none());
    }

    #[test]
    fn rejects_negative_and_missing_mode() {
        assert!(parse_cost_model("mode max\nvalue a -1").is_err());
        assert!(parse_cost_model("value a 1").is_err());
        assert!(parse_cost_model("mode sum").is_err());
    }

    #[test]
    fn custom_move_rule() {
        let cm = parse_cost_model("mode max\nmove drive 2 3 4\naboard carried 2").unwrap();
        assert_eq!(cm.moves, vec![MoveRule { operator: "drive".into(), vehicle: 1, origin: 2, dest: 3 }]);
        assert_eq!(cm.aboard, ("carried".to_string(), 1));
        assert!(cm.move_rule("fly").is_none());
    }

    #[test]
    fn round_trip() {
        let cm = parse_cost_model("mode additive\naccrual flight\nvalue c 4/5").unwrap();
        assert_eq!(parse_cost_model(&cm.to_string()).unwrap(), cm);
    }
}
