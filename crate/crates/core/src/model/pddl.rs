//! Typed PDDL subset: domain and problem models, reader and printer.
//!
//! Accepted: `:requirements`, `:types`, `:constants`, `:predicates`,
//! `:durative-action` with a constant `:duration (= ?duration <number>)`,
//! plain `:action` (unit duration), conjunctive positive conditions and
//! conjunctive add/delete effects. Temporal annotations (`at start`,
//! `at end`, `over all`) are read and dropped: the planner uses the simple
//! model of time where conditions and effects attach to the whole action.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};

use super::sexpr::{read_all, Pos, Sexpr};
use super::{fmt_rational, parse_rational, ModelError, Rational};

pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeRef {
    Named(String),
    Either(Vec<String>),
}

impl TypeRef {
    fn names(&self) -> Vec<&str> {
        match self {
            TypeRef::Named(n) => vec![n.as_str()],
            TypeRef::Either(ns) => ns.iter().map(String::as_str).collect(),
        }
    }
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Named(n) => f.write_str(n),
            TypeRef::Either(ns) => write!(f, "(either {})", ns.join(" ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedName {
    pub name: String,
    pub ty: TypeRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<TypedName>,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Parameter name without the leading `?`.
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Durative,
    /// Classical `:action`, given unit duration.
    Instant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    pub name: String,
    pub kind: OperatorKind,
    pub params: Vec<TypedName>,
    pub duration: Rational,
    pub pre: Vec<AtomTemplate>,
    pub add: Vec<AtomTemplate>,
    pub del: Vec<AtomTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainModel {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDecl>,
    pub operators: Vec<Operator>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemModel {
    pub name: String,
    pub domain_name: String,
    /// Objects, each with a single declared type.
    pub objects: Vec<(String, String)>,
    pub init: Vec<GroundAtom>,
    pub goal: Vec<GroundAtom>,
    /// Raw metric expression, kept only so it can be printed back.
    pub metric: Option<String>,
}

impl DomainModel {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn operator(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|o| o.name == name)
    }

    fn parent_of(&self, ty: &str) -> Option<&str> {
        self.types.iter().find(|t| t.name == ty).map(|t| t.parent.as_str())
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.types.iter().any(|t| t.name == ty)
    }

    /// True if `ty` equals `target` or inherits from it.
    pub fn is_subtype(&self, ty: &str, target: &str) -> bool {
        let mut cur = ty;
        for _ in 0..=self.types.len() + 1 {
            if cur == target {
                return true;
            }
            match self.parent_of(cur) {
                Some(p) => cur = p,
                None => return target == ROOT_TYPE,
            }
        }
        false
    }

    pub fn conforms(&self, ty: &str, target: &TypeRef) -> bool {
        target.names().iter().any(|t| self.is_subtype(ty, t))
    }
}

impl ProblemModel {
    /// Every named object of the problem and the domain constants, with types.
    pub fn all_objects<'a>(&'a self, domain: &'a DomainModel) -> Vec<(&'a str, &'a str)> {
        let mut out: Vec<(&str, &str)> = Vec::new();
        for c in &domain.constants {
            if let TypeRef::Named(t) = &c.ty {
                out.push((c.name.as_str(), t.as_str()));
            }
        }
        for (o, t) in &self.objects {
            if !out.iter().any(|(n, _)| n == o) {
                out.push((o.as_str(), t.as_str()));
            }
        }
        out
    }

    pub fn object_type<'a>(&'a self, domain: &'a DomainModel, name: &str) -> Option<&'a str> {
        self.all_objects(domain).into_iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> ModelError {
    ModelError::Syntax { pos, message: message.into() }
}

fn unsupported(pos: Pos, construct: impl Into<String>) -> ModelError {
    ModelError::UnsupportedFeature { pos, construct: construct.into() }
}

fn expect_atom<'a>(e: &'a Sexpr, what: &str) -> Result<&'a str, ModelError> {
    e.as_atom().ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr], ModelError> {
    e.as_list().ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn read_single(text: &str) -> Result<Sexpr, ModelError> {
    let mut exprs =
        read_all(text).map_err(|e| ModelError::Syntax { pos: e.pos, message: e.message })?;
    match exprs.len() {
        1 => Ok(exprs.remove(0)),
        0 => Err(syntax(Pos { line: 1, col: 1 }, "empty input")),
        _ => Err(syntax(exprs[1].pos(), "trailing input after definition")),
    }
}

/// Splits `(define (<kind> name) sections...)` into name and sections.
fn split_define<'a>(top: &'a Sexpr, kind: &str) -> Result<(&'a str, &'a [Sexpr]), ModelError> {
    let items = expect_list(top, "(define ...)")?;
    if items.first().and_then(Sexpr::as_atom) != Some("define") {
        return Err(syntax(top.pos(), "expected (define ...)"));
    }
    let header = items.get(1).ok_or_else(|| syntax(top.pos(), "missing header"))?;
    let h = expect_list(header, "definition header")?;
    if h.len() != 2 || h[0].as_atom() != Some(kind) {
        return Err(syntax(header.pos(), format!("expected ({kind} <name>)")));
    }
    Ok((expect_atom(&h[1], "name")?, &items[2..]))
}

/// Parses `a b - t c - (either x y) d` style lists. Names without a type are
/// typed `object` when `allow_untyped`, else rejected.
fn parse_typed_list(
    items: &[Sexpr],
    strip_var: bool,
    allow_untyped: bool,
) -> Result<Vec<TypedName>, ModelError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let it = &items[i];
        if it.as_atom() == Some("-") {
            let ty_expr =
                items.get(i + 1).ok_or_else(|| syntax(it.pos(), "missing type after '-'"))?;
            let ty = parse_type_ref(ty_expr)?;
            if pending.is_empty() {
                return Err(syntax(it.pos(), "type annotation without names"));
            }
            for (name, _) in pending.drain(..) {
                out.push(TypedName { name, ty: ty.clone() });
            }
            i += 2;
            continue;
        }
        let name = expect_atom(it, "name")?;
        let name = if strip_var {
            name.strip_prefix('?')
                .ok_or_else(|| syntax(it.pos(), format!("expected variable, got `{name}`")))?
        } else {
            name
        };
        pending.push((name.to_string(), it.pos()));
        i += 1;
    }
    if let Some((_, pos)) = pending.first() {
        if !allow_untyped {
            return Err(unsupported(*pos, "untyped parameters or objects"));
        }
        for (name, _) in pending {
            out.push(TypedName { name, ty: TypeRef::Named(ROOT_TYPE.into()) });
        }
    }
    Ok(out)
}

fn parse_type_ref(e: &Sexpr) -> Result<TypeRef, ModelError> {
    match e {
        Sexpr::Atom(s, _) => Ok(TypeRef::Named(s.clone())),
        Sexpr::List(items, pos) => {
            if items.first().and_then(Sexpr::as_atom) != Some("either") || items.len() < 2 {
                return Err(syntax(*pos, "expected (either <types>)"));
            }
            let names = items[1..]
                .iter()
                .map(|t| expect_atom(t, "type name").map(str::to_string))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(TypeRef::Either(names))
        }
    }
}

fn parse_term(e: &Sexpr) -> Result<Term, ModelError> {
    let s = expect_atom(e, "term")?;
    Ok(match s.strip_prefix('?') {
        Some(v) => Term::Var(v.to_string()),
        None => Term::Const(s.to_string()),
    })
}

fn parse_atom_template(e: &Sexpr) -> Result<AtomTemplate, ModelError> {
    let items = expect_list(e, "atom")?;
    let pred = items.first().ok_or_else(|| syntax(e.pos(), "empty atom"))?;
    let predicate = expect_atom(pred, "predicate name")?.to_string();
    let args = items[1..].iter().map(parse_term).collect::<Result<Vec<_>, _>>()?;
    Ok(AtomTemplate { predicate, args })
}

/// `(at start X)` / `(at end X)` / `(over all X)`: returns the wrapped expression.
fn strip_time_annotation(e: &Sexpr) -> Option<&Sexpr> {
    let items = e.as_list()?;
    if items.len() != 3 || items[2].as_list().is_none() {
        return None;
    }
    match (items[0].as_atom()?, items[1].as_atom()?) {
        ("at", "start") | ("at", "end") | ("over", "all") => Some(&items[2]),
        _ => None,
    }
}

const REJECTED_HEADS: &[(&str, &str)] = &[
    ("when", "conditional effect"),
    ("forall", "universal quantifier"),
    ("exists", "existential quantifier"),
    ("or", "disjunctive condition"),
    ("imply", "implication"),
    ("increase", "numeric effect"),
    ("decrease", "numeric effect"),
    ("assign", "numeric effect"),
    ("scale-up", "numeric effect"),
    ("scale-down", "numeric effect"),
    ("=", "numeric or equality constraint"),
    ("<", "numeric constraint"),
    (">", "numeric constraint"),
    ("<=", "numeric constraint"),
    (">=", "numeric constraint"),
    ("preference", "preference"),
];

fn reject_head(e: &Sexpr) -> Result<(), ModelError> {
    if let Some(h) = e.head() {
        if let Some((_, what)) = REJECTED_HEADS.iter().find(|(k, _)| *k == h) {
            return Err(unsupported(e.pos(), *what));
        }
    }
    Ok(())
}

fn parse_condition(e: &Sexpr, out: &mut Vec<AtomTemplate>) -> Result<(), ModelError> {
    if let Some(inner) = strip_time_annotation(e) {
        return parse_condition(inner, out);
    }
    let items = expect_list(e, "condition")?;
    if items.is_empty() {
        return Ok(());
    }
    reject_head(e)?;
    match e.head() {
        Some("and") => {
            for c in &items[1..] {
                parse_condition(c, out)?;
            }
            Ok(())
        }
        Some("not") => Err(unsupported(e.pos(), "negative precondition")),
        _ => {
            out.push(parse_atom_template(e)?);
            Ok(())
        }
    }
}

fn parse_effect(
    e: &Sexpr,
    add: &mut Vec<AtomTemplate>,
    del: &mut Vec<AtomTemplate>,
) -> Result<(), ModelError> {
    if let Some(inner) = strip_time_annotation(e) {
        return parse_effect(inner, add, del);
    }
    let items = expect_list(e, "effect")?;
    if items.is_empty() {
        return Ok(());
    }
    reject_head(e)?;
    match e.head() {
        Some("and") => {
            for c in &items[1..] {
                parse_effect(c, add, del)?;
            }
            Ok(())
        }
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "(not <atom>) takes one argument"));
            }
            reject_head(&items[1])?;
            del.push(parse_atom_template(&items[1])?);
            Ok(())
        }
        _ => {
            add.push(parse_atom_template(e)?);
            Ok(())
        }
    }
}

fn parse_number(s: &str, pos: Pos) -> Result<Rational, ModelError> {
    parse_rational(s).ok_or_else(|| unsupported(pos, format!("duration expression `{s}`")))
}

fn parse_duration(e: &Sexpr) -> Result<Rational, ModelError> {
    let items = expect_list(e, "duration constraint")?;
    if items.len() != 3 || items[0].as_atom() != Some("=") || items[1].as_atom() != Some("?duration")
    {
        return Err(unsupported(e.pos(), "duration constraint other than (= ?duration <number>)"));
    }
    let value = items[2]
        .as_atom()
        .ok_or_else(|| unsupported(items[2].pos(), "non-constant duration expression"))?;
    let d = parse_number(value, items[2].pos())?;
    if d.is_negative() {
        return Err(syntax(items[2].pos(), "negative duration"));
    }
    Ok(d)
}

fn parse_operator(e: &Sexpr, kind: OperatorKind) -> Result<Operator, ModelError> {
    let items = expect_list(e, "action")?;
    let name = expect_atom(items.get(1).ok_or_else(|| syntax(e.pos(), "missing action name"))?, "action name")?;
    let mut op = Operator {
        name: name.to_string(),
        kind,
        params: Vec::new(),
        duration: match kind {
            OperatorKind::Instant => Rational::from_integer(1),
            OperatorKind::Durative => Rational::zero(),
        },
        pre: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
    };
    let mut has_duration = false;
    let mut i = 2;
    while i < items.len() {
        let key = expect_atom(&items[i], "action keyword")?;
        let val = items.get(i + 1).ok_or_else(|| syntax(items[i].pos(), format!("missing value for {key}")))?;
        match (key, kind) {
            (":parameters", _) => {
                op.params = parse_typed_list(expect_list(val, "parameter list")?, true, false)?
            }
            (":duration", OperatorKind::Durative) => {
                op.duration = parse_duration(val)?;
                has_duration = true;
            }
            (":condition", OperatorKind::Durative) | (":precondition", OperatorKind::Instant) => {
                parse_condition(val, &mut op.pre)?
            }
            (":effect", _) => parse_effect(val, &mut op.add, &mut op.del)?,
            _ => return Err(unsupported(items[i].pos(), format!("action field {key}"))),
        }
        i += 2;
    }
    if kind == OperatorKind::Durative && !has_duration {
        return Err(syntax(e.pos(), format!("durative action `{}` lacks :duration", op.name)));
    }
    Ok(op)
}

/// Reads a domain file of the supported subset.
pub fn parse_domain(text: &str) -> Result<DomainModel, ModelError> {
    let top = read_single(text)?;
    let (name, sections) = split_define(&top, "domain")?;
    let mut dom = DomainModel {
        name: name.to_string(),
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        operators: Vec::new(),
    };
    for sec in sections {
        let items = expect_list(sec, "domain section")?;
        let head = items.first().and_then(Sexpr::as_atom).ok_or_else(|| syntax(sec.pos(), "expected section keyword"))?;
        match head {
            ":requirements" => {
                dom.requirements = items[1..]
                    .iter()
                    .map(|r| expect_atom(r, "requirement").map(str::to_string))
                    .collect::<Result<_, _>>()?
            }
            ":types" => {
                for t in parse_typed_list(&items[1..], false, true)? {
                    let parent = match t.ty {
                        TypeRef::Named(p) => p,
                        TypeRef::Either(_) => {
                            return Err(unsupported(sec.pos(), "either-typed type declaration"))
                        }
                    };
                    dom.types.push(TypeDecl { name: t.name, parent });
                }
            }
            ":constants" => dom.constants = parse_typed_list(&items[1..], false, false)?,
            ":predicates" => {
                for p in &items[1..] {
                    let pl = expect_list(p, "predicate declaration")?;
                    let pname = expect_atom(pl.first().ok_or_else(|| syntax(p.pos(), "empty predicate"))?, "predicate name")?;
                    let params = parse_typed_list(&pl[1..], true, false)?;
                    if dom.predicates.iter().any(|q| q.name == pname) {
                        return Err(ModelError::Duplicate { kind: "predicate", name: pname.to_string() });
                    }
                    dom.predicates.push(PredicateDecl { name: pname.to_string(), params });
                }
            }
            ":durative-action" => dom.operators.push(parse_operator(sec, OperatorKind::Durative)?),
            ":action" => dom.operators.push(parse_operator(sec, OperatorKind::Instant)?),
            ":functions" => return Err(unsupported(sec.pos(), "numeric fluents (:functions)")),
            other => return Err(unsupported(sec.pos(), format!("domain section {other}"))),
        }
    }
    validate_domain(&dom, top.pos())?;
    Ok(dom)
}

fn validate_domain(dom: &DomainModel, pos: Pos) -> Result<(), ModelError> {
    let check_type = |t: &TypeRef| -> Result<(), ModelError> {
        for n in t.names() {
            if !dom.has_type(n) {
                return Err(ModelError::UnknownSymbol { pos, kind: "type", name: n.to_string() });
            }
        }
        Ok(())
    };
    for t in &dom.types {
        check_type(&TypeRef::Named(t.parent.clone()))?;
    }
    for c in &dom.constants {
        check_type(&c.ty)?;
    }
    for p in &dom.predicates {
        for a in &p.params {
            check_type(&a.ty)?;
        }
    }
    let mut op_names = BTreeSet::new();
    for op in &dom.operators {
        if !op_names.insert(op.name.as_str()) {
            return Err(ModelError::Duplicate { kind: "operator", name: op.name.clone() });
        }
        for a in &op.params {
            check_type(&a.ty)?;
        }
        for tpl in op.pre.iter().chain(&op.add).chain(&op.del) {
            let decl = dom.predicate(&tpl.predicate).ok_or_else(|| ModelError::UnknownSymbol {
                pos,
                kind: "predicate",
                name: tpl.predicate.clone(),
            })?;
            if decl.arity() != tpl.args.len() {
                return Err(ModelError::TypeMismatch {
                    pos,
                    message: format!(
                        "{} in operator `{}` has {} arguments, predicate declares {}",
                        tpl,
                        op.name,
                        tpl.args.len(),
                        decl.arity()
                    ),
                });
            }
            for arg in &tpl.args {
                match arg {
                    Term::Var(v) if !op.params.iter().any(|p| &p.name == v) => {
                        return Err(ModelError::UnknownSymbol { pos, kind: "variable", name: format!("?{v}") })
                    }
                    Term::Const(c) if !dom.constants.iter().any(|k| &k.name == c) => {
                        return Err(ModelError::UnknownSymbol { pos, kind: "constant", name: c.clone() })
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}

fn parse_ground_atom(e: &Sexpr) -> Result<GroundAtom, ModelError> {
    reject_head(e)?;
    if e.head() == Some("not") {
        return Err(unsupported(e.pos(), "negative literal"));
    }
    let tpl = parse_atom_template(e)?;
    let args = tpl
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c),
            Term::Var(v) => Err(syntax(e.pos(), format!("variable ?{v} in ground atom"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GroundAtom { predicate: tpl.predicate, args })
}

fn flatten_goal(e: &Sexpr, out: &mut Vec<GroundAtom>) -> Result<(), ModelError> {
    let items = expect_list(e, "goal")?;
    if items.is_empty() {
        return Ok(());
    }
    if e.head() == Some("and") {
        for g in &items[1..] {
            flatten_goal(g, out)?;
        }
        return Ok(());
    }
    out.push(parse_ground_atom(e)?);
    Ok(())
}

/// Reads a problem file and checks every atom against `domain`.
pub fn parse_problem(text: &str, domain: &DomainModel) -> Result<ProblemModel, ModelError> {
    let top = read_single(text)?;
    let (name, sections) = split_define(&top, "problem")?;
    let mut prob = ProblemModel {
        name: name.to_string(),
        domain_name: String::new(),
        objects: Vec::new(),
        init: Vec::new(),
        goal: Vec::new(),
        metric: None,
    };
    let mut atom_pos: BTreeMap<usize, Pos> = BTreeMap::new();
    let mut goal_pos: BTreeMap<usize, Pos> = BTreeMap::new();
    for sec in sections {
        let items = expect_list(sec, "problem section")?;
        let head = items.first().and_then(Sexpr::as_atom).ok_or_else(|| syntax(sec.pos(), "expected section keyword"))?;
        match head {
            ":domain" => {
                prob.domain_name = expect_atom(items.get(1).ok_or_else(|| syntax(sec.pos(), "missing domain name"))?, "domain name")?.to_string()
            }
            ":requirements" => {}
            ":objects" => {
                for t in parse_typed_list(&items[1..], false, false)? {
                    match t.ty {
                        TypeRef::Named(ty) => prob.objects.push((t.name, ty)),
                        TypeRef::Either(_) => return Err(unsupported(sec.pos(), "either-typed object")),
                    }
                }
            }
            ":init" => {
                for a in &items[1..] {
                    atom_pos.insert(prob.init.len(), a.pos());
                    prob.init.push(parse_ground_atom(a)?);
                }
            }
            ":goal" => {
                if items.len() != 2 {
                    return Err(syntax(sec.pos(), "(:goal <condition>) takes one condition"));
                }
                reject_head(&items[1])?;
                let mut g = Vec::new();
                flatten_goal(&items[1], &mut g)?;
                for (i, _) in g.iter().enumerate() {
                    goal_pos.insert(prob.goal.len() + i, items[1].pos());
                }
                prob.goal.extend(g);
            }
            ":metric" => {
                prob.metric = Some(items[1..].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
            }
            other => return Err(unsupported(sec.pos(), format!("problem section {other}"))),
        }
    }
    if !prob.domain_name.is_empty() && prob.domain_name != domain.name {
        return Err(ModelError::UnknownSymbol { pos: top.pos(), kind: "domain", name: prob.domain_name.clone() });
    }
    for (o, t) in &prob.objects {
        if !domain.has_type(t) {
            return Err(ModelError::UnknownSymbol { pos: top.pos(), kind: "type", name: t.clone() });
        }
        if prob.objects.iter().filter(|(p, _)| p == o).count() > 1 {
            return Err(ModelError::Duplicate { kind: "object", name: o.clone() });
        }
    }
    for (i, a) in prob.init.iter().enumerate() {
        check_ground_atom(a, domain, &prob, atom_pos.get(&i).copied().unwrap_or_default())?;
    }
    for (i, a) in prob.goal.iter().enumerate() {
        check_ground_atom(a, domain, &prob, goal_pos.get(&i).copied().unwrap_or_default())?;
    }
    Ok(prob)
}

fn check_ground_atom(
    a: &GroundAtom,
    domain: &DomainModel,
    prob: &ProblemModel,
    pos: Pos,
) -> Result<(), ModelError> {
    let decl = domain.predicate(&a.predicate).ok_or_else(|| ModelError::UnknownSymbol {
        pos,
        kind: "predicate",
        name: a.predicate.clone(),
    })?;
    if decl.arity() != a.args.len() {
        return Err(ModelError::TypeMismatch {
            pos,
            message: format!("{a} has {} arguments, predicate declares {}", a.args.len(), decl.arity()),
        });
    }
    for (arg, param) in a.args.iter().zip(&decl.params) {
        let ty = prob.object_type(domain, arg).ok_or_else(|| ModelError::UnknownSymbol {
            pos,
            kind: "object",
            name: arg.clone(),
        })?;
        if !domain.conforms(ty, &param.ty) {
            return Err(ModelError::TypeMismatch {
                pos,
                message: format!("object `{arg}` of type {ty} does not fit {} in {a}", param.ty),
            });
        }
    }
    Ok(())
}

fn write_typed_list(f: &mut fmt::Formatter<'_>, items: &[TypedName], var: bool) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        if var {
            f.write_str("?")?;
        }
        write!(f, "{} - {}", t.name, t.ty)?;
    }
    Ok(())
}

impl fmt::Display for DomainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (domain {})", self.name)?;
        if !self.requirements.is_empty() {
            writeln!(f, "  (:requirements {})", self.requirements.join(" "))?;
        }
        if !self.types.is_empty() {
            f.write_str("  (:types")?;
            for t in &self.types {
                write!(f, " {} - {}", t.name, t.parent)?;
            }
            f.write_str(")\n")?;
        }
        if !self.constants.is_empty() {
            f.write_str("  (:constants ")?;
            write_typed_list(f, &self.constants, false)?;
            f.write_str(")\n")?;
        }
        f.write_str("  (:predicates")?;
        for p in &self.predicates {
            write!(f, "\n    ({}", p.name)?;
            if !p.params.is_empty() {
                f.write_str(" ")?;
                write_typed_list(f, &p.params, true)?;
            }
            f.write_str(")")?;
        }
        f.write_str(")\n")?;
        for op in &self.operators {
            let (kw, pre_kw) = match op.kind {
                OperatorKind::Durative => (":durative-action", ":condition"),
                OperatorKind::Instant => (":action", ":precondition"),
            };
            writeln!(f, "  ({kw} {}", op.name)?;
            f.write_str("    :parameters (")?;
            write_typed_list(f, &op.params, true)?;
            f.write_str(")\n")?;
            if op.kind == OperatorKind::Durative {
                writeln!(f, "    :duration (= ?duration {})", fmt_rational(&op.duration))?;
            }
            let wrap = |s: String, at: &str| match op.kind {
                OperatorKind::Durative => format!("(at {at} {s})"),
                OperatorKind::Instant => s,
            };
            let pre: Vec<String> = op.pre.iter().map(|a| wrap(a.to_string(), "start")).collect();
            writeln!(f, "    {pre_kw} (and {})", pre.join(" "))?;
            let eff: Vec<String> = op
                .del
                .iter()
                .map(|a| wrap(format!("(not {a})"), "end"))
                .chain(op.add.iter().map(|a| wrap(a.to_string(), "end")))
                .collect();
            writeln!(f, "    :effect (and {}))", eff.join(" "))?;
        }
        f.write_str(")\n")
    }
}

impl fmt::Display for ProblemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "(define (problem {})", self.name)?;
        if !self.domain_name.is_empty() {
            writeln!(f, "  (:domain {})", self.domain_name)?;
        }
        f.write_str("  (:objects")?;
        for (o, t) in &self.objects {
            write!(f, " {o} - {t}")?;
        }
        f.write_str(")\n  (:init")?;
        for a in &self.init {
            write!(f, "\n    {a}")?;
        }
        f.write_str(")\n  (:goal (and")?;
        for a in &self.goal {
            write!(f, "\n    {a}")?;
        }
        f.write_str("))")?;
        if let Some(m) = &self.metric {
            write!(f, "\n  (:metric {m})")?;
        }
        f.write_str(")\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "(define (domain tiny)
      (:requirements :typing :durative-actions)
      (:types plane city - object)
      (:predicates (at ?x - plane ?c - city))
      (:durative-action fly
        :parameters (?p - plane ?from ?to - city)
        :duration (= ?duration 4)
        :condition (at start (at ?p ?from))
        :effect (and (at start (not (at ?p ?from))) (at end (at ?p ?to)))))";

    #[test]
    fn minimal_domain() {
        let d = parse_domain(MINIMAL).unwrap();
        assert_eq!(d.predicates.len(), 1);
        assert_eq!(d.operators.len(), 1);
        let fly = &d.operators[0];
        assert_eq!(fly.duration, Rational::from_integer(4));
        assert_eq!(fly.pre.len(), 1);
        assert_eq!(fly.del.len(), 1);
        assert_eq!(fly.add[0].to_string(), "(at ?p ?to)");
    }

    #[test]
    fn conditional_effect_is_rejected() {
        let text = MINIMAL.replace(
            "(at end (at ?p ?to))",
            "(when (at ?p ?from) (at ?p ?to))",
        );
        match parse_domain(&text) {
            Err(ModelError::UnsupportedFeature { construct, .. }) => {
                assert_eq!(construct, "conditional effect")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_precondition_and_functions_are_rejected() {
        let neg = MINIMAL.replace(":condition (at start (at ?p ?from))", ":condition (not (at ?p ?from))");
        assert!(matches!(parse_domain(&neg), Err(ModelError::UnsupportedFeature { .. })));
        let fun = MINIMAL.replace("(:predicates", "(:functions (speed ?p - plane)) (:predicates");
        assert!(matches!(parse_domain(&fun), Err(ModelError::UnsupportedFeature { .. })));
    }

    #[test]
    fn untyped_parameters_are_rejected() {
        let text = MINIMAL.replace("(?p - plane ?from ?to - city)", "(?p ?from ?to)");
        assert!(matches!(parse_domain(&text), Err(ModelError::UnsupportedFeature { .. })));
    }

    #[test]
    fn rational_durations() {
        let text = MINIMAL.replace("(= ?duration 4)", "(= ?duration 2.5)");
        assert_eq!(parse_domain(&text).unwrap().operators[0].duration, Rational::new(5, 2));
        let bad = MINIMAL.replace("(= ?duration 4)", "(= ?duration (speed ?p))");
        assert!(matches!(parse_domain(&bad), Err(ModelError::UnsupportedFeature { .. })));
    }

    #[test]
    fn arity_mismatch_in_operator() {
        let text = MINIMAL.replace("(at end (at ?p ?to))", "(at end (at ?p))");
        assert!(matches!(parse_domain(&text), Err(ModelError::TypeMismatch { .. })));
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_domain("(define (domain x)\n  (:predicates (at ?x - y)") {
            Err(ModelError::Syntax { pos, .. }) => assert_eq!((pos.line, pos.col), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn tiny_problem(goal: &str) -> String {
        format!(
            "(define (problem p) (:domain tiny)
               (:objects p1 - plane c0 c1 - city)
               (:init (at p1 c0))
               (:goal {goal}))"
        )
    }

    #[test]
    fn problem_with_empty_goal() {
        let d = parse_domain(MINIMAL).unwrap();
        let p = parse_problem(&tiny_problem("(and)"), &d).unwrap();
        assert!(p.goal.is_empty());
        assert_eq!(p.init, vec![GroundAtom::new("at", &["p1", "c0"])]);
    }

    #[test]
    fn goal_with_undeclared_object() {
        let d = parse_domain(MINIMAL).unwrap();
        match parse_problem(&tiny_problem("(and (at p1 c9))"), &d) {
            Err(ModelError::UnknownSymbol { kind, name, .. }) => {
                assert_eq!((kind, name.as_str()), ("object", "c9"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn goal_with_ill_typed_object() {
        let d = parse_domain(MINIMAL).unwrap();
        assert!(matches!(
            parse_problem(&tiny_problem("(at c0 c1)"), &d),
            Err(ModelError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn print_then_parse_is_stable() {
        let d = parse_domain(MINIMAL).unwrap();
        let d2 = parse_domain(&d.to_string()).unwrap();
        assert_eq!(d, d2);
        let p = parse_problem(&tiny_problem("(and (at p1 c1))"), &d).unwrap();
        assert_eq!(parse_problem(&p.to_string(), &d).unwrap(), p);
    }

    #[test]
    fn subtype_chain() {
        let d = parse_domain(
            "(define (domain t) (:types aircraft person - locatable locatable city - object)
               (:predicates (at ?x - locatable ?c - city)))",
        )
        .unwrap();
        assert!(d.is_subtype("aircraft", "locatable"));
        assert!(d.is_subtype("aircraft", "object"));
        assert!(!d.is_subtype("city", "locatable"));
    }
}
