//! Source-level program and network types.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::function::{FunctionRegistry, EPS_EQ};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }

    /// Ground atom over constant arguments.
    pub fn ground(pred: impl Into<String>, args: &[&str]) -> Self {
        Atom { pred: pred.into(), args: args.iter().map(|a| Term::Const(a.to_string())).collect() }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

/// Atom rendered as `pred(a,b)` with raw constant names (no quoting).
impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(t.name())?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnnExpr {
    Const(f64),
    Var(String),
    Apply(String, Vec<AnnExpr>),
}

impl AnnExpr {
    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            AnnExpr::Const(_) => {}
            AnnExpr::Var(v) => out.push(v),
            AnnExpr::Apply(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v
    }

    fn constants(&self, out: &mut Vec<f64>) {
        match self {
            AnnExpr::Const(c) => out.push(*c),
            AnnExpr::Var(_) => {}
            AnnExpr::Apply(_, args) => args.iter().for_each(|a| a.constants(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BodyAnn {
    /// Propagating literal: the atom's value flows into the head expression.
    Var(String),
    /// Condition literal: the rule fires only when the atom reaches the constant.
    Const(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyLit {
    pub atom: Atom,
    pub ann: BodyAnn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub head: Atom,
    pub ann: AnnExpr,
    pub body: Vec<BodyLit>,
}

impl Rule {
    pub fn fact(head: Atom, value: f64) -> Self {
        Rule { head, ann: AnnExpr::Const(value), body: Vec::new() }
    }

    pub fn propagating(&self) -> impl Iterator<Item = (&Atom, &str)> {
        self.body.iter().filter_map(|l| match &l.ann {
            BodyAnn::Var(v) => Some((&l.atom, v.as_str())),
            BodyAnn::Const(_) => None,
        })
    }

    pub fn conditions(&self) -> impl Iterator<Item = (&Atom, f64)> {
        self.body.iter().filter_map(|l| match l.ann {
            BodyAnn::Const(c) => Some((&l.atom, c)),
            BodyAnn::Var(_) => None,
        })
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter().map(|l| &l.atom))
    }

    pub fn is_ground(&self) -> bool {
        self.atoms().all(Atom::is_ground)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Avg,
    Max,
}

/// `head(V) : agg{ M | edge(U,V):c, body(U):M } [if sum >= tau]`, expanded per
/// vertex over its in-neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTemplate {
    pub head: Atom,
    pub agg: Aggregate,
    pub var: String,
    pub edge: Atom,
    pub edge_ann: f64,
    pub body: Atom,
    pub gate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcRule {
    pub decisions: Vec<Atom>,
    pub utilities: Vec<Atom>,
}

impl VcRule {
    pub fn arity(&self) -> usize {
        self.decisions.len()
    }

    pub fn decision_preds(&self) -> Vec<&str> {
        self.decisions.iter().map(|a| a.pred.as_str()).collect()
    }

    pub fn utility_preds(&self) -> Vec<&str> {
        self.utilities.iter().map(|a| a.pred.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredTag {
    Plain,
    Utility,
    Decision,
    ChoiceIndicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredInfo {
    pub arity: usize,
    pub tag: PredTag,
}

/// Prefix of engine-generated choice-indicator predicates.
pub const CHOICE_PREFIX: &str = "c_";

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub functions: FunctionRegistry,
    pub rules: Vec<Rule>,
    pub templates: Vec<NeighborTemplate>,
    pub vc: VcRule,
}

impl Program {
    pub fn new(functions: FunctionRegistry, rules: Vec<Rule>, templates: Vec<NeighborTemplate>, vc: VcRule) -> Result<Self> {
        let p = Program { functions, rules, templates, vc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.vc.arity();
        if m < 2 || self.vc.utilities.len() != m {
            return Err(Error::Invalid("vertex choice rule needs m >= 2 decision/utility pairs".into()));
        }
        let mut seen = HashSet::new();
        let mut var = None;
        for a in self.vc.decisions.iter().chain(&self.vc.utilities) {
            match a.args.as_slice() {
                [Term::Var(v)] => {
                    if var.get_or_insert(v.clone()) != v {
                        return Err(Error::Invalid("vertex choice atoms must share one variable".into()));
                    }
                }
                _ => return Err(Error::Invalid(format!("vertex choice atom {a} must be p(X)"))),
            }
            if !seen.insert(a.pred.as_str()) {
                return Err(Error::Invalid(format!("predicate {} repeated in the vertex choice rule", a.pred)));
            }
        }
        let reserved: HashSet<String> = self.vc.decisions.iter().map(|a| format!("{CHOICE_PREFIX}{}", a.pred)).collect();

        let mut arity: HashMap<String, usize> = HashMap::new();
        let mut check_atom = |a: &Atom| -> Result<()> {
            if a.args.is_empty() || a.args.len() > 2 {
                return Err(Error::Invalid(format!("atom {a} must have 1 or 2 arguments")));
            }
            if reserved.contains(&a.pred) {
                return Err(Error::Invalid(format!("predicate {} is reserved for choice indicators", a.pred)));
            }
            match arity.insert(a.pred.clone(), a.args.len()) {
                Some(k) if k != a.args.len() => Err(Error::Invalid(format!("predicate {} used with arities {k} and {}", a.pred, a.args.len()))),
                _ => Ok(()),
            }
        };
        for a in self.vc.decisions.iter().chain(&self.vc.utilities) {
            check_atom(a)?;
        }
        for r in &self.rules {
            for a in r.atoms() {
                check_atom(a)?;
            }
        }
        for t in &self.templates {
            for a in [&t.head, &t.edge, &t.body] {
                check_atom(a)?;
            }
        }
        for r in &self.rules {
            self.check_rule(r)?;
        }
        for t in &self.templates {
            check_template(t)?;
        }
        Ok(())
    }

    fn check_rule(&self, r: &Rule) -> Result<()> {
        let mut consts = Vec::new();
        r.ann.constants(&mut consts);
        consts.extend(r.conditions().map(|(_, c)| c));
        if let Some(c) = consts.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Invalid(format!("annotation constant {c} outside [0,1] in rule for {}", r.head)));
        }
        let mut body_vars = HashSet::new();
        for (_, v) in r.propagating() {
            if !body_vars.insert(v) {
                return Err(Error::Invalid(format!("annotation variable {v} repeated in the body of a rule for {}", r.head)));
            }
        }
        for v in r.ann.vars() {
            if !body_vars.contains(v) {
                return Err(Error::Invalid(format!("annotation variable {v} in the head of a rule for {} is unbound", r.head)));
            }
        }
        self.check_expr(&r.ann)
    }

    fn check_expr(&self, e: &AnnExpr) -> Result<()> {
        if let AnnExpr::Apply(name, args) = e {
            let f = self.functions.lookup(name)?;
            if !f.accepts(args.len()) {
                return Err(Error::Invalid(format!("function {name} applied to {} arguments", args.len())));
            }
            for a in args {
                self.check_expr(a)?;
            }
        }
        Ok(())
    }

    /// Every predicate with its arity and role.
    pub fn predicates(&self) -> BTreeMap<String, PredInfo> {
        let mut out = BTreeMap::new();
        let mut add = |a: &Atom, tag: PredTag| {
            let e = out.entry(a.pred.clone()).or_insert(PredInfo { arity: a.args.len(), tag });
            if tag != PredTag::Plain {
                e.tag = tag;
            }
        };
        for a in &self.vc.decisions {
            add(a, PredTag::Decision);
        }
        for a in &self.vc.utilities {
            add(a, PredTag::Utility);
        }
        for r in &self.rules {
            r.atoms().for_each(|a| add(a, PredTag::Plain));
        }
        for t in &self.templates {
            [&t.head, &t.edge, &t.body].into_iter().for_each(|a| add(a, PredTag::Plain));
        }
        out
    }

    /// Constants mentioned anywhere, in first-appearance order.
    pub fn constants(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let atoms = self.rules.iter().flat_map(|r| r.atoms()).chain(self.templates.iter().flat_map(|t| [&t.head, &t.edge, &t.body]));
        for a in atoms {
            for t in &a.args {
                if let Term::Const(c) = t {
                    if seen.insert(c.clone()) {
                        out.push(c.clone());
                    }
                }
            }
        }
        out
    }
}

fn check_template(t: &NeighborTemplate) -> Result<()> {
    let err = |m: &str| Err(Error::Invalid(format!("template for {}: {m}", t.head)));
    let (u, v) = match t.edge.args.as_slice() {
        [Term::Var(u), Term::Var(v)] if u != v => (u, v),
        _ => return err("edge atom must be e(U,V) with distinct variables"),
    };
    if t.head.args != [Term::Var(v.clone())] {
        return err("head must be p(V) over the edge target variable");
    }
    if t.body.args != [Term::Var(u.clone())] {
        return err("body must be q(U) over the edge source variable");
    }
    if !(0.0..=1.0).contains(&t.edge_ann) {
        return err("edge annotation outside [0,1]");
    }
    if let Some(tau) = t.gate {
        if t.agg != Aggregate::Max {
            return err("a gate is only allowed with max");
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return err("gate threshold must be non-negative");
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexLabel {
    pub vertex: String,
    pub pred: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub pred: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SocialNetwork {
    vertices: Vec<String>,
    index: HashMap<String, usize>,
    pub labels: Vec<VertexLabel>,
    pub edges: Vec<Edge>,
}

impl SocialNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn contains(&self, v: &str) -> bool {
        self.index.contains_key(v)
    }

    pub fn add_vertex(&mut self, v: &str) -> usize {
        if let Some(&i) = self.index.get(v) {
            return i;
        }
        self.index.insert(v.to_string(), self.vertices.len());
        self.vertices.push(v.to_string());
        self.vertices.len() - 1
    }

    pub fn add_label(&mut self, v: &str, pred: &str, value: f64) -> Result<()> {
        check_weight(value)?;
        self.add_vertex(v);
        self.labels.push(VertexLabel { vertex: v.into(), pred: pred.into(), value });
        Ok(())
    }

    /// Adds an edge; endpoints must already be vertices.
    pub fn add_edge(&mut self, src: &str, dst: &str, pred: &str, weight: f64) -> Result<()> {
        check_weight(weight)?;
        for v in [src, dst] {
            if !self.contains(v) {
                return Err(Error::Network(format!("edge endpoint {v} is not a vertex")));
            }
        }
        self.edges.push(Edge { src: src.into(), dst: dst.into(), pred: pred.into(), weight });
        Ok(())
    }

    /// Adds both directions of an undirected edge.
    pub fn add_undirected(&mut self, a: &str, b: &str, pred: &str, weight: f64) -> Result<()> {
        self.add_edge(a, b, pred, weight)?;
        self.add_edge(b, a, pred, weight)
    }

    /// Facts `q(v):value <-` per label and `ep(u,v):w <-` per edge.
    pub fn to_facts(&self) -> Vec<Rule> {
        let labels = self.labels.iter().map(|l| Rule::fact(Atom::ground(&l.pred, &[&l.vertex]), l.value));
        let edges = self.edges.iter().map(|e| Rule::fact(Atom::ground(&e.pred, &[&e.src, &e.dst]), e.weight));
        labels.chain(edges).collect()
    }
}

fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::Network(format!("weight {w} outside [0,1]")))
    }
}

/// Full-weight test used for neighbourhoods.
pub fn reaches(weight: f64, threshold: f64) -> bool {
    weight >= threshold - EPS_EQ
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(s: &str) -> Term {
        Term::Var(s.into())
    }

    fn vc() -> VcRule {
        VcRule {
            decisions: vec![Atom::new("b1", vec![var("X")]), Atom::new("b2", vec![var("X")])],
            utilities: vec![Atom::new("a1", vec![var("X")]), Atom::new("a2", vec![var("X")])],
        }
    }

    #[test]
    fn sn_facts_transcribe_labels_and_edges() {
        let mut sn = SocialNetwork::new();
        sn.add_vertex("john");
        sn.add_label("tom", "student", 1.0).unwrap();
        sn.add_edge("john", "tom", "mentor", 1.0).unwrap();
        let facts = sn.to_facts();
        assert_eq!(facts.len(), 2);
        assert_eq!(facts[0], Rule::fact(Atom::ground("student", &["tom"]), 1.0));
        assert_eq!(facts[1], Rule::fact(Atom::ground("mentor", &["john", "tom"]), 1.0));
        assert!(SocialNetwork::new().to_facts().is_empty());
    }

    #[test]
    fn network_rejects_bad_weight_and_dangling_edge() {
        let mut sn = SocialNetwork::new();
        sn.add_vertex("1");
        assert!(sn.add_edge("1", "2", "friend", 1.0).is_err());
        sn.add_vertex("2");
        assert!(sn.add_edge("1", "2", "friend", 1.5).is_err());
        assert!(sn.add_edge("1", "2", "friend", 1.0).is_ok());
    }

    #[test]
    fn unbound_head_variable_rejected() {
        let r = Rule { head: Atom::ground("a1", &["1"]), ann: AnnExpr::Var("M".into()), body: vec![] };
        assert!(Program::new(FunctionRegistry::new(), vec![r], vec![], vc()).is_err());
    }

    #[test]
    fn constant_out_of_range_rejected() {
        let r = Rule::fact(Atom::ground("a1", &["1"]), 1.2);
        assert!(Program::new(FunctionRegistry::new(), vec![r], vec![], vc()).is_err());
    }

    #[test]
    fn reserved_choice_predicate_rejected() {
        let r = Rule::fact(Atom::ground("c_b1", &["1"]), 1.0);
        assert!(Program::new(FunctionRegistry::new(), vec![r], vec![], vc()).is_err());
    }

    #[test]
    fn predicate_tags() {
        let p = Program::new(FunctionRegistry::new(), vec![Rule::fact(Atom::ground("a1", &["1"]), 0.3)], vec![], vc()).unwrap();
        let preds = p.predicates();
        assert_eq!(preds["b1"].tag, PredTag::Decision);
        assert_eq!(preds["a1"].tag, PredTag::Utility);
        assert_eq!(p.constants(), vec!["1".to_string()]);
    }
}
