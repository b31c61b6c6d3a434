//! Grounding: instantiate rules over the vertex domain, expand neighbour
//! templates and intern every ground atom into a dense index.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::{FnId, FunctionRegistry, EPS_EQ};
use crate::model::{Aggregate, AnnExpr, Atom, BodyAnn, Program, Rule, SocialNetwork, Term};

pub type AtomId = u32;
pub type VertexId = u32;
pub type PredId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundAtom {
    pub pred: PredId,
    pub arity: u8,
    pub args: [VertexId; 2],
}

impl GroundAtom {
    pub fn unary(pred: PredId, v: VertexId) -> Self {
        GroundAtom { pred, arity: 1, args: [v, 0] }
    }

    pub fn binary(pred: PredId, u: VertexId, v: VertexId) -> Self {
        GroundAtom { pred, arity: 2, args: [u, v] }
    }

    pub fn args(&self) -> &[VertexId] {
        &self.args[..self.arity as usize]
    }
}

/// Bijection between ground atoms and dense ids, plus the predicate and
/// vertex name tables the atoms refer to.
#[derive(Debug, Clone, Default)]
pub struct AtomIndex {
    preds: Vec<String>,
    pred_ids: HashMap<String, PredId>,
    vertices: Vec<String>,
    vertex_ids: HashMap<String, VertexId>,
    atoms: Vec<GroundAtom>,
    ids: HashMap<GroundAtom, AtomId>,
}

impl AtomIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn add_vertex(&mut self, name: &str) -> VertexId {
        if let Some(&v) = self.vertex_ids.get(name) {
            return v;
        }
        let v = self.vertices.len() as VertexId;
        self.vertex_ids.insert(name.to_string(), v);
        self.vertices.push(name.to_string());
        v
    }

    pub fn add_pred(&mut self, name: &str) -> PredId {
        if let Some(&p) = self.pred_ids.get(name) {
            return p;
        }
        let p = self.preds.len() as PredId;
        self.pred_ids.insert(name.to_string(), p);
        self.preds.push(name.to_string());
        p
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_id(&self, name: &str) -> Option<VertexId> {
        self.vertex_ids.get(name).copied()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v as usize]
    }

    pub fn pred_id(&self, name: &str) -> Option<PredId> {
        self.pred_ids.get(name).copied()
    }

    pub fn pred_name(&self, p: PredId) -> &str {
        &self.preds[p as usize]
    }

    pub fn intern(&mut self, a: GroundAtom) -> AtomId {
        if let Some(&id) = self.ids.get(&a) {
            return id;
        }
        let id = self.atoms.len() as AtomId;
        self.ids.insert(a, id);
        self.atoms.push(a);
        id
    }

    pub fn lookup(&self, a: &GroundAtom) -> Option<AtomId> {
        self.ids.get(a).copied()
    }

    /// Id of a ground source atom.
    pub fn id_of(&self, a: &Atom) -> Result<AtomId> {
        let unknown = || Error::UnknownAtom(a.to_string());
        if !a.is_ground() {
            return Err(Error::NotGround(a.to_string()));
        }
        let pred = self.pred_id(&a.pred).ok_or_else(unknown)?;
        let mut args = [0; 2];
        if a.args.is_empty() || a.args.len() > 2 {
            return Err(unknown());
        }
        for (slot, t) in args.iter_mut().zip(&a.args) {
            *slot = self.vertex_id(t.name()).ok_or_else(unknown)?;
        }
        self.lookup(&GroundAtom { pred, arity: a.args.len() as u8, args }).ok_or_else(unknown)
    }

    /// Id of an atom given by display name, e.g. `buyAsus^D(1)`.
    pub fn id_by_name(&self, name: &str) -> Result<AtomId> {
        let atom = parse_display(name).ok_or_else(|| Error::UnknownAtom(name.into()))?;
        self.id_of(&atom)
    }

    pub fn atom(&self, id: AtomId) -> GroundAtom {
        self.atoms[id as usize]
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn to_atom(&self, id: AtomId) -> Atom {
        let g = self.atom(id);
        Atom {
            pred: self.pred_name(g.pred).to_string(),
            args: g.args().iter().map(|v| Term::Const(self.vertex_name(*v).to_string())).collect(),
        }
    }

    /// `pred(a,b)` with raw vertex names.
    pub fn name(&self, id: AtomId) -> String {
        let g = self.atom(id);
        let args: Vec<&str> = g.args().iter().map(|v| self.vertex_name(*v)).collect();
        format!("{}({})", self.pred_name(g.pred), args.join(","))
    }

    pub fn pred_of(&self, id: AtomId) -> &str {
        self.pred_name(self.atom(id).pred)
    }
}

/// Splits `pred(a,b)` into an atom with constant arguments.
fn parse_display(name: &str) -> Option<Atom> {
    let open = name.find('(')?;
    let inner = name[open + 1..].strip_suffix(')')?;
    let args: Vec<&str> = inner.split(',').map(str::trim).collect();
    Some(Atom::ground(name[..open].trim(), &args))
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadExpr {
    Const(f64),
    /// Value of the k-th propagating body atom.
    Arg(usize),
    Apply(FnId, Vec<HeadExpr>),
}

impl HeadExpr {
    pub fn eval(&self, fns: &FunctionRegistry, args: &[f64]) -> f64 {
        match self {
            HeadExpr::Const(c) => *c,
            HeadExpr::Arg(k) => args[*k],
            HeadExpr::Apply(f, es) => {
                let xs: Vec<f64> = es.iter().map(|e| e.eval(fns, args)).collect();
                fns.get(*f).eval(&xs)
            }
        }
    }

    /// `f(arg0, .., argn)` applied to the body in order.
    fn is_direct(es: &[HeadExpr], n: usize) -> bool {
        es.len() == n && es.iter().enumerate().all(|(i, e)| *e == HeadExpr::Arg(i))
    }
}

/// Ground GAP rule: head value is `expr` over the propagating body atoms when
/// every condition atom reaches its constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    pub head: AtomId,
    pub expr: HeadExpr,
    pub body: Vec<AtomId>,
    pub conds: Vec<(AtomId, f64)>,
}

impl GroundRule {
    /// The bridge `b:M <- a:M`.
    pub fn bridge(head: AtomId, src: AtomId) -> Self {
        GroundRule { head, expr: HeadExpr::Arg(0), body: vec![src], conds: Vec::new() }
    }

    pub fn fact(head: AtomId, value: f64) -> Self {
        GroundRule { head, expr: HeadExpr::Const(value), body: Vec::new(), conds: Vec::new() }
    }

    pub fn reads(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.body.iter().copied().chain(self.conds.iter().map(|c| c.0))
    }
}

/// One vertex-choice instance: decision atoms b₁(v)..b_m(v) and utility atoms a₁(v)..a_m(v).
#[derive(Debug, Clone, PartialEq)]
pub struct VcInstance {
    pub vertex: VertexId,
    pub decisions: Vec<AtomId>,
    pub utilities: Vec<AtomId>,
}

/// Predicate ids of the choice rule, position i ↔ action i+1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSignature {
    pub decisions: Vec<PredId>,
    pub utilities: Vec<PredId>,
}

impl ChoiceSignature {
    pub fn arity(&self) -> usize {
        self.decisions.len()
    }
}

#[derive(Debug, Clone)]
pub struct GroundProgram {
    pub index: Arc<AtomIndex>,
    pub functions: Arc<FunctionRegistry>,
    pub rules: Vec<GroundRule>,
    pub vc: Vec<VcInstance>,
    pub choice: ChoiceSignature,
    by_head: Vec<Vec<u32>>,
    readers: Vec<Vec<u32>>,
}

impl GroundProgram {
    pub fn new(index: Arc<AtomIndex>, functions: Arc<FunctionRegistry>, rules: Vec<GroundRule>, vc: Vec<VcInstance>, choice: ChoiceSignature) -> Self {
        let n = index.len();
        let mut by_head = vec![Vec::new(); n];
        let mut readers = vec![Vec::new(); n];
        for (i, r) in rules.iter().enumerate() {
            by_head[r.head as usize].push(i as u32);
            let mut seen = HashSet::new();
            for a in r.reads() {
                if seen.insert(a) {
                    readers[a as usize].push(i as u32);
                }
            }
        }
        GroundProgram { index, functions, rules, vc, choice, by_head, readers }
    }

    /// Same atoms and choice structure, different rules and VC instances.
    pub fn with_rules(&self, rules: Vec<GroundRule>, vc: Vec<VcInstance>) -> Self {
        GroundProgram::new(self.index.clone(), self.functions.clone(), rules, vc, self.choice.clone())
    }

    pub fn atom_count(&self) -> usize {
        self.index.len()
    }

    pub fn arity(&self) -> usize {
        self.choice.arity()
    }

    /// rules(A): ids of the rules with head A.
    pub fn rules_for(&self, a: AtomId) -> &[u32] {
        &self.by_head[a as usize]
    }

    /// Rules whose body or conditions mention A.
    pub fn readers(&self, a: AtomId) -> &[u32] {
        &self.readers[a as usize]
    }

    pub fn intern(&self, a: &Atom) -> Result<AtomId> {
        self.index.id_of(a)
    }

    /// Value of a rule under `vals`, or `None` when a condition fails.
    pub fn rule_value(&self, r: &GroundRule, vals: &[f64]) -> Option<f64> {
        self.rule_value_buf(r, vals, &mut Vec::new())
    }

    /// As `rule_value`, reusing `buf` for function arguments.
    pub fn rule_value_buf(&self, r: &GroundRule, vals: &[f64], buf: &mut Vec<f64>) -> Option<f64> {
        if r.conds.iter().any(|&(c, k)| !condition_holds(vals[c as usize], k)) {
            return None;
        }
        let v = match &r.expr {
            HeadExpr::Const(c) => *c,
            HeadExpr::Arg(k) => vals[r.body[*k] as usize],
            e => {
                buf.clear();
                buf.extend(r.body.iter().map(|a| vals[*a as usize]));
                match e {
                    HeadExpr::Apply(f, es) if HeadExpr::is_direct(es, buf.len()) => self.functions.get(*f).eval(buf),
                    _ => e.eval(&self.functions, buf),
                }
            }
        };
        Some(v)
    }

    /// Utility atom of action `i` (0-based) at VC instance `k`.
    pub fn utility_atom(&self, k: usize, i: usize) -> AtomId {
        self.vc[k].utilities[i]
    }

    pub fn decision_atom(&self, k: usize, i: usize) -> AtomId {
        self.vc[k].decisions[i]
    }
}

/// Condition `C:c` holds when I(C) ≥ c; a zero constant always holds.
pub fn condition_holds(value: f64, c: f64) -> bool {
    c <= 0.0 || value >= c - EPS_EQ
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GroundOptions {
    /// Instantiate every variable over every vertex, ignoring fact support.
    pub naive: bool,
}

/// Limit on instantiations of a single rule.
const MAX_INSTANCES: usize = 50_000_000;

pub fn ground(p: &Program, sn: &SocialNetwork) -> Result<GroundProgram> {
    ground_with(p, sn, GroundOptions::default())
}

pub fn ground_with(p: &Program, sn: &SocialNetwork, opts: GroundOptions) -> Result<GroundProgram> {
    let mut index = AtomIndex::new();
    for v in sn.vertices() {
        index.add_vertex(v);
    }
    for c in p.constants() {
        index.add_vertex(&c);
    }
    if index.vertex_count() == 0 {
        return Err(Error::EmptyDomain);
    }
    let decisions: Vec<PredId> = p.vc.decisions.iter().map(|a| index.add_pred(&a.pred)).collect();
    let utilities: Vec<PredId> = p.vc.utilities.iter().map(|a| index.add_pred(&a.pred)).collect();
    for name in p.predicates().keys() {
        index.add_pred(name);
    }

    let mut functions = p.functions.clone();
    let facts = sn.to_facts();
    let source: Vec<&Rule> = facts.iter().chain(&p.rules).collect();
    let table = FactTable::build(&source, p.vc.decisions.iter().chain(&p.vc.utilities).map(|a| a.pred.as_str()));

    let domain: Vec<VertexId> = (0..index.vertex_count() as VertexId).collect();
    let mut rules = Vec::new();
    for r in &source {
        ground_rule(r, &table, &domain, opts, &functions, &mut index, &mut rules)?;
    }

    for t in &p.templates {
        let fid = match (t.agg, t.gate) {
            (Aggregate::Avg, _) => functions.avg_id(),
            (Aggregate::Max, None) => functions.max_id(),
            (Aggregate::Max, Some(tau)) => functions.gated(tau)?,
        };
        let mut nbr: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        for (u, v, w) in table.ground_facts.get(&t.edge.pred).map(Vec::as_slice).unwrap_or(&[]) {
            if crate::model::reaches(*w, t.edge_ann) {
                let u = index.add_vertex(u);
                let v = index.add_vertex(v);
                nbr.entry(v).or_default().push(u);
            }
        }
        let head_pred = index.add_pred(&t.head.pred);
        let body_pred = index.add_pred(&t.body.pred);
        for &v in &domain {
            let Some(us) = nbr.get_mut(&v) else { continue };
            us.sort_unstable();
            us.dedup();
            let body: Vec<AtomId> = us.iter().map(|&u| index.intern(GroundAtom::unary(body_pred, u))).collect();
            let head = index.intern(GroundAtom::unary(head_pred, v));
            let expr = HeadExpr::Apply(fid, (0..body.len()).map(HeadExpr::Arg).collect());
            rules.push(GroundRule { head, expr, body, conds: Vec::new() });
        }
    }

    let vc = domain
        .iter()
        .map(|&v| VcInstance {
            vertex: v,
            decisions: decisions.iter().map(|&p| index.intern(GroundAtom::unary(p, v))).collect(),
            utilities: utilities.iter().map(|&p| index.intern(GroundAtom::unary(p, v))).collect(),
        })
        .collect();

    Ok(GroundProgram::new(Arc::new(index), Arc::new(functions), rules, vc, ChoiceSignature { decisions, utilities }))
}

/// Ground facts per predicate, used to restrict instantiation.
struct FactTable {
    /// Predicates whose only defining rules are ground facts.
    extensional: HashSet<String>,
    /// pred → (arg0, arg1 or "", value), from ground facts of any predicate.
    ground_facts: HashMap<String, Vec<(String, String, f64)>>,
}

impl FactTable {
    fn build<'a>(rules: &[&Rule], choice_preds: impl Iterator<Item = &'a str>) -> Self {
        let mut intensional = HashSet::new();
        let mut heads = HashSet::new();
        let mut ground_facts: HashMap<String, Vec<(String, String, f64)>> = HashMap::new();
        for r in rules {
            heads.insert(r.head.pred.clone());
            match (&r.ann, r.body.is_empty() && r.head.is_ground()) {
                (AnnExpr::Const(c), true) => {
                    let a = &r.head.args;
                    let second = a.get(1).map(|t| t.name().to_string()).unwrap_or_default();
                    ground_facts.entry(r.head.pred.clone()).or_default().push((a[0].name().to_string(), second, *c));
                }
                _ => {
                    intensional.insert(r.head.pred.clone());
                }
            }
        }
        let mut extensional: HashSet<String> = heads.difference(&intensional).cloned().collect();
        for r in rules {
            for l in &r.body {
                if !heads.contains(&l.atom.pred) {
                    extensional.insert(l.atom.pred.clone());
                }
            }
        }
        for c in choice_preds {
            extensional.remove(c);
        }
        FactTable { extensional, ground_facts }
    }

    /// Facts of `pred` reaching `c` (the instances where condition `pred:c` can hold).
    fn supporting(&self, pred: &str, c: f64) -> impl Iterator<Item = &(String, String, f64)> {
        self.ground_facts.get(pred).into_iter().flatten().filter(move |f| f.2 >= c - EPS_EQ)
    }
}

fn ground_rule(
    r: &Rule,
    table: &FactTable,
    domain: &[VertexId],
    opts: GroundOptions,
    fns: &FunctionRegistry,
    index: &mut AtomIndex,
    out: &mut Vec<GroundRule>,
) -> Result<()> {
    let mut vars: Vec<&str> = Vec::new();
    for a in r.atoms() {
        for v in a.vars() {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
    }
    let slot = |name: &str| vars.iter().position(|v| *v == name).unwrap();

    let mut bindings: Vec<Vec<Option<VertexId>>> = vec![vec![None; vars.len()]];
    if !opts.naive {
        for l in &r.body {
            let BodyAnn::Const(c) = l.ann else { continue };
            if c <= 0.0 || !table.extensional.contains(&l.atom.pred) {
                continue;
            }
            let mut next = Vec::new();
            for b in &bindings {
                for (x, y, _) in table.supporting(&l.atom.pred, c) {
                    let mut nb = b.clone();
                    let ok = l.atom.args.iter().zip([x, y]).all(|(t, val)| {
                        let Some(vid) = index.vertex_id(val) else { return false };
                        match t {
                            Term::Const(k) => k == val,
                            Term::Var(v) => {
                                let s = &mut nb[slot(v)];
                                match *s {
                                    Some(cur) => cur == vid,
                                    None => {
                                        *s = Some(vid);
                                        true
                                    }
                                }
                            }
                        }
                    });
                    if ok {
                        next.push(nb);
                    }
                }
            }
            bindings = next;
            if bindings.is_empty() {
                return Ok(());
            }
        }
    }
    let mut full = Vec::new();
    for b in bindings {
        let free: Vec<usize> = (0..vars.len()).filter(|&i| b[i].is_none()).collect();
        let count = domain.len().checked_pow(free.len() as u32).unwrap_or(usize::MAX);
        if count.saturating_add(full.len()) > MAX_INSTANCES {
            return Err(Error::Invalid(format!("rule for {} has too many ground instances", r.head)));
        }
        let mut cur = b;
        expand(&free, 0, domain, &mut cur, &mut full);
    }

    let prop_vars: Vec<&str> = r.propagating().map(|(_, v)| v).collect();
    let expr = compile_expr(&r.ann, &prop_vars, fns)?;
    for b in full {
        let mut ground = |a: &Atom| -> AtomId {
            let pred = index.add_pred(&a.pred);
            let mut args = [0; 2];
            for (s, t) in args.iter_mut().zip(&a.args) {
                *s = match t {
                    Term::Const(c) => index.add_vertex(c),
                    Term::Var(v) => b[slot(v)].unwrap(),
                };
            }
            index.intern(GroundAtom { pred, arity: a.args.len() as u8, args })
        };
        let head = ground(&r.head);
        let body = r.propagating().map(|(a, _)| ground(a)).collect();
        let conds = r.conditions().map(|(a, c)| (ground(a), c)).collect();
        out.push(GroundRule { head, expr: expr.clone(), body, conds });
    }
    Ok(())
}

fn expand(free: &[usize], k: usize, domain: &[VertexId], cur: &mut Vec<Option<VertexId>>, out: &mut Vec<Vec<Option<VertexId>>>) {
    if k == free.len() {
        out.push(cur.clone());
        return;
    }
    for &v in domain {
        cur[free[k]] = Some(v);
        expand(free, k + 1, domain, cur, out);
    }
    cur[free[k]] = None;
}

fn compile_expr(e: &AnnExpr, prop_vars: &[&str], fns: &FunctionRegistry) -> Result<HeadExpr> {
    Ok(match e {
        AnnExpr::Const(c) => HeadExpr::Const(*c),
        AnnExpr::Var(v) => HeadExpr::Arg(prop_vars.iter().position(|p| p == v).ok_or_else(|| Error::Invalid(format!("unbound annotation variable {v}")))?),
        AnnExpr::Apply(name, args) => {
            let id = fns.id(name).ok_or_else(|| Error::UnknownFunction(name.clone()))?;
            HeadExpr::Apply(id, args.iter().map(|a| compile_expr(a, prop_vars, fns)).collect::<Result<_>>()?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BodyLit, VcRule};

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
    fn empty_domain_rejected() {
        let p = Program::new(FunctionRegistry::new(), vec![], vec![], vc()).unwrap();
        assert_eq!(ground(&p, &SocialNetwork::new()).unwrap_err(), Error::EmptyDomain);
    }

    #[test]
    fn intern_is_stable_and_rejects_unknown() {
        let p = Program::new(FunctionRegistry::new(), vec![Rule::fact(Atom::ground("a1", &["1"]), 0.3)], vec![], vc()).unwrap();
        let gp = ground(&p, &SocialNetwork::new()).unwrap();
        let a = Atom::ground("a1", &["1"]);
        assert_eq!(gp.intern(&a).unwrap(), gp.intern(&a).unwrap());
        assert_eq!(gp.index.name(gp.intern(&a).unwrap()), "a1(1)");
        assert_eq!(gp.index.id_by_name("a1(1)").unwrap(), gp.intern(&a).unwrap());
        assert!(gp.intern(&Atom::ground("a1", &["9"])).is_err());
        assert!(gp.intern(&Atom::ground("zz", &["1"])).is_err());
    }

    #[test]
    fn condition_restriction_uses_fact_support() {
        // a1(Y):M <- e(X,Y):1, b1(X):M over e(1,2) only.
        let r = Rule {
            head: Atom::new("a1", vec![var("Y")]),
            ann: AnnExpr::Var("M".into()),
            body: vec![
                BodyLit { atom: Atom::new("e", vec![var("X"), var("Y")]), ann: BodyAnn::Const(1.0) },
                BodyLit { atom: Atom::new("b1", vec![var("X")]), ann: BodyAnn::Var("M".into()) },
            ],
        };
        let p = Program::new(FunctionRegistry::new(), vec![Rule::fact(Atom::ground("e", &["1", "2"]), 1.0), r], vec![], vc()).unwrap();
        let sn = SocialNetwork::new();
        let gp = ground(&p, &sn).unwrap();
        assert_eq!(gp.rules.len(), 2);
        let naive = ground_with(&p, &sn, GroundOptions { naive: true }).unwrap();
        assert_eq!(naive.rules.len(), 1 + 4);
    }
}
