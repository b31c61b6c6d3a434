//! Game view of a cGAP: states, induced programs, utilities and Nash checks,
//! plus compilers from normal-form games and product-adoption games.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{AnnotationFn, FnKind, FunctionRegistry, EPS_EQ};
use crate::ground::{AtomId, GroundProgram, GroundRule};
use crate::interp::Interpretation;
use crate::model::{AnnExpr, Atom, BodyAnn, BodyLit, Program, Rule, Term, VcRule};
use crate::semantics::minimal_model_bridged;

/// One action per VC instance (vertex), numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State(pub Vec<usize>);

impl State {
    pub fn uniform(n: usize, action: usize) -> Self {
        State(vec![action; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn action(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn with(&self, k: usize, action: usize) -> State {
        let mut s = self.clone();
        s.0[k] = action;
        s
    }

    /// The `code`-th state in lexicographic order (first vertex most significant).
    pub fn from_code(mut code: u64, n: usize, m: usize) -> State {
        let mut v = vec![1; n];
        for slot in v.iter_mut().rev() {
            *slot = (code % m as u64) as usize + 1;
            code /= m as u64;
        }
        State(v)
    }

    pub fn validate(&self, gp: &GroundProgram) -> Result<()> {
        if self.0.len() != gp.vc.len() {
            return Err(Error::BadState { expected: gp.vc.len(), got: self.0.len() });
        }
        let m = gp.arity();
        match self.0.iter().find(|a| **a == 0 || **a > m) {
            Some(&action) => Err(Error::BadAction { action, m }),
            None => Ok(()),
        }
    }
}

/// Bridge pairs (decision, utility) selected by `s`.
pub fn state_bridges(gp: &GroundProgram, s: &State) -> Result<Vec<(AtomId, AtomId)>> {
    s.validate(gp)?;
    Ok(gp.vc.iter().zip(&s.0).map(|(vc, &a)| (vc.decisions[a - 1], vc.utilities[a - 1])).collect())
}

/// Π_S: every VC instance replaced by the bridge rule of the chosen action.
pub fn induced_program(gp: &GroundProgram, s: &State) -> Result<GroundProgram> {
    let mut rules = gp.rules.clone();
    rules.extend(state_bridges(gp, s)?.into_iter().map(|(b, a)| GroundRule::bridge(b, a)));
    Ok(gp.with_rules(rules, Vec::new()))
}

/// MM(Π_S).
pub fn induced_model(gp: &GroundProgram, s: &State) -> Result<Interpretation> {
    minimal_model_bridged(gp, &state_bridges(gp, s)?).into_model()
}

/// u(S, v, i) = MM(Π_S)(aᵢ(v)); `k` indexes the VC instance, `action` is 1-based.
pub fn utility(gp: &GroundProgram, s: &State, k: usize, action: usize) -> Result<f64> {
    if k >= gp.vc.len() {
        return Err(Error::BadState { expected: gp.vc.len(), got: k + 1 });
    }
    if action == 0 || action > gp.arity() {
        return Err(Error::BadAction { action, m: gp.arity() });
    }
    Ok(induced_model(gp, s)?.get(gp.utility_atom(k, action - 1)))
}

/// No player gains by a unilateral deviation.
pub fn is_nash_state(gp: &GroundProgram, s: &State) -> Result<bool> {
    let model = induced_model(gp, s)?;
    let m = gp.arity();
    let current: Vec<f64> = (0..gp.vc.len()).map(|k| model.get(gp.utility_atom(k, s.action(k) - 1))).collect();
    let deviations: Vec<(usize, usize)> = (0..gp.vc.len()).flat_map(|k| (1..=m).filter(move |&a| a != s.action(k)).map(move |a| (k, a))).collect();
    let gains: Result<Vec<bool>> = deviations
        .par_iter()
        .map(|&(k, a)| {
            let dev = induced_model(gp, &s.with(k, a))?;
            Ok(dev.get(gp.utility_atom(k, a - 1)) > current[k] + EPS_EQ)
        })
        .collect();
    Ok(!gains?.into_iter().any(|g| g))
}

/// Normal-form game: every player picks one of the same actions; utilities are
/// indexed by joint profile, first player most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericGame {
    pub players: Vec<String>,
    pub actions: Vec<String>,
    pub utilities: Vec<Vec<f64>>,
}

impl GenericGame {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.players.is_empty() {
            return bad("a game needs at least one player".into());
        }
        if self.actions.len() < 2 {
            return bad("a game needs at least two actions".into());
        }
        if self.utilities.len() != self.players.len() {
            return bad("one utility table per player is required".into());
        }
        let size = self.profile_count();
        if let Some(t) = self.utilities.iter().find(|t| t.len() != size) {
            return bad(format!("utility table has {} entries, expected {size}", t.len()));
        }
        if self.utilities.iter().flatten().any(|u| !u.is_finite()) {
            return bad("utilities must be finite".into());
        }
        for a in self.actions.iter().chain(&self.players) {
            if a.is_empty() {
                return bad("empty player or action name".into());
            }
        }
        Ok(())
    }

    pub fn profile_count(&self) -> usize {
        self.actions.len().pow(self.players.len() as u32)
    }

    /// Action indexes (0-based) of profile `code`.
    pub fn profile(&self, code: usize) -> Vec<usize> {
        State::from_code(code as u64, self.players.len(), self.actions.len()).0.into_iter().map(|a| a - 1).collect()
    }

    pub fn code(&self, profile: &[usize]) -> usize {
        profile.iter().fold(0, |acc, a| acc * self.actions.len() + a)
    }

    /// Pure Nash equilibria computed on the matrix, as 0-based profiles.
    pub fn nash_profiles(&self) -> Vec<Vec<usize>> {
        (0..self.profile_count())
            .map(|c| self.profile(c))
            .filter(|prof| {
                (0..self.players.len()).all(|p| {
                    let here = self.utilities[p][self.code(prof)];
                    (0..self.actions.len()).all(|a| {
                        let mut dev = prof.clone();
                        dev[p] = a;
                        self.utilities[p][self.code(&dev)] <= here
                    })
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameCompileOptions {
    pub epsilon: f64,
    /// Round the per-unit scale to this many decimals before scaling, capping
    /// scaled values at 1−ε. `Some(2)` reproduces two-decimal hand listings.
    pub unit_decimals: Option<u32>,
}

impl Default for GameCompileOptions {
    fn default() -> Self {
        GameCompileOptions { epsilon: 0.1, unit_decimals: None }
    }
}

/// Utilities mapped affinely into [0, 1−ε].
pub fn scale_utilities(g: &GenericGame, opts: &GameCompileOptions) -> Vec<Vec<f64>> {
    let all = g.utilities.iter().flatten();
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let top = 1.0 - opts.epsilon;
    let unit = if hi > lo {
        let u = top / (hi - lo);
        match opts.unit_decimals {
            Some(d) => round_to(u, d),
            None => u,
        }
    } else {
        0.0
    };
    g.utilities.iter().map(|t| t.iter().map(|u| tidy((unit * (u - lo)).min(top))).collect()).collect()
}

fn round_to(x: f64, decimals: u32) -> f64 {
    let f = 10f64.powi(decimals as i32);
    (x * f).round() / f
}

/// Drops binary noise such as 0.22999999999999998 → 0.23.
fn tidy(x: f64) -> f64 {
    round_to(x, 12)
}

fn unary(pred: &str, c: &str) -> Atom {
    Atom::new(pred, vec![Term::Const(c.to_string())])
}

fn choice_rule(decisions: Vec<String>, utilities: Vec<String>) -> VcRule {
    let x = || vec![Term::Var("X".into())];
    VcRule {
        decisions: decisions.into_iter().map(|p| Atom::new(p, x())).collect(),
        utilities: utilities.into_iter().map(|p| Atom::new(p, x())).collect(),
    }
}

/// cGAP whose strong equilibria are the Nash equilibria of `g`: base facts
/// qᵁ(p):ε, one rule per player, action and opponent profile gated on the
/// opponents' decision atoms, and a VC rule over the actions.
pub fn compile_generic_game(g: &GenericGame, opts: &GameCompileOptions) -> Result<Program> {
    g.validate()?;
    let eps = opts.epsilon;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Invalid(format!("epsilon {eps} must lie in (0,1)")));
    }
    let scaled = scale_utilities(g, opts);
    let u = |a: &str| format!("{a}^U");
    let d = |a: &str| format!("{a}^D");
    let mut rules = Vec::new();
    for q in &g.actions {
        for p in &g.players {
            rules.push(Rule::fact(unary(&u(q), p), eps));
        }
    }
    let n = g.players.len();
    let m = g.actions.len();
    let others = m.pow(n as u32 - 1);
    for (pi, p) in g.players.iter().enumerate() {
        let opponents: Vec<usize> = (0..n).filter(|&o| o != pi).collect();
        for (qi, q) in g.actions.iter().enumerate() {
            for code in 0..others {
                let opp = State::from_code(code as u64, n - 1, m).0;
                let mut prof = vec![0; n];
                prof[pi] = qi;
                for (o, a) in opponents.iter().zip(&opp) {
                    prof[*o] = a - 1;
                }
                let value = tidy((scaled[pi][g.code(&prof)] + eps).min(1.0));
                let body = opponents
                    .iter()
                    .zip(&opp)
                    .map(|(o, a)| BodyLit { atom: unary(&d(&g.actions[a - 1]), &g.players[*o]), ann: BodyAnn::Const(eps) })
                    .collect();
                rules.push(Rule { head: unary(&u(q), p), ann: AnnExpr::Const(value), body });
            }
        }
    }
    let vc = choice_rule(g.actions.iter().map(|a| d(a)).collect(), g.actions.iter().map(|a| u(a)).collect());
    Program::new(FunctionRegistry::new(), rules, Vec::new(), vc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub src: String,
    pub dst: String,
    pub weight: f64,
}

/// Social network game where every vertex adopts one available product and
/// gains from in-neighbours adopting the same one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AptSimonGame {
    pub vertices: Vec<String>,
    pub edges: Vec<WeightedEdge>,
    pub products: Vec<String>,
    /// vertex → available products.
    pub availability: BTreeMap<String, Vec<String>>,
    /// vertex → product → threshold.
    pub thresholds: BTreeMap<String, BTreeMap<String, f64>>,
    pub c0: f64,
}

impl AptSimonGame {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.products.len() < 2 {
            return bad("at least two products are required".into());
        }
        if !(self.c0 > 0.0 && self.c0 <= 1.0) {
            return bad(format!("c0 = {} outside (0,1]", self.c0));
        }
        let vs: HashSet<&str> = self.vertices.iter().map(String::as_str).collect();
        let ps: HashSet<&str> = self.products.iter().map(String::as_str).collect();
        if vs.len() != self.vertices.len() || ps.len() != self.products.len() {
            return bad("duplicate vertex or product".into());
        }
        for p in &self.products {
            if !p.starts_with(|c: char| c.is_ascii_lowercase()) || !p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return bad(format!("product name {p} must be a lowercase identifier"));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.edges {
            if !vs.contains(e.src.as_str()) || !vs.contains(e.dst.as_str()) {
                return bad(format!("edge {} -> {} has an unknown endpoint", e.src, e.dst));
            }
            if !(e.weight > 0.0 && e.weight <= 1.0) {
                return bad(format!("edge weight {} outside (0,1]", e.weight));
            }
            if e.src == e.dst || !seen.insert((e.src.as_str(), e.dst.as_str())) {
                return bad(format!("edge {} -> {} is a loop or repeated", e.src, e.dst));
            }
        }
        for v in &self.vertices {
            let avail = self.available(v);
            if avail.is_empty() {
                return bad(format!("vertex {v} has no available product"));
            }
            for p in avail {
                if !ps.contains(p.as_str()) {
                    return bad(format!("vertex {v} lists unknown product {p}"));
                }
                match self.thresholds.get(v).and_then(|t| t.get(p)) {
                    Some(t) if *t > 0.0 && *t <= 1.0 => {}
                    _ => return bad(format!("threshold for ({v}, {p}) missing or outside (0,1]")),
                }
            }
        }
        Ok(())
    }

    pub fn available(&self, v: &str) -> &[String] {
        self.availability.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    fn product_index(&self, p: &str) -> usize {
        self.products.iter().position(|q| q == p).unwrap()
    }

    fn vertex_index(&self, v: &str) -> usize {
        self.vertices.iter().position(|q| q == v).unwrap()
    }

    /// In-neighbours of `v` with edge weights.
    pub fn in_neighbors(&self, v: &str) -> Vec<(usize, f64)> {
        self.edges.iter().filter(|e| e.dst == v).map(|e| (self.vertex_index(&e.src), e.weight)).collect()
    }

    fn threshold(&self, v: &str, p: &str) -> f64 {
        self.thresholds[v][p]
    }

    /// ū_v(s) for a joint choice of product indexes, one per vertex.
    pub fn utility(&self, v: usize, joint: &[usize]) -> f64 {
        let name = &self.vertices[v];
        let mine = &self.products[joint[v]];
        if !self.available(name).contains(mine) {
            return 0.0;
        }
        let nbrs = self.in_neighbors(name);
        if nbrs.is_empty() {
            return self.c0;
        }
        let theta = self.threshold(name, mine);
        let sum: f64 = nbrs.iter().filter(|(u, _)| joint[*u] == joint[v]).map(|(_, w)| w - theta).sum();
        0.5 + sum / (2.0 * nbrs.len() as f64)
    }

    /// Pure Nash equilibria over available products, by exhaustive scan.
    pub fn nash_states(&self) -> Vec<Vec<usize>> {
        let options: Vec<Vec<usize>> = self.vertices.iter().map(|v| self.available(v).iter().map(|p| self.product_index(p)).collect()).collect();
        let mut out = Vec::new();
        let mut joint: Vec<usize> = options.iter().map(|o| o[0]).collect();
        let mut digits = vec![0usize; options.len()];
        loop {
            let stable = (0..joint.len()).all(|v| {
                let here = self.utility(v, &joint);
                options[v].iter().all(|&alt| {
                    let mut dev = joint.clone();
                    dev[v] = alt;
                    self.utility(v, &dev) <= here + EPS_EQ
                })
            });
            if stable {
                out.push(joint.clone());
            }
            let mut k = joint.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < options[k].len() {
                    joint[k] = options[k][digits[k]];
                    break;
                }
                digits[k] = 0;
                joint[k] = options[k][0];
            }
        }
    }
}

/// cGAP whose utility atoms evaluate to ū_v under every state: a fact c₀ for
/// isolated vertices, otherwise one rule per (vertex, available product) whose
/// registered function adds (w − θ)/(2|N(v)|) for each in-neighbour that chose
/// the same product.
pub fn compile_apt_simon(g: &AptSimonGame) -> Result<Program> {
    g.validate()?;
    let u = |p: &str| format!("{p}^U");
    let d = |p: &str| format!("{p}^D");
    let mut fns = FunctionRegistry::new();
    let mut rules = Vec::new();
    for (vi, v) in g.vertices.iter().enumerate() {
        let nbrs = g.in_neighbors(v);
        for p in &g.products {
            if !g.available(v).contains(p) {
                continue;
            }
            if nbrs.is_empty() {
                rules.push(Rule::fact(unary(&u(p), v), g.c0));
                continue;
            }
            let theta = g.threshold(v, p);
            let k = nbrs.len() as f64;
            let weights = nbrs.iter().map(|(_, w)| (w - theta) / (2.0 * k)).collect();
            let name = format!("as_{vi}_{}", g.product_index(p));
            fns.register(AnnotationFn::new(name.clone(), Some(nbrs.len()), FnKind::MatchSum { base: 0.5, weights })?)?;
            let vars: Vec<String> = (0..nbrs.len()).map(|i| format!("M{i}")).collect();
            let body = nbrs
                .iter()
                .zip(&vars)
                .map(|((ui, _), m)| BodyLit { atom: unary(&d(p), &g.vertices[*ui]), ann: BodyAnn::Var(m.clone()) })
                .collect();
            let ann = AnnExpr::Apply(name, vars.into_iter().map(AnnExpr::Var).collect());
            rules.push(Rule { head: unary(&u(p), v), ann, body });
        }
    }
    let vc = choice_rule(g.products.iter().map(|p| d(p)).collect(), g.products.iter().map(|p| u(p)).collect());
    Program::new(fns, rules, Vec::new(), vc)
}
