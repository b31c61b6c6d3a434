//! Estimation queries under range semantics: the interval of values an
//! aggregate takes over all strong equilibria.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wildmatch::WildMatch;

use crate::equilibria::{enumerate_strong_equilibria, EnumOptions, Equilibrium};
use crate::error::{Error, Result};
use crate::function::EPS_EQ;
use crate::game::State;
use crate::ground::{AtomId, AtomIndex, GroundAtom, GroundProgram};
use crate::interp::Interpretation;
use crate::milp::{build_ilc, compute_t_hat_with, solve_with, Cmp, ConstraintSystem, LinExpr, Sense, SolveOptions, THatOptions, VarId};
use crate::model::{Program, CHOICE_PREFIX};
use crate::vic::{classify, extremal_models};

/// The ground atom index extended with one choice indicator per vertex and
/// action, `c_<decision>(v)`, valued 1 iff the vertex picked that action.
#[derive(Debug, Clone)]
pub struct ChoiceAtoms {
    pub index: Arc<AtomIndex>,
    /// choice[k][i]: indicator of VC instance k picking action i+1.
    pub choice: Vec<Vec<AtomId>>,
    base_len: usize,
}

pub fn augment_choice_atoms(gp: &GroundProgram) -> ChoiceAtoms {
    let mut index = (*gp.index).clone();
    let base_len = index.len();
    let choice = gp
        .vc
        .iter()
        .map(|inst| {
            inst.decisions
                .iter()
                .map(|&d| {
                    let pred = index.add_pred(&format!("{CHOICE_PREFIX}{}", gp.index.pred_of(d)));
                    index.intern(GroundAtom::unary(pred, inst.vertex))
                })
                .collect()
        })
        .collect();
    ChoiceAtoms { index: Arc::new(index), choice, base_len }
}

impl ChoiceAtoms {
    /// `i` (over the program atoms) extended with the indicators of `state`.
    pub fn extend(&self, i: &Interpretation, state: &State) -> Result<Interpretation> {
        if i.len() != self.base_len || state.len() != self.choice.len() {
            return Err(Error::IndexMismatch);
        }
        let mut values = i.values().to_vec();
        values.resize(self.index.len(), 0.0);
        for (k, ids) in self.choice.iter().enumerate() {
            values[ids[state.action(k) - 1] as usize] = 1.0;
        }
        Interpretation::from_values(self.index.clone(), values)
    }

    /// Choice (k, action index) of an indicator atom.
    pub fn choice_of(&self, a: AtomId) -> Option<(usize, usize)> {
        if (a as usize) < self.base_len {
            return None;
        }
        self.choice.iter().enumerate().find_map(|(k, ids)| ids.iter().position(|&x| x == a).map(|i| (k, i)))
    }

    pub fn is_choice(&self, a: AtomId) -> bool {
        a as usize >= self.base_len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QueryFn {
    Sum,
    /// Number of targets with a positive value.
    Count,
    Min,
    Max,
    OneMinusSum,
    /// constant + Σ coeffs[i]·target[i].
    Linear { constant: f64, coeffs: Vec<f64> },
}

impl QueryFn {
    pub fn is_monotone(&self) -> bool {
        match self {
            QueryFn::Sum | QueryFn::Count | QueryFn::Min | QueryFn::Max => true,
            QueryFn::OneMinusSum => false,
            QueryFn::Linear { coeffs, .. } => coeffs.iter().all(|c| *c >= 0.0),
        }
    }

    pub fn apply(&self, xs: &[f64]) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::Query("empty target set".into()));
        }
        Ok(match self {
            QueryFn::Sum => xs.iter().sum(),
            QueryFn::Count => xs.iter().filter(|x| **x > EPS_EQ).count() as f64,
            QueryFn::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
            QueryFn::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            QueryFn::OneMinusSum => 1.0 - xs.iter().sum::<f64>(),
            QueryFn::Linear { constant, coeffs } => {
                if coeffs.len() != xs.len() {
                    return Err(Error::Query(format!("linear query has {} coefficients for {} targets", coeffs.len(), xs.len())));
                }
                constant + coeffs.iter().zip(xs).map(|(c, x)| c * x).sum::<f64>()
            }
        })
    }
}

/// An aggregate over target atoms given by name or `*` pattern. Patterns
/// expand in atom index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationQuery {
    pub aggregate: QueryFn,
    pub targets: Vec<String>,
}

impl EstimationQuery {
    pub fn new(aggregate: QueryFn, targets: &[&str]) -> Self {
        EstimationQuery { aggregate, targets: targets.iter().map(|s| s.to_string()).collect() }
    }

    pub fn resolve(&self, index: &AtomIndex) -> Result<Vec<AtomId>> {
        let mut out = Vec::new();
        for t in &self.targets {
            if t.contains('*') || t.contains('?') {
                let g = WildMatch::new(t);
                let hits: Vec<AtomId> = (0..index.len() as AtomId).filter(|&a| g.matches(&index.name(a))).collect();
                if hits.is_empty() {
                    return Err(Error::Query(format!("pattern {t} matches no atom")));
                }
                out.extend(hits);
            } else {
                out.push(index.id_by_name(t)?);
            }
        }
        if out.is_empty() {
            return Err(Error::Query("empty target set".into()));
        }
        Ok(out)
    }
}

/// f applied to the target values in `i`.
pub fn eval_query(q: &EstimationQuery, i: &Interpretation) -> Result<f64> {
    let ids = q.resolve(i.index())?;
    q.aggregate.apply(&ids.iter().map(|&a| i.get(a)).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMethod {
    Naive,
    Monotone,
    Milp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeAnswer {
    /// (glb, lub); `None` when there is no strong equilibrium.
    pub bounds: Option<(f64, f64)>,
    /// False when the bounds only enclose the range.
    pub exact: bool,
    pub method: RangeMethod,
    /// States attaining the lower and upper bound, when known.
    pub witnesses: Option<(State, State)>,
}

impl RangeAnswer {
    fn undefined(method: RangeMethod) -> Self {
        RangeAnswer { bounds: None, exact: true, method, witnesses: None }
    }

    pub fn is_undefined(&self) -> bool {
        self.bounds.is_none()
    }

    pub fn glb(&self) -> Result<f64> {
        self.bounds.map(|b| b.0).ok_or(Error::Undefined)
    }

    pub fn lub(&self) -> Result<f64> {
        self.bounds.map(|b| b.1).ok_or(Error::Undefined)
    }
}

/// Evaluate the query on every strong equilibrium.
pub fn range_naive(gp: &GroundProgram, q: &EstimationQuery, opts: &EnumOptions) -> Result<RangeAnswer> {
    let aug = augment_choice_atoms(gp);
    let targets = q.resolve(&aug.index)?;
    let eqs = enumerate_strong_equilibria(gp, opts)?;
    let vals: Vec<f64> = eqs
        .par_iter()
        .map(|e: &Equilibrium| {
            let i = aug.extend(&e.interp, &e.state)?;
            q.aggregate.apply(&targets.iter().map(|&a| i.get(a)).collect::<Vec<_>>())
        })
        .collect::<Result<_>>()?;
    let Some(lo) = (0..vals.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])) else {
        return Ok(RangeAnswer::undefined(RangeMethod::Naive));
    };
    let hi = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a))).unwrap();
    Ok(RangeAnswer {
        bounds: Some((vals[lo], vals[hi])),
        exact: true,
        method: RangeMethod::Naive,
        witnesses: Some((eqs[lo].state.clone(), eqs[hi].state.clone())),
    })
}

/// Monotone queries over VIC₂ programs, read off the two extremal
/// equilibria. Exact when every target lies on one side of the split,
/// otherwise an enclosing interval from the mixed models.
pub fn range_monotone_vic2(p: &Program, gp: &GroundProgram, q: &EstimationQuery) -> Result<RangeAnswer> {
    if !q.aggregate.is_monotone() {
        return Err(Error::Query("the extremal-model method needs a monotone aggregate".into()));
    }
    if !classify(p).is_vic2() {
        return Err(Error::Query("the extremal-model method needs a VIC program with two choices".into()));
    }
    let aug = augment_choice_atoms(gp);
    let targets = q.resolve(&aug.index)?;
    let ext = extremal_models(p, gp)?;
    let side = |a: AtomId| -> Result<(bool, bool)> {
        let a = match aug.choice_of(a) {
            Some((k, i)) => gp.vc[k].decisions[i],
            None => a,
        };
        match (ext.split.atom_sides[0][a as usize], ext.split.atom_sides[1][a as usize]) {
            (false, false) => Err(Error::Query(format!("atom {} depends on no choice", gp.index.name(a)))),
            s => Ok(s),
        }
    };
    let sides = targets.iter().map(|&a| side(a)).collect::<Result<Vec<_>>>()?;
    // Part i of the program evaluated under states[i]; a choice indicator
    // follows the state its decision's part runs under.
    let eval = |i: &Interpretation, states: [&State; 2]| -> Result<f64> {
        let xs: Vec<f64> = targets
            .iter()
            .map(|&a| match aug.choice_of(a) {
                Some((k, act)) => {
                    let s = states[act];
                    if s.action(k) == act + 1 { 1.0 } else { 0.0 }
                }
                None => i.get(a),
            })
            .collect();
        q.aggregate.apply(&xs)
    };
    let (s12, s21) = (&ext.s12, &ext.s21);
    let (lo, hi, exact) = if sides.iter().all(|s| s.0) {
        (eval(&ext.m21, [s21, s21])?, eval(&ext.m12, [s12, s12])?, true)
    } else if sides.iter().all(|s| s.1) {
        (eval(&ext.m12, [s12, s12])?, eval(&ext.m21, [s21, s21])?, true)
    } else {
        (eval(&ext.mixed_low, [s21, s12])?, eval(&ext.mixed_high, [s12, s21])?, false)
    };
    let witnesses = match (exact, sides.iter().all(|s| s.0)) {
        (false, _) => None,
        (true, true) => Some((s21.clone(), s12.clone())),
        (true, false) => Some((s12.clone(), s21.clone())),
    };
    Ok(RangeAnswer { bounds: Some((lo, hi)), exact, method: RangeMethod::Monotone, witnesses })
}

/// Comparison in an auxiliary query constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxCmp {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxVar {
    pub name: String,
    pub binary: bool,
}

/// Σ target_terms + Σ aux_terms (cmp) rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxConstraint {
    pub target_terms: Vec<(usize, f64)>,
    pub aux_terms: Vec<(usize, f64)>,
    pub cmp: AuxCmp,
    pub rhs: f64,
}

/// k + c₁·x + c₂·y subject to the auxiliary constraints, with x the target
/// values and y auxiliary variables in [0,1].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearQuerySpec {
    pub constant: f64,
    pub target_coeffs: Vec<f64>,
    pub aux: Vec<AuxVar>,
    pub aux_coeffs: Vec<f64>,
    pub constraints: Vec<AuxConstraint>,
}

impl LinearQuerySpec {
    /// The linear form of a built-in aggregate over `n` targets. Min and max
    /// get a selector encoding; with two targets it uses a single binary.
    pub fn from_aggregate(f: &QueryFn, n: usize, targets_are_choices: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Query("empty target set".into()));
        }
        let lin = |constant: f64, c: f64| LinearQuerySpec { constant, target_coeffs: vec![c; n], ..Default::default() };
        Ok(match f {
            QueryFn::Sum => lin(0.0, 1.0),
            QueryFn::OneMinusSum => lin(1.0, -1.0),
            QueryFn::Count if targets_are_choices => lin(0.0, 1.0),
            QueryFn::Count => return Err(Error::Query("count has no linear form over program atoms; use choice atoms".into())),
            QueryFn::Linear { constant, coeffs } => {
                if coeffs.len() != n {
                    return Err(Error::Query(format!("linear query has {} coefficients for {n} targets", coeffs.len())));
                }
                LinearQuerySpec { constant: *constant, target_coeffs: coeffs.clone(), ..Default::default() }
            }
            QueryFn::Min | QueryFn::Max if n == 1 => lin(0.0, 1.0),
            QueryFn::Min => select_encoding(n, true),
            QueryFn::Max => select_encoding(n, false),
        })
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Query(format!("linear query: {m}")));
        if self.target_coeffs.len() != n {
            return bad("one coefficient per target is required");
        }
        if self.aux_coeffs.len() != self.aux.len() {
            return bad("one objective coefficient per auxiliary variable is required");
        }
        for c in &self.constraints {
            if c.target_terms.iter().any(|(i, _)| *i >= n) || c.aux_terms.iter().any(|(i, _)| *i >= self.aux.len()) {
                return bad("constraint refers to an unknown variable");
            }
        }
        Ok(())
    }
}

/// min: m ≤ xᵢ, m ≥ xᵢ − (1 − wᵢ), Σwᵢ = 1. max mirrors it. For two targets
/// w₁ = 1 − s and w₂ = s with one binary s.
fn select_encoding(n: usize, min: bool) -> LinearQuerySpec {
    let sign = if min { 1.0 } else { -1.0 };
    let (cmp_bound, cmp_sel) = if min { (AuxCmp::Le, AuxCmp::Ge) } else { (AuxCmp::Ge, AuxCmp::Le) };
    let mut spec = LinearQuerySpec { target_coeffs: vec![0.0; n], ..Default::default() };
    if n == 2 {
        spec.aux = vec![AuxVar { name: "s".into(), binary: true }, AuxVar { name: "m".into(), binary: false }];
        spec.aux_coeffs = vec![0.0, 1.0];
        for i in 0..2 {
            spec.constraints.push(AuxConstraint { target_terms: vec![(i, -1.0)], aux_terms: vec![(1, 1.0)], cmp: cmp_bound, rhs: 0.0 });
        }
        // m − x₁ + s·sign ≥ 0 and m − x₂ − s·sign ≥ −sign (min case shown with sign = 1).
        spec.constraints.push(AuxConstraint { target_terms: vec![(0, -1.0)], aux_terms: vec![(1, 1.0), (0, sign)], cmp: cmp_sel, rhs: 0.0 });
        spec.constraints.push(AuxConstraint { target_terms: vec![(1, -1.0)], aux_terms: vec![(1, 1.0), (0, -sign)], cmp: cmp_sel, rhs: -sign });
        return spec;
    }
    spec.aux = (0..n).map(|i| AuxVar { name: format!("w{i}"), binary: true }).collect();
    spec.aux.push(AuxVar { name: "m".into(), binary: false });
    spec.aux_coeffs = vec![0.0; n];
    spec.aux_coeffs.push(1.0);
    for i in 0..n {
        spec.constraints.push(AuxConstraint { target_terms: vec![(i, -1.0)], aux_terms: vec![(n, 1.0)], cmp: cmp_bound, rhs: 0.0 });
        spec.constraints.push(AuxConstraint { target_terms: vec![(i, -1.0)], aux_terms: vec![(n, 1.0), (i, -sign)], cmp: cmp_sel, rhs: -sign });
    }
    spec.constraints.push(AuxConstraint { target_terms: vec![], aux_terms: (0..n).map(|i| (i, 1.0)).collect(), cmp: AuxCmp::Eq, rhs: 1.0 });
    spec
}

/// ILC(Π, T̂) with the strong-equilibrium block plus the query's auxiliary
/// constraints and objective. Returns the system and the target variables.
pub fn query_system(gp: &GroundProgram, targets: &[AtomId], aug: &ChoiceAtoms, spec: &LinearQuerySpec, t_hat: usize) -> Result<(ConstraintSystem, LinExpr)> {
    spec.validate(targets.len())?;
    let mut cs = build_ilc(gp, t_hat, true)?;
    let layout = cs.layout.clone().unwrap();
    let tv: Vec<VarId> = targets
        .iter()
        .map(|&a| match aug.choice_of(a) {
            Some((k, i)) => layout.y[k][i],
            None => layout.x[t_hat][a as usize],
        })
        .collect();
    let av: Vec<VarId> = spec.aux.iter().map(|v| if v.binary { cs.binary(&format!("q_{}", v.name)) } else { cs.continuous(&format!("q_{}", v.name), 0.0, 1.0) }).collect::<Result<_>>()?;
    for c in &spec.constraints {
        let mut e = LinExpr::default();
        for &(i, k) in &c.target_terms {
            e.add_term(tv[i], k);
        }
        for &(i, k) in &c.aux_terms {
            e.add_term(av[i], k);
        }
        let cmp = match c.cmp {
            AuxCmp::Ge => Cmp::Ge,
            AuxCmp::Le => Cmp::Le,
            AuxCmp::Eq => Cmp::Eq,
        };
        cs.constrain(&e, cmp, c.rhs);
    }
    let mut obj = LinExpr::constant(spec.constant);
    for (&v, &c) in tv.iter().zip(&spec.target_coeffs) {
        obj.add_term(v, c);
    }
    for (&v, &c) in av.iter().zip(&spec.aux_coeffs) {
        obj.add_term(v, c);
    }
    Ok((cs, obj))
}

/// Minimize and maximize the query over ILC(Π, T̂).
pub fn range_linear_milp(gp: &GroundProgram, q: &EstimationQuery, spec: Option<&LinearQuerySpec>, t_hat: Option<usize>, opts: SolveOptions) -> Result<RangeAnswer> {
    let aug = augment_choice_atoms(gp);
    let targets = q.resolve(&aug.index)?;
    let built;
    let spec = match spec {
        Some(s) => s,
        None => {
            built = LinearQuerySpec::from_aggregate(&q.aggregate, targets.len(), targets.iter().all(|&a| aug.is_choice(a)))?;
            &built
        }
    };
    let t_hat = match t_hat {
        Some(t) => t,
        None => compute_t_hat_with(gp, THatOptions { solve: opts, ..Default::default() })?,
    };
    let (mut cs, obj) = query_system(gp, &targets, &aug, spec, t_hat)?;
    let layout = cs.layout.clone().unwrap();
    let state_of = |vals: &[f64]| State(layout.y.iter().map(|ys| ys.iter().position(|&y| vals[y] > 0.5).map_or(1, |i| i + 1)).collect());
    cs.set_objective(Sense::Minimize, obj.clone());
    let lo = solve_with(&cs, Sense::Minimize, opts)?;
    if !lo.is_feasible() {
        return Ok(RangeAnswer::undefined(RangeMethod::Milp));
    }
    cs.set_objective(Sense::Maximize, obj);
    let hi = solve_with(&cs, Sense::Maximize, opts)?;
    Ok(RangeAnswer {
        bounds: Some((lo.objective.unwrap(), hi.objective.unwrap())),
        exact: true,
        method: RangeMethod::Milp,
        witnesses: Some((state_of(&lo.values), state_of(&hi.values))),
    })
}
