//! Mixed-integer linear encodings of strong equilibria: the constraint
//! system over an unrolled fixpoint, its internal solver, the iteration bound
//! search, cut-based enumeration and LP-file export.

mod build;
mod enumerate;
mod export;
mod solve;

pub use build::{build_ilc, emulate, IlcLayout, EPS_MILP};
pub use enumerate::{add_nogood_cut, compute_t_hat, compute_t_hat_with, enumerate_se_milp, MilpEquilibrium, THatOptions};
pub use export::export_lp;
pub use solve::{solve, solve_with, SolveOptions};

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type VarId = usize;

/// Slack accepted when checking a candidate assignment against a constraint.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Ge,
    Le,
    Eq,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
        }
    }
}

/// Σ coeff·var + constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) -> &mut Self {
        self.terms.push((v, c));
        self
    }

    pub fn add_scaled(&mut self, other: &LinExpr, k: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|(v, c)| (*v, c * k)));
        self.constant += other.constant * k;
        self
    }

    /// Merges repeated variables and drops zero coefficients, keeping first-seen order.
    pub fn normalized(&self) -> LinExpr {
        let mut order = Vec::new();
        let mut acc: HashMap<VarId, f64> = HashMap::new();
        for (v, c) in &self.terms {
            if !acc.contains_key(v) {
                order.push(*v);
            }
            *acc.entry(*v).or_default() += c;
        }
        let terms = order.into_iter().map(|v| (v, acc[&v])).filter(|(_, c)| *c != 0.0).collect();
        LinExpr { terms, constant: self.constant }
    }

    pub fn eval(&self, vals: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * vals[*v]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    /// Whether `vals` satisfies the constraint within `tol`.
    pub fn holds(&self, vals: &[f64], tol: f64) -> bool {
        let lhs: f64 = self.terms.iter().map(|(v, c)| c * vals[*v]).sum();
        match self.cmp {
            Cmp::Ge => lhs >= self.rhs - tol,
            Cmp::Le => lhs <= self.rhs + tol,
            Cmp::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: Sense,
    pub expr: LinExpr,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintSystem {
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<Objective>,
    names: HashMap<String, VarId>,
    /// Fixpoint-unrolling structure, when the system was built from a program.
    pub layout: Option<Arc<IlcLayout>>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_var(&mut self, name: String, kind: VarKind, lb: f64, ub: f64) -> Result<VarId> {
        if self.names.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate variable {name}")));
        }
        let id = self.vars.len();
        self.names.insert(name.clone(), id);
        self.vars.push(Variable { name, kind, lb, ub });
        Ok(id)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> Result<VarId> {
        self.add_var(name.into(), VarKind::Continuous, lb, ub)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    /// Adds `expr cmp rhs`, moving the expression's constant to the right-hand side.
    pub fn constrain(&mut self, expr: &LinExpr, cmp: Cmp, rhs: f64) -> usize {
        let e = expr.normalized();
        let name = format!("c{}", self.constraints.len() + 1);
        self.constraints.push(Constraint { name, terms: e.terms, cmp, rhs: rhs - e.constant });
        self.constraints.len() - 1
    }

    /// `Σ terms cmp rhs` with integer-friendly construction.
    pub fn constrain_terms(&mut self, terms: &[(VarId, f64)], cmp: Cmp, rhs: f64) -> usize {
        self.constrain(&LinExpr { terms: terms.to_vec(), constant: 0.0 }, cmp, rhs)
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        self.objective = Some(Objective { sense, expr: expr.normalized() });
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len()).filter(|&v| self.vars[v].kind == VarKind::Binary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// One value per variable; empty when infeasible.
    pub values: Vec<f64>,
    pub objective: Option<f64>,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, cs: &ConstraintSystem, name: &str) -> Option<f64> {
        cs.var_id(name).and_then(|v| self.values.get(v).copied())
    }
}
