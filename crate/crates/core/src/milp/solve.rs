use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;

use super::{Cmp, ConstraintSystem, Constraint, LinExpr, Sense, Solution, Status, VarId, VarKind, FEAS_TOL};
use crate::equilibria::DEFAULT_CAP;
use crate::error::{Error, Result};
use crate::game::State;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Largest number of choice assignments to branch over.
    pub leaf_cap: u64,
    /// Largest number of branch-and-bound nodes per leaf.
    pub binary_cap: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { leaf_cap: DEFAULT_CAP, binary_cap: 1 << 16 }
    }
}

pub fn solve(cs: &ConstraintSystem, sense: Sense) -> Result<Solution> {
    solve_with(cs, sense, SolveOptions::default())
}

/// Exact solve: branch over the choice binaries, forward-propagate the
/// fixpoint variables, then settle any remaining variables by branch and
/// bound over their binaries with LP relaxations.
pub fn solve_with(cs: &ConstraintSystem, sense: Sense, opts: SolveOptions) -> Result<Solution> {
    let n = cs.vars.len();
    let objective = match (&cs.objective, sense) {
        (_, Sense::Feasibility) | (None, _) => LinExpr::default(),
        (Some(o), _) => o.expr.clone(),
    };
    let Some(layout) = cs.layout.as_ref() else {
        let free: Vec<VarId> = (0..n).collect();
        let cons: Vec<&Constraint> = cs.constraints.iter().collect();
        let mut vals = vec![0.0; n];
        return Ok(match settle(cs, &free, &cons, &objective, sense, &mut vals, opts)? {
            Some(obj) => Solution { status: Status::Optimal, values: vals, objective: (sense != Sense::Feasibility).then_some(obj) },
            None => infeasible(),
        });
    };

    let mut is_y = vec![false; n];
    for &y in layout.y.iter().flatten() {
        is_y[y] = true;
    }
    let (mut y_only, mut fixed, mut open) = (Vec::new(), Vec::new(), Vec::new());
    for c in &cs.constraints {
        if c.terms.iter().all(|(v, _)| is_y[*v]) {
            y_only.push(c);
        } else if c.terms.iter().all(|(v, _)| layout.owns(*v)) {
            fixed.push(c);
        } else {
            open.push(c);
        }
    }
    let free: Vec<VarId> = (layout.owned..n).collect();
    let m = layout.gp.arity();
    let k = layout.y.len();
    let leaves = (m as f64).powi(k as i32);
    if leaves > opts.leaf_cap as f64 {
        return Err(Error::CapExceeded { needed: leaves, cap: opts.leaf_cap });
    }
    let leaves = leaves as u64;

    let leaf = |code: u64| -> Result<Option<(f64, Vec<f64>)>> {
        let state = State::from_code(code, k, m);
        let mut vals = vec![0.0; n];
        for (kk, ys) in layout.y.iter().enumerate() {
            for (i, &y) in ys.iter().enumerate() {
                vals[y] = if state.action(kk) == i + 1 { 1.0 } else { 0.0 };
            }
        }
        if !y_only.iter().all(|c| c.holds(&vals, FEAS_TOL)) {
            return Ok(None);
        }
        layout.propagate(&state, &mut vals);
        if !fixed.iter().all(|c| c.holds(&vals, FEAS_TOL)) {
            return Ok(None);
        }
        Ok(settle(cs, &free, &open, &objective, sense, &mut vals, opts)?.map(|o| (o, vals)))
    };

    let best = if sense == Sense::Feasibility {
        let hits: Vec<Result<Option<(f64, Vec<f64>)>>> = (0..leaves).into_par_iter().map(leaf).filter(|r| !matches!(r, Ok(None))).collect();
        hits.into_iter().next().transpose()?.flatten()
    } else {
        let all: Vec<Option<(f64, Vec<f64>)>> = (0..leaves).into_par_iter().map(leaf).collect::<Result<_>>()?;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (o, v) in all.into_iter().flatten() {
            let better = match &best {
                None => true,
                Some((b, _)) => match sense {
                    Sense::Maximize => o > *b + 1e-12,
                    _ => o < *b - 1e-12,
                },
            };
            if better {
                best = Some((o, v));
            }
        }
        best
    };
    Ok(match best {
        Some((o, values)) => Solution { status: Status::Optimal, values, objective: (sense != Sense::Feasibility).then_some(o) },
        None => infeasible(),
    })
}

fn infeasible() -> Solution {
    Solution { status: Status::Infeasible, values: Vec::new(), objective: None }
}

/// Assigns `free` given the values already in `vals`; returns the objective
/// value of the best completion, or `None` when none is feasible. Binaries
/// are settled by depth-first branch and bound over the LP relaxation.
fn settle(cs: &ConstraintSystem, free: &[VarId], cons: &[&Constraint], objective: &LinExpr, sense: Sense, vals: &mut [f64], opts: SolveOptions) -> Result<Option<f64>> {
    if free.is_empty() {
        return Ok(cons.iter().all(|c| c.holds(vals, FEAS_TOL)).then(|| objective.eval(vals)));
    }
    let mut bb = Branching { cs, free, cons, objective, sense, nodes: 0, cap: opts.binary_cap, best: None };
    let mut fixed = vec![None; cs.vars.len()];
    bb.node(&mut fixed, vals)?;
    Ok(bb.best.map(|(o, full)| {
        vals.copy_from_slice(&full);
        o
    }))
}

struct Branching<'a> {
    cs: &'a ConstraintSystem,
    free: &'a [VarId],
    cons: &'a [&'a Constraint],
    objective: &'a LinExpr,
    sense: Sense,
    nodes: u64,
    cap: u64,
    best: Option<(f64, Vec<f64>)>,
}

impl Branching<'_> {
    fn improves(&self, o: f64) -> bool {
        match (&self.best, self.sense) {
            (None, _) => true,
            (Some(_), Sense::Feasibility) => false,
            (Some((b, _)), Sense::Maximize) => o > *b + 1e-12,
            (Some((b, _)), Sense::Minimize) => o < *b - 1e-12,
        }
    }

    fn node(&mut self, fixed: &mut Vec<Option<f64>>, vals: &[f64]) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::CapExceeded { needed: self.nodes as f64, cap: self.cap });
        }
        if self.best.is_some() && self.sense == Sense::Feasibility {
            return Ok(());
        }
        let mut base = vals.to_vec();
        let mut slot = vec![usize::MAX; self.cs.vars.len()];
        let mut open = Vec::new();
        for &v in self.free {
            match fixed[v] {
                Some(x) => base[v] = x,
                None => {
                    slot[v] = open.len();
                    open.push(v);
                }
            }
        }
        let relaxed = if open.is_empty() {
            self.cons.iter().all(|c| c.holds(&base, FEAS_TOL)).then(|| (self.objective.eval(&base), Vec::new()))
        } else {
            lp(self.cs, &open, &slot, self.cons, self.objective, self.sense, &base)
        };
        let Some((bound, xs)) = relaxed else { return Ok(()) };
        if !self.improves(bound) {
            return Ok(());
        }
        for (&v, &x) in open.iter().zip(&xs) {
            base[v] = x;
        }
        let frac = open
            .iter()
            .copied()
            .filter(|&v| self.cs.vars[v].kind == VarKind::Binary)
            .map(|v| (v, (base[v] - base[v].round()).abs()))
            .filter(|(_, d)| *d > 1e-7)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match frac {
            None => {
                for &v in &open {
                    if self.cs.vars[v].kind == VarKind::Binary {
                        base[v] = base[v].round();
                    }
                }
                if self.cons.iter().all(|c| c.holds(&base, FEAS_TOL)) {
                    let o = self.objective.eval(&base);
                    if self.improves(o) {
                        self.best = Some((o, base));
                    }
                    return Ok(());
                }
                // Rounding broke a constraint: branch on the first open binary.
                let Some(v) = open.iter().copied().find(|&v| self.cs.vars[v].kind == VarKind::Binary) else { return Ok(()) };
                self.branch(v, 0.5, fixed, vals)
            }
            Some((v, _)) => self.branch(v, base[v], fixed, vals),
        }
    }

    fn branch(&mut self, v: VarId, hint: f64, fixed: &mut Vec<Option<f64>>, vals: &[f64]) -> Result<()> {
        let order = if hint >= 0.5 { [1.0, 0.0] } else { [0.0, 1.0] };
        for x in order {
            fixed[v] = Some(x);
            self.node(fixed, vals)?;
        }
        fixed[v] = None;
        Ok(())
    }
}

fn lp(cs: &ConstraintSystem, conts: &[VarId], slot: &[usize], cons: &[&Constraint], objective: &LinExpr, sense: Sense, vals: &[f64]) -> Option<(f64, Vec<f64>)> {
    let dir = if sense == Sense::Maximize { OptimizationDirection::Maximize } else { OptimizationDirection::Minimize };
    let mut p = Problem::new(dir);
    let mut obj = vec![0.0; conts.len()];
    let mut known = objective.constant;
    for (v, c) in &objective.terms {
        if slot[*v] != usize::MAX {
            obj[slot[*v]] += c;
        } else {
            known += c * vals[*v];
        }
    }
    let lpvars: Vec<minilp::Variable> = conts.iter().zip(&obj).map(|(&v, &c)| p.add_var(c, (cs.vars[v].lb, cs.vars[v].ub))).collect();
    for c in cons {
        let mut terms = Vec::new();
        let mut rhs = c.rhs;
        for (v, k) in &c.terms {
            if slot[*v] != usize::MAX {
                terms.push((lpvars[slot[*v]], *k));
            } else {
                rhs -= k * vals[*v];
            }
        }
        if terms.is_empty() {
            let ok = match c.cmp {
                Cmp::Ge => 0.0 >= rhs - FEAS_TOL,
                Cmp::Le => 0.0 <= rhs + FEAS_TOL,
                Cmp::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return None;
            }
            continue;
        }
        let op = match c.cmp {
            Cmp::Ge => ComparisonOp::Ge,
            Cmp::Le => ComparisonOp::Le,
            Cmp::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(&terms[..], op, rhs);
    }
    let sol = p.solve().ok()?;
    let xs: Vec<f64> = lpvars.iter().map(|v| *sol.var_value(*v)).collect();
    Some((sol.objective() + known, xs))
}
