use super::{build_ilc, solve_with, Cmp, ConstraintSystem, LinExpr, Sense, Solution, SolveOptions, FEAS_TOL};
use crate::error::{Error, Result};
use crate::game::State;
use crate::ground::GroundProgram;
use crate::interp::Interpretation;

#[derive(Debug, Clone, Copy)]
pub struct THatOptions {
    pub delta: usize,
    /// Largest T̄ tried; `None` means 10·|atoms|.
    pub cap: Option<usize>,
    pub solve: SolveOptions,
}

impl Default for THatOptions {
    fn default() -> Self {
        THatOptions { delta: 1, cap: None, solve: SolveOptions::default() }
    }
}

pub fn compute_t_hat(gp: &GroundProgram, delta: usize) -> Result<usize> {
    compute_t_hat_with(gp, THatOptions { delta, ..Default::default() })
}

/// Smallest T̄ whose oracle reports no change between the last two unrolled
/// steps under any choice: δ-stepping, then binary search.
pub fn compute_t_hat_with(gp: &GroundProgram, opts: THatOptions) -> Result<usize> {
    if opts.delta == 0 {
        return Err(Error::Invalid("δ must be at least 1".into()));
    }
    let cap = opts.cap.unwrap_or(10 * gp.atom_count()).max(1);
    let oracle = |t: usize| -> Result<bool> {
        let mut cs = build_ilc(gp, t, false)?;
        let l = cs.layout.clone().unwrap();
        let mut obj = LinExpr::default();
        for (&now, &before) in l.x[t].iter().zip(&l.x[t - 1]) {
            obj.add_term(now, 1.0).add_term(before, -1.0);
        }
        cs.set_objective(Sense::Maximize, obj);
        let sol = solve_with(&cs, Sense::Maximize, opts.solve)?;
        Ok(sol.objective.map_or(true, |o| o <= FEAS_TOL))
    };
    let mut hi = opts.delta;
    loop {
        if hi > cap {
            return Err(Error::NonFinitary(cap));
        }
        if oracle(hi)? {
            break;
        }
        hi += opts.delta;
    }
    let mut lo = hi - opts.delta;
    let mut t = (lo + hi) / 2;
    while lo + 1 < hi {
        if oracle(t)? {
            hi = t;
        } else {
            lo = t;
        }
        t = (lo + hi) / 2;
    }
    Ok(hi)
}

/// Σ y(1−k) + Σ (1−y)k ≥ 1 over the choice binaries of `sol`; returns the
/// constraint index.
pub fn add_nogood_cut(cs: &mut ConstraintSystem, sol: &Solution) -> Result<usize> {
    let layout = cs.layout.clone().ok_or_else(|| Error::Invalid("constraint system has no choice variables".into()))?;
    let mut terms = Vec::new();
    let mut ones = 0.0;
    for &y in layout.y.iter().flatten() {
        if sol.values[y] > 0.5 {
            terms.push((y, -1.0));
            ones += 1.0;
        } else {
            terms.push((y, 1.0));
        }
    }
    Ok(cs.constrain_terms(&terms, Cmp::Ge, 1.0 - ones))
}

#[derive(Debug, Clone)]
pub struct MilpEquilibrium {
    pub state: State,
    /// x^T̂ as an interpretation.
    pub interp: Interpretation,
    pub solution: Solution,
}

/// Repeatedly solve ILC(Π, T̂) with Type 4 and cut off each found choice
/// vector until the system becomes infeasible.
pub fn enumerate_se_milp(gp: &GroundProgram, t_hat: Option<usize>, opts: SolveOptions) -> Result<Vec<MilpEquilibrium>> {
    let t_hat = match t_hat {
        Some(t) => t,
        None => compute_t_hat_with(gp, THatOptions { solve: opts, ..Default::default() })?,
    };
    let mut cs = build_ilc(gp, t_hat, true)?;
    let layout = cs.layout.clone().unwrap();
    let mut out = Vec::new();
    loop {
        let sol = solve_with(&cs, Sense::Feasibility, opts)?;
        if !sol.is_feasible() {
            return Ok(out);
        }
        let state = State(layout.y.iter().map(|ys| ys.iter().position(|&y| sol.values[y] > 0.5).map_or(1, |i| i + 1)).collect());
        let interp = Interpretation::from_values(gp.index.clone(), layout.final_values(&sol.values))?;
        add_nogood_cut(&mut cs, &sol)?;
        out.push(MilpEquilibrium { state, interp, solution: sol });
    }
}
