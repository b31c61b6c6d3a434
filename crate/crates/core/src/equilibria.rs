//! Exhaustive enumeration of coherent models and strong equilibria over all
//! choice vectors, in lexicographic order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{induced_model, State};
use crate::ground::GroundProgram;
use crate::interp::{satisfies_vc, Interpretation};
use crate::semantics::sum_equals_max;

pub const DEFAULT_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy)]
pub struct EnumOptions {
    /// Largest number of choice vectors to visit.
    pub cap: u64,
    /// Stop after this many results.
    pub limit: Option<usize>,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { cap: DEFAULT_CAP, limit: None }
    }
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub state: State,
    pub interp: Interpretation,
}

/// Number of choice vectors, checked against the cap.
pub fn state_count(gp: &GroundProgram, cap: u64) -> Result<u64> {
    let needed = (gp.arity() as f64).powi(gp.vc.len() as i32);
    if needed > cap as f64 {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(needed as u64)
}

fn scan(gp: &GroundProgram, opts: &EnumOptions, strong: bool) -> Result<Vec<Equilibrium>> {
    let total = state_count(gp, opts.cap)?;
    let (n, m) = (gp.vc.len(), gp.arity());
    let found: Vec<Option<Equilibrium>> = (0..total)
        .into_par_iter()
        .map(|code| {
            let state = State::from_code(code, n, m);
            let interp = induced_model(gp, &state)?;
            let keep = gp.vc.iter().all(|vc| satisfies_vc(&interp, vc)) && (!strong || sum_equals_max(gp, &interp));
            Ok(keep.then_some(Equilibrium { state, interp }))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Equilibrium> = found.into_iter().flatten().collect();
    if let Some(l) = opts.limit {
        out.truncate(l);
    }
    Ok(out)
}

/// Interpretation values quantized to 1e-9, for duplicate detection.
pub fn value_key(i: &Interpretation) -> Vec<i64> {
    i.values().iter().map(|v| (v * 1e9).round() as i64).collect()
}

/// Minimal models of the induced programs that satisfy every VC instance, one
/// per choice vector. Two vectors induce the same values only when they differ
/// at vertices whose utilities are all zero; those stay separate entries since
/// their choice indicators differ.
pub fn enumerate_coherent(gp: &GroundProgram, opts: &EnumOptions) -> Result<Vec<Equilibrium>> {
    scan(gp, opts, false)
}

/// Coherent models whose choices are utility-maximal at every vertex.
pub fn enumerate_strong_equilibria(gp: &GroundProgram, opts: &EnumOptions) -> Result<Vec<Equilibrium>> {
    scan(gp, opts, true)
}
