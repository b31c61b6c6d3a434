//! Fixpoint evaluation, the coherence transform and the model checks built on it.

use crate::error::{Error, Result};
use crate::function::EPS_EQ;
use crate::ground::{AtomId, GroundProgram, GroundRule};
use crate::interp::{check_index, is_model, satisfies_atom, Interpretation};
use crate::model::Program;

/// Convergence threshold on the largest per-atom change.
pub const EPS_FIX: f64 = 1e-9;

/// Changes below this do not re-schedule dependent atoms.
const PUSH_EPS: f64 = 1e-13;

/// Kleene rounds before the first policy step.
const POLICY_AFTER: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct FixpointOptions {
    pub eps: f64,
    /// Round cap; `None` means 10·|atoms| + 100.
    pub max_iters: Option<usize>,
    /// Interleave policy steps with the Kleene rounds when iteration is slow.
    pub accelerate: bool,
}

impl Default for FixpointOptions {
    fn default() -> Self {
        FixpointOptions { eps: EPS_FIX, max_iters: None, accelerate: true }
    }
}

#[derive(Debug, Clone)]
pub struct FixpointReport {
    pub result: Interpretation,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

impl FixpointReport {
    /// The model, or a non-convergence error.
    pub fn into_model(self) -> Result<Interpretation> {
        if self.converged {
            Ok(self.result)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations, residual: self.residual })
        }
    }
}

/// Identity rules `head:M <- src:M` attached on top of a program's own rules,
/// stored in both directions as compressed adjacency.
pub(crate) struct Bridges {
    out_start: Vec<u32>,
    out: Vec<AtomId>,
    in_start: Vec<u32>,
    inn: Vec<AtomId>,
}

impl Bridges {
    /// `pairs` holds (head, src).
    pub(crate) fn new(n: usize, pairs: &[(AtomId, AtomId)]) -> Self {
        let csr = |key: &dyn Fn(&(AtomId, AtomId)) -> AtomId, val: &dyn Fn(&(AtomId, AtomId)) -> AtomId| {
            let mut start = vec![0u32; n + 1];
            for p in pairs {
                start[key(p) as usize + 1] += 1;
            }
            for i in 0..n {
                start[i + 1] += start[i];
            }
            let mut fill = start.clone();
            let mut items = vec![0; pairs.len()];
            for p in pairs {
                let k = key(p) as usize;
                items[fill[k] as usize] = val(p);
                fill[k] += 1;
            }
            (start, items)
        };
        let (out_start, out) = csr(&|p| p.1, &|p| p.0);
        let (in_start, inn) = csr(&|p| p.0, &|p| p.1);
        Bridges { out_start, out, in_start, inn }
    }

    fn empty(n: usize) -> Self {
        Bridges::new(n, &[])
    }

    fn targets(&self, a: AtomId) -> &[AtomId] {
        &self.out[self.out_start[a as usize] as usize..self.out_start[a as usize + 1] as usize]
    }

    pub(crate) fn sources(&self, a: AtomId) -> &[AtomId] {
        &self.inn[self.in_start[a as usize] as usize..self.in_start[a as usize + 1] as usize]
    }
}

/// T(I)(A): max over applicable rules for A (and bridges into A), else 0.
fn eval_atom(gp: &GroundProgram, br: &Bridges, a: AtomId, vals: &[f64], buf: &mut Vec<f64>) -> f64 {
    let mut best = 0.0f64;
    for &r in gp.rules_for(a) {
        if let Some(v) = gp.rule_value_buf(&gp.rules[r as usize], vals, buf) {
            best = best.max(v);
        }
    }
    for &s in br.sources(a) {
        best = best.max(vals[s as usize]);
    }
    best.clamp(0.0, 1.0)
}

/// One application of the immediate-consequence operator. Only GAP rules are
/// applied; VC instances are ignored.
pub fn tp_step(gp: &GroundProgram, i: &Interpretation) -> Result<Interpretation> {
    check_index(gp, i)?;
    let br = Bridges::empty(gp.atom_count());
    let mut buf = Vec::new();
    let values = (0..gp.atom_count() as AtomId).map(|a| eval_atom(gp, &br, a, i.values(), &mut buf)).collect();
    Ok(Interpretation::from_raw(gp.index.clone(), values))
}

/// Least fixpoint of the GAP rules of `gp` (VC instances are ignored).
pub fn minimal_model(gp: &GroundProgram) -> FixpointReport {
    minimal_model_with(gp, FixpointOptions::default())
}

pub fn minimal_model_with(gp: &GroundProgram, opts: FixpointOptions) -> FixpointReport {
    fixpoint(gp, &Bridges::empty(gp.atom_count()), opts)
}

/// Least fixpoint of `gp`'s GAP rules plus the identity rules `pairs` (head, src).
pub fn minimal_model_bridged(gp: &GroundProgram, pairs: &[(AtomId, AtomId)]) -> FixpointReport {
    fixpoint(gp, &Bridges::new(gp.atom_count(), pairs), FixpointOptions::default())
}

fn fixpoint(gp: &GroundProgram, br: &Bridges, opts: FixpointOptions) -> FixpointReport {
    let n = gp.atom_count();
    let cap = opts.max_iters.unwrap_or(10 * n + 100);
    let mut vals = vec![0.0f64; n];
    let mut queued = vec![false; n];
    let mut buf = Vec::new();
    let active: Vec<AtomId> = (0..n as AtomId).filter(|&a| !gp.rules_for(a).is_empty() || !br.sources(a).is_empty()).collect();
    let mut current = active.clone();
    current.iter().for_each(|&a| queued[a as usize] = true);
    let accelerate = opts.accelerate && crate::policy::applicable(gp);
    let (mut next_step, mut gap) = (POLICY_AFTER, POLICY_AFTER);
    let mut rounds = 0;
    let mut residual;
    loop {
        while !current.is_empty() && rounds < cap {
            if accelerate && rounds >= next_step {
                if crate::policy::policy_step(gp, br, &mut vals) > PUSH_EPS {
                    active.iter().for_each(|&a| queued[a as usize] = true);
                    current = active.clone();
                } else {
                    gap *= 2;
                }
                next_step = rounds + gap;
            }
            rounds += 1;
            let mut next = Vec::new();
            for &a in &current {
                queued[a as usize] = false;
                let new = eval_atom(gp, br, a, &vals, &mut buf);
                let delta = new - vals[a as usize];
                if delta == 0.0 {
                    continue;
                }
                vals[a as usize] = new;
                if delta.abs() <= PUSH_EPS {
                    continue;
                }
                let mut push = |h: AtomId| {
                    if !queued[h as usize] {
                        queued[h as usize] = true;
                        next.push(h);
                    }
                };
                for &r in gp.readers(a) {
                    push(gp.rules[r as usize].head);
                }
                for &h in br.targets(a) {
                    push(h);
                }
            }
            current = next;
        }
        // Verify with a full sweep and re-seed anything still moving.
        residual = 0.0;
        let mut stale = Vec::new();
        for a in 0..n as AtomId {
            let d = (eval_atom(gp, br, a, &vals, &mut buf) - vals[a as usize]).abs();
            residual = f64::max(residual, d);
            if d > PUSH_EPS {
                stale.push(a);
            }
        }
        if stale.is_empty() || rounds >= cap {
            break;
        }
        stale.iter().for_each(|&a| queued[a as usize] = true);
        current = stale;
    }
    FixpointReport {
        result: Interpretation::from_raw(gp.index.clone(), vals),
        iterations: rounds,
        converged: residual <= opts.eps && rounds < cap,
        residual,
    }
}

/// Bridge pairs (decision, utility) of coh(Π, I): matched positive pairs.
pub fn coherence_bridges(gp: &GroundProgram, i: &Interpretation) -> Vec<(AtomId, AtomId)> {
    let mut out = Vec::new();
    for vc in &gp.vc {
        for (&b, &a) in vc.decisions.iter().zip(&vc.utilities) {
            if i.get(a) > EPS_EQ && (i.get(a) - i.get(b)).abs() <= EPS_EQ {
                out.push((b, a));
            }
        }
    }
    out
}

/// coh(Π, I): the GAP rules plus one bridge rule per matched positive pair.
pub fn coherence_transform(gp: &GroundProgram, i: &Interpretation) -> Result<GroundProgram> {
    check_index(gp, i)?;
    let mut rules = gp.rules.clone();
    rules.extend(coherence_bridges(gp, i).into_iter().map(|(b, a)| GroundRule::bridge(b, a)));
    Ok(gp.with_rules(rules, Vec::new()))
}

/// Whether I = MM(coh(Π, I)). Errors with `NotAModel` when I is not a model.
pub fn is_coherent_model(gp: &GroundProgram, i: &Interpretation) -> Result<bool> {
    if !is_model(gp, i)? {
        return Err(Error::NotAModel);
    }
    let mm = minimal_model_bridged(gp, &coherence_bridges(gp, i)).into_model()?;
    Ok(mm.approx_eq(i, EPS_EQ))
}

/// Σ I(Bᵢ(v)) = max I(Aⱼ(v)) at every vertex.
pub fn sum_equals_max(gp: &GroundProgram, i: &Interpretation) -> bool {
    gp.vc.iter().all(|vc| {
        let sum: f64 = vc.decisions.iter().map(|&b| i.get(b)).sum();
        let max = vc.utilities.iter().map(|&a| i.get(a)).fold(0.0, f64::max);
        (sum - max).abs() <= EPS_EQ
    })
}

/// Coherent model whose choices take a maximal utility at every vertex.
pub fn is_strong_equilibrium(gp: &GroundProgram, i: &Interpretation) -> Result<bool> {
    match is_coherent_model(gp, i) {
        Ok(c) => Ok(c && sum_equals_max(gp, i)),
        Err(Error::NotAModel) => Ok(false),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntailMethod {
    Enumerate,
    Vic2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entailment {
    pub holds: bool,
    /// True when no strong equilibrium exists, so `holds` is vacuous.
    pub vacuous: bool,
}

/// Whether every strong equilibrium satisfies `atom:mu`.
pub fn entails(p: &Program, gp: &GroundProgram, atom: AtomId, mu: f64, method: EntailMethod) -> Result<Entailment> {
    match method {
        EntailMethod::Enumerate => {
            let eqs = crate::equilibria::enumerate_strong_equilibria(gp, &Default::default())?;
            Ok(Entailment { holds: eqs.iter().all(|e| satisfies_atom(&e.interp, atom, mu)), vacuous: eqs.is_empty() })
        }
        EntailMethod::Vic2 => crate::vic::entails_vic2(p, gp, atom, mu),
    }
}
