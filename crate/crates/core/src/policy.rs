//! Policy steps that speed up slow Kleene iteration.
//!
//! At a point x with x ≤ T(x), every atom keeps its best rule at x and that
//! rule is replaced by an affine lower bound valid on [x, 1]. The limit of the
//! resulting affine map started at x is computed by solving one sparse linear
//! system per strongly connected component. That limit lies between x and the
//! least fixpoint, so Kleene iteration can resume from it.

use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};

use crate::function::{FnKind, EPS_EQ};
use crate::ground::{AtomId, GroundProgram, HeadExpr};
use crate::semantics::Bridges;

/// Row-sum slack below which a component counts as closed.
const CLOSED_TOL: f64 = 1e-12;
const SOLVE_TOL: f64 = 1e-14;
const SOLVE_ITERS: usize = 5000;

/// Affine rows `x_a = consts[a] + Σ w·x_j`, stored as CSR.
struct Affine {
    consts: Vec<f64>,
    start: Vec<usize>,
    cols: Vec<AtomId>,
    weights: Vec<f64>,
}

impl Affine {
    fn row(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.start[a]..self.start[a + 1];
        self.cols[r.clone()].iter().map(|&j| j as usize).zip(self.weights[r].iter().copied())
    }
}

/// Whether the acceleration is sound for `gp`: every function must be monotone.
pub(crate) fn applicable(gp: &GroundProgram) -> bool {
    gp.functions.iter().all(|f| f.is_monotone())
}

/// Raises `vals` toward the least fixpoint. Returns the largest increase.
pub(crate) fn policy_step(gp: &GroundProgram, br: &Bridges, vals: &mut [f64]) -> f64 {
    let aff = linearize(gp, br, vals);
    let z = solve(&aff, vals);
    let mut gain = 0.0f64;
    for (v, z) in vals.iter_mut().zip(z) {
        if z.is_finite() && z > *v {
            let z = z.min(1.0);
            gain = gain.max(z - *v);
            *v = z;
        }
    }
    gain
}

fn linearize(gp: &GroundProgram, br: &Bridges, vals: &[f64]) -> Affine {
    let n = vals.len();
    let mut aff = Affine { consts: vec![0.0; n], start: Vec::with_capacity(n + 1), cols: Vec::new(), weights: Vec::new() };
    let mut buf = Vec::new();
    let mut terms = Vec::new();
    aff.start.push(0);
    for a in 0..n {
        // Best rule at x; bridges are identity rules.
        let mut best: Option<(f64, Option<usize>, AtomId)> = None;
        for &r in gp.rules_for(a as AtomId) {
            if let Some(v) = gp.rule_value_buf(&gp.rules[r as usize], vals, &mut buf) {
                if best.map_or(true, |b| v > b.0) {
                    best = Some((v, Some(r as usize), 0));
                }
            }
        }
        for &s in br.sources(a as AtomId) {
            let v = vals[s as usize];
            if best.map_or(true, |b| v > b.0) {
                best = Some((v, None, s));
            }
        }
        match best {
            Some((v, _, _)) if v >= 1.0 => aff.consts[a] = 1.0,
            Some((_, Some(r), _)) => {
                let rule = &gp.rules[r];
                let args: Vec<f64> = rule.body.iter().map(|&b| vals[b as usize]).collect();
                terms.clear();
                aff.consts[a] = lin(gp, &rule.expr, &rule.body, &args, 1.0, &mut terms);
                for &(j, w) in &terms {
                    if w > 0.0 {
                        aff.cols.push(j);
                        aff.weights.push(w);
                    }
                }
            }
            Some((_, None, s)) => {
                aff.cols.push(s);
                aff.weights.push(1.0);
            }
            None => {}
        }
        aff.start.push(aff.cols.len());
    }
    aff
}

/// Adds `scale·L` to `out` for an affine L with L ≤ e on [x, 1] and L(x) = e(x).
/// Returns the constant part.
fn lin(gp: &GroundProgram, e: &HeadExpr, body: &[AtomId], args: &[f64], scale: f64, out: &mut Vec<(AtomId, f64)>) -> f64 {
    match e {
        HeadExpr::Const(c) => scale * c,
        HeadExpr::Arg(k) => {
            out.push((body[*k], scale));
            0.0
        }
        HeadExpr::Apply(f, es) => {
            let f = gp.functions.get(*f);
            let xs: Vec<f64> = es.iter().map(|e| e.eval(&gp.functions, args)).collect();
            let pick = |out: &mut Vec<(AtomId, f64)>| match xs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
                Some((i, _)) => lin(gp, &es[i], body, args, scale, out),
                None => 0.0,
            };
            match &f.kind {
                FnKind::Linear { coeffs } => es.iter().zip(coeffs).map(|(e, c)| lin(gp, e, body, args, scale * c, out)).sum(),
                FnKind::Average if !es.is_empty() => {
                    let s = scale / es.len() as f64;
                    es.iter().map(|e| lin(gp, e, body, args, s, out)).sum()
                }
                FnKind::Average => 0.0,
                FnKind::Max => pick(out),
                FnKind::GatedMax { tau } => {
                    if xs.iter().sum::<f64>() >= tau - EPS_EQ {
                        pick(out)
                    } else {
                        0.0
                    }
                }
                FnKind::MatchSum { .. } => scale * f.eval(&xs),
            }
        }
    }
}

/// Limit of the affine map iterated from `x`. Closed components keep `x`.
fn solve(aff: &Affine, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut g = DiGraph::<(), ()>::with_capacity(n, aff.cols.len());
    for _ in 0..n {
        g.add_node(());
    }
    for a in 0..n {
        for (j, _) in aff.row(a) {
            g.add_edge(NodeIndex::new(a), NodeIndex::new(j), ());
        }
    }
    let mut z = x.to_vec();
    let mut local = vec![usize::MAX; n];
    // Components arrive dependencies first.
    for comp in kosaraju_scc(&g) {
        if let [a] = comp[..] {
            let a = a.index();
            let (mut own, mut rest) = (0.0, aff.consts[a]);
            for (j, w) in aff.row(a) {
                if j == a {
                    own += w;
                } else {
                    rest += w * z[j];
                }
            }
            if own < 1.0 - CLOSED_TOL {
                z[a] = (rest / (1.0 - own)).max(x[a]);
            }
            continue;
        }
        let idx: Vec<usize> = comp.iter().map(|c| c.index()).collect();
        for (k, &a) in idx.iter().enumerate() {
            local[a] = k;
        }
        let mut rows = Vec::with_capacity(idx.len());
        let mut rhs = Vec::with_capacity(idx.len());
        let mut closed = true;
        for &a in &idx {
            let (mut inner, mut row, mut b) = (0.0, Vec::new(), aff.consts[a]);
            for (j, w) in aff.row(a) {
                if local[j] != usize::MAX {
                    inner += w;
                    row.push((local[j], w));
                } else {
                    b += w * z[j];
                }
            }
            closed &= inner >= 1.0 - CLOSED_TOL;
            rows.push(row);
            rhs.push(b);
        }
        if !closed {
            let guess: Vec<f64> = idx.iter().map(|&a| x[a]).collect();
            if let Some(sol) = bicgstab(&rows, &rhs, guess) {
                for (&a, s) in idx.iter().zip(sol) {
                    z[a] = s.max(x[a]);
                }
            }
        }
        for &a in &idx {
            local[a] = usize::MAX;
        }
    }
    z
}

/// y = (I − W) x for sparse rows W.
fn apply(rows: &[Vec<(usize, f64)>], x: &[f64], y: &mut [f64]) {
    for (i, r) in rows.iter().enumerate() {
        y[i] = x[i] - r.iter().map(|&(j, w)| w * x[j]).sum::<f64>();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves (I − W) x = b by BiCGSTAB. The shadow residual is random, since
/// r₀ is often supported on a few rows and would break down at once.
fn bicgstab(rows: &[Vec<(usize, f64)>], b: &[f64], mut x: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut r = vec![0.0; n];
    apply(rows, &x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(n as u64);
    let shadow: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let scale = dot(b, b).sqrt().max(1e-300);
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let (mut v, mut p, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..SOLVE_ITERS {
        if dot(&r, &r).sqrt() <= SOLVE_TOL * scale {
            return Some(x);
        }
        let rho1 = dot(&shadow, &r);
        if rho1 == 0.0 || omega == 0.0 {
            return None;
        }
        let beta = rho1 / rho * alpha / omega;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(rows, &p, &mut v);
        alpha = rho1 / dot(&shadow, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        apply(rows, &s, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho1;
        if !alpha.is_finite() || !omega.is_finite() {
            return None;
        }
    }
    (dot(&r, &r).sqrt() <= 1e3 * SOLVE_TOL * scale).then_some(x)
}
