use std::collections::HashSet;
use std::sync::Arc;

use super::{Cmp, ConstraintSystem, LinExpr, VarId};
use crate::error::{Error, Result};
use crate::function::{FnKind, EPS_EQ};
use crate::game::State;
use crate::ground::{condition_holds, AtomId, GroundProgram, HeadExpr};

/// Offset standing in for strict inequalities.
pub const EPS_MILP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub(crate) struct Gate {
    pub(crate) v: Vec<VarId>,
    pub(crate) all: VarId,
}

/// Auxiliary variables of one max-like node of a head expression, in
/// post-order of the expression tree.
#[derive(Debug, Clone)]
pub(crate) enum Aux {
    Max { m: VarId, w: Vec<VarId> },
    Gated { m: VarId, w: Vec<VarId>, g: VarId, o: VarId },
}

/// Variable layout of ILC(Π, T̂): which variable holds which atom, rule and
/// choice at each unrolled step.
#[derive(Debug, Clone)]
pub struct IlcLayout {
    pub gp: GroundProgram,
    pub t_hat: usize,
    /// x[t][atom] for t in 0..=T̂.
    pub x: Vec<Vec<VarId>>,
    /// z[t][rule] for t in 1..=T̂ (z[0] is empty).
    pub z: Vec<Vec<VarId>>,
    /// y[k][i]: VC instance k picks action i+1.
    pub y: Vec<Vec<VarId>>,
    pub(crate) u: Vec<Vec<Option<VarId>>>,
    pub(crate) gates: Vec<Vec<Option<Gate>>>,
    pub(crate) aux: Vec<Vec<Vec<Aux>>>,
    /// Conditions with a positive constant, per rule.
    pub(crate) conds: Vec<Vec<(AtomId, f64)>>,
    /// Variables created by the builder; all of them follow from y.
    pub(crate) owned: usize,
}

impl IlcLayout {
    pub fn owns(&self, v: VarId) -> bool {
        v < self.owned
    }

    pub fn is_y(&self, v: VarId) -> bool {
        self.y.iter().flatten().any(|&y| y == v)
    }

    /// x^T̂ values from a full assignment.
    pub fn final_values(&self, vals: &[f64]) -> Vec<f64> {
        self.x[self.t_hat].iter().map(|&v| vals[v].clamp(0.0, 1.0)).collect()
    }

    /// Forward-propagates every owned variable for the choice `state`.
    pub(crate) fn propagate(&self, state: &State, vals: &mut [f64]) {
        let gp = &self.gp;
        let mut buf = Vec::new();
        for (k, ys) in self.y.iter().enumerate() {
            for (i, &y) in ys.iter().enumerate() {
                vals[y] = if state.action(k) == i + 1 { 1.0 } else { 0.0 };
            }
        }
        for &x in &self.x[0] {
            vals[x] = 0.0;
        }
        for t in 1..=self.t_hat {
            let prev = &self.x[t - 1];
            for (ri, r) in gp.rules.iter().enumerate() {
                let mut active = true;
                if let Some(g) = &self.gates[t][ri] {
                    for (&v, &(c, k)) in g.v.iter().zip(&self.conds[ri]) {
                        let ok = condition_holds(vals[prev[c as usize]], k);
                        vals[v] = if ok { 1.0 } else { 0.0 };
                        active &= ok;
                    }
                    vals[g.all] = if active { 1.0 } else { 0.0 };
                }
                buf.clear();
                buf.extend(r.body.iter().map(|&a| vals[prev[a as usize]]));
                let mut recs = self.aux[t][ri].iter();
                let f = eval_node(&r.expr, &buf, gp, &mut recs, vals);
                vals[self.z[t][ri]] = if active { f } else { 0.0 };
            }
            for a in 0..gp.atom_count() {
                let x = self.x[t][a];
                let rules = gp.rules_for(a as AtomId);
                if rules.is_empty() {
                    vals[x] = 0.0;
                    continue;
                }
                let best = rules.iter().map(|&r| vals[self.z[t][r as usize]]).fold(0.0, f64::max);
                vals[x] = best;
                let mut picked = false;
                for &r in rules {
                    let u = self.u[t][r as usize].expect("selector for a defined atom");
                    let hit = !picked && vals[self.z[t][r as usize]] >= best;
                    picked |= hit;
                    vals[u] = if hit { 1.0 } else { 0.0 };
                }
            }
            for (k, vc) in gp.vc.iter().enumerate() {
                for (i, (&b, &a)) in vc.decisions.iter().zip(&vc.utilities).enumerate() {
                    if gp.rules_for(b).is_empty() {
                        vals[self.x[t][b as usize]] = if state.action(k) == i + 1 { vals[self.x[t][a as usize]] } else { 0.0 };
                    }
                }
            }
        }
    }
}

fn eval_node<'a>(e: &HeadExpr, args: &[f64], gp: &GroundProgram, recs: &mut impl Iterator<Item = &'a Aux>, vals: &mut [f64]) -> f64 {
    match e {
        HeadExpr::Const(c) => *c,
        HeadExpr::Arg(k) => args[*k],
        HeadExpr::Apply(f, es) => {
            let xs: Vec<f64> = es.iter().map(|c| eval_node(c, args, gp, recs, vals)).collect();
            let func = gp.functions.get(*f);
            let value = func.eval(&xs);
            let argmax = |w: &[VarId], vals: &mut [f64]| {
                let m = xs.iter().copied().fold(0.0, f64::max);
                let mut picked = false;
                for (&wv, &x) in w.iter().zip(&xs) {
                    let hit = !picked && x >= m;
                    picked |= hit;
                    vals[wv] = if hit { 1.0 } else { 0.0 };
                }
                m
            };
            match (&func.kind, xs.len()) {
                (FnKind::Max, n) if n >= 2 => {
                    let Some(Aux::Max { m, w }) = recs.next() else { unreachable!("aux layout out of step") };
                    vals[*m] = argmax(w, vals);
                }
                (FnKind::GatedMax { tau }, n) if n >= 1 => {
                    let Some(Aux::Gated { m, w, g, o }) = recs.next() else { unreachable!("aux layout out of step") };
                    let mv = argmax(w, vals);
                    vals[*m] = mv;
                    let open = xs.iter().sum::<f64>() >= tau - EPS_EQ;
                    vals[*g] = if open { 1.0 } else { 0.0 };
                    vals[*o] = if open { mv } else { 0.0 };
                }
                _ => {}
            }
            value
        }
    }
}

/// Variable-name fragment for atoms and vertices: `^` becomes `.`, arguments
/// are joined with `_`, anything else outside `[A-Za-z0-9_.]` becomes `_`.
fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '^' => '.',
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => c,
            _ => '_',
        })
        .collect()
}

struct Namer {
    used: HashSet<String>,
}

impl Namer {
    fn unique(&mut self, base: String, id: usize) -> String {
        let name = if self.used.contains(&base) { format!("{base}.{id}") } else { base };
        self.used.insert(name.clone());
        name
    }
}

/// ILC(Π, T̂): Types 1–3, plus Type 4 when `strong` is set.
pub fn build_ilc(gp: &GroundProgram, t_hat: usize, strong: bool) -> Result<ConstraintSystem> {
    if t_hat == 0 {
        return Err(Error::Invalid("T̂ must be at least 1".into()));
    }
    let ix = &gp.index;
    let mut namer = Namer { used: HashSet::new() };
    let atom_names: Vec<String> = (0..ix.len())
        .map(|a| {
            let g = ix.atom(a as AtomId);
            let mut s = sanitize(ix.pred_name(g.pred));
            for v in g.args() {
                s.push('_');
                s.push_str(&sanitize(ix.vertex_name(*v)));
            }
            namer.unique(s, a)
        })
        .collect();
    let mut vnamer = Namer { used: HashSet::new() };
    let vertex_names: Vec<String> = gp.vc.iter().map(|vc| vnamer.unique(sanitize(ix.vertex_name(vc.vertex)), vc.vertex as usize)).collect();

    let mut cs = ConstraintSystem::new();
    let n = gp.atom_count();
    let nr = gp.rules.len();
    let mut x = Vec::new();
    for t in 0..=t_hat {
        x.push((0..n).map(|a| cs.continuous(format!("x_{t}_{}", atom_names[a]), 0.0, 1.0)).collect::<Result<Vec<_>>>()?);
    }
    let conds: Vec<Vec<(AtomId, f64)>> = gp.rules.iter().map(|r| r.conds.iter().copied().filter(|c| c.1 > 0.0).collect()).collect();
    let mut vc_head = vec![false; n];
    for vc in &gp.vc {
        for &b in &vc.decisions {
            vc_head[b as usize] = true;
        }
    }

    let mut z = vec![Vec::new()];
    let mut u = vec![Vec::new()];
    let mut gates = vec![Vec::new()];
    let mut aux = vec![Vec::new()];
    let mut deferred: Vec<(LinExpr, Cmp, f64)> = Vec::new();
    for t in 1..=t_hat {
        let mut zt = Vec::with_capacity(nr);
        let mut ut = Vec::with_capacity(nr);
        let mut gt = Vec::with_capacity(nr);
        let mut at = Vec::with_capacity(nr);
        for (ri, r) in gp.rules.iter().enumerate() {
            let tag = format!("{t}_r{}", ri + 1);
            let zv = cs.continuous(format!("z_{tag}"), 0.0, 1.0)?;
            zt.push(zv);
            ut.push(Some(cs.binary(format!("u_{tag}"))?));
            let args: Vec<LinExpr> = r.body.iter().map(|&a| LinExpr::var(x[t - 1][a as usize])).collect();
            let mut recs = Vec::new();
            let mut counter = 0;
            let f = linearize(&r.expr, &args, gp, &mut cs, &tag, &mut counter, &mut recs, &mut deferred)?;
            at.push(recs);
            let l = conds[ri].len();
            if l == 0 {
                gt.push(None);
                let mut e = LinExpr::var(zv);
                e.add_scaled(&f, -1.0);
                deferred.push((e, Cmp::Eq, 0.0));
                continue;
            }
            let vs: Vec<VarId> = (1..=l).map(|j| cs.binary(format!("v_{tag}_{j}"))).collect::<Result<_>>()?;
            let all = cs.binary(format!("v_{tag}_all"))?;
            for (&v, &(c, k)) in vs.iter().zip(&conds[ri]) {
                let xc = x[t - 1][c as usize];
                deferred.push((lin(&[(v, 1.0), (xc, -1.0)]), Cmp::Ge, EPS_MILP - k));
                deferred.push((lin(&[(xc, 1.0), (v, -1.0)]), Cmp::Ge, k - 1.0));
            }
            for &v in &vs {
                deferred.push((lin(&[(v, 1.0), (all, -1.0)]), Cmp::Ge, 0.0));
            }
            let mut e = LinExpr::var(all);
            for &v in &vs {
                e.add_term(v, -1.0);
            }
            deferred.push((e, Cmp::Ge, 1.0 - l as f64));
            deferred.push((lin(&[(zv, -1.0), (all, 1.0)]), Cmp::Ge, 0.0));
            let mut e6 = LinExpr::var(zv);
            e6.add_scaled(&f, -1.0).add_term(all, -1.0);
            deferred.push((e6, Cmp::Ge, -1.0));
            let mut e7 = f.clone();
            e7.add_term(zv, -1.0).add_term(all, -1.0);
            deferred.push((e7, Cmp::Ge, -1.0));
            gt.push(Some(Gate { v: vs, all }));
        }
        // Type 1.
        for a in 0..n {
            let rules = gp.rules_for(a as AtomId);
            let xa = x[t][a];
            if rules.is_empty() {
                if !vc_head[a] {
                    deferred.push((LinExpr::var(xa), Cmp::Eq, 0.0));
                }
                continue;
            }
            let mut sel = LinExpr::default();
            for &r in rules {
                let (zv, uv) = (zt[r as usize], ut[r as usize].unwrap());
                deferred.push((lin(&[(zv, 1.0), (xa, -1.0), (uv, -1.0)]), Cmp::Ge, -1.0));
                deferred.push((lin(&[(xa, 1.0), (zv, -1.0)]), Cmp::Ge, 0.0));
                sel.add_term(uv, 1.0);
            }
            deferred.push((sel, Cmp::Eq, 1.0));
        }
        z.push(zt);
        u.push(ut);
        gates.push(gt);
        aux.push(at);
    }
    let y: Vec<Vec<VarId>> = gp
        .vc
        .iter()
        .enumerate()
        .map(|(k, vc)| (1..=vc.decisions.len()).map(|i| cs.binary(format!("y_{}_{i}", vertex_names[k]))).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    for a in 0..n {
        cs.constrain(&LinExpr::var(x[0][a]), Cmp::Eq, 0.0);
    }
    for ys in &y {
        cs.constrain_terms(&ys.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), Cmp::Eq, 1.0);
    }
    for (e, cmp, rhs) in &deferred {
        cs.constrain(e, *cmp, *rhs);
    }
    // Type 3 couplings.
    for t in 1..=t_hat {
        for (k, vc) in gp.vc.iter().enumerate() {
            for (i, (&b, &a)) in vc.decisions.iter().zip(&vc.utilities).enumerate() {
                let (xb, xa, yv) = (x[t][b as usize], x[t][a as usize], y[k][i]);
                cs.constrain_terms(&[(xb, 1.0), (xa, -1.0), (yv, -1.0)], Cmp::Ge, -1.0);
                cs.constrain_terms(&[(xa, 1.0), (xb, -1.0), (yv, -1.0)], Cmp::Ge, -1.0);
                cs.constrain_terms(&[(xb, 1.0), (yv, 1.0)], Cmp::Ge, 0.0);
                cs.constrain_terms(&[(xb, -1.0), (yv, 1.0)], Cmp::Ge, 0.0);
            }
        }
    }
    if strong {
        for vc in &gp.vc {
            for &a in &vc.utilities {
                let mut terms = vec![(x[t_hat][a as usize], -1.0)];
                terms.extend(vc.decisions.iter().map(|&b| (x[t_hat][b as usize], 1.0)));
                cs.constrain_terms(&terms, Cmp::Ge, 0.0);
            }
        }
    }
    let owned = cs.vars.len();
    cs.layout = Some(Arc::new(IlcLayout { gp: gp.clone(), t_hat, x, z, y, u, gates, aux, conds, owned }));
    Ok(cs)
}

fn lin(terms: &[(VarId, f64)]) -> LinExpr {
    LinExpr { terms: terms.to_vec(), constant: 0.0 }
}

/// Linear expression equal to the head expression over `args`, adding
/// auxiliary variables and constraints for max-like nodes.
#[allow(clippy::too_many_arguments)]
fn linearize(
    e: &HeadExpr,
    args: &[LinExpr],
    gp: &GroundProgram,
    cs: &mut ConstraintSystem,
    tag: &str,
    counter: &mut usize,
    recs: &mut Vec<Aux>,
    out: &mut Vec<(LinExpr, Cmp, f64)>,
) -> Result<LinExpr> {
    Ok(match e {
        HeadExpr::Const(c) => LinExpr::constant(*c),
        HeadExpr::Arg(k) => args[*k].clone(),
        HeadExpr::Apply(f, es) => {
            let kids: Vec<LinExpr> = es.iter().map(|c| linearize(c, args, gp, cs, tag, counter, recs, out)).collect::<Result<_>>()?;
            let func = gp.functions.get(*f);
            let n = kids.len();
            match &func.kind {
                FnKind::Linear { coeffs } => {
                    let mut s = LinExpr::default();
                    for (k, a) in kids.iter().zip(coeffs) {
                        s.add_scaled(k, *a);
                    }
                    s
                }
                FnKind::Average if n == 0 => LinExpr::constant(0.0),
                FnKind::Average => {
                    let mut s = LinExpr::default();
                    for k in &kids {
                        s.add_scaled(k, 1.0 / n as f64);
                    }
                    s
                }
                FnKind::Max if n == 0 => LinExpr::constant(0.0),
                FnKind::Max if n == 1 => kids[0].clone(),
                FnKind::Max => {
                    *counter += 1;
                    let (m, w) = max_block(cs, &kids, &format!("{tag}_{counter}"), out)?;
                    recs.push(Aux::Max { m, w });
                    LinExpr::var(m)
                }
                FnKind::GatedMax { .. } if n == 0 => LinExpr::constant(0.0),
                FnKind::GatedMax { tau } => {
                    *counter += 1;
                    let name = format!("{tag}_{counter}");
                    let (m, w) = max_block(cs, &kids, &name, out)?;
                    let g = cs.binary(format!("g_{name}"))?;
                    let o = cs.continuous(format!("o_{name}"), 0.0, 1.0)?;
                    let mut sum = LinExpr::default();
                    for k in &kids {
                        sum.add_scaled(k, 1.0);
                    }
                    let mut open = sum.clone();
                    open.add_term(g, -tau);
                    out.push((open, Cmp::Ge, 0.0));
                    let mut closed = sum;
                    closed.add_term(g, -(n as f64));
                    out.push((closed, Cmp::Le, tau - EPS_MILP));
                    out.push((lin(&[(o, 1.0), (m, -1.0)]), Cmp::Le, 0.0));
                    out.push((lin(&[(o, 1.0), (g, -1.0)]), Cmp::Le, 0.0));
                    out.push((lin(&[(o, 1.0), (m, -1.0), (g, -1.0)]), Cmp::Ge, -1.0));
                    recs.push(Aux::Gated { m, w, g, o });
                    LinExpr::var(o)
                }
                FnKind::MatchSum { .. } => return Err(Error::Unsupported(func.name.clone())),
            }
        }
    })
}

/// m = max(kids) through selector binaries w.
fn max_block(cs: &mut ConstraintSystem, kids: &[LinExpr], name: &str, out: &mut Vec<(LinExpr, Cmp, f64)>) -> Result<(VarId, Vec<VarId>)> {
    let m = cs.continuous(format!("m_{name}"), 0.0, 1.0)?;
    let w: Vec<VarId> = (1..=kids.len()).map(|j| cs.binary(format!("w_{name}_{j}"))).collect::<Result<_>>()?;
    let mut sel = LinExpr::default();
    for (k, &wv) in kids.iter().zip(&w) {
        let mut ge = LinExpr::var(m);
        ge.add_scaled(k, -1.0);
        out.push((ge, Cmp::Ge, 0.0));
        let mut le = LinExpr::var(m);
        le.add_scaled(k, -1.0).add_term(wv, 1.0);
        out.push((le, Cmp::Le, 1.0));
        sel.add_term(wv, 1.0);
    }
    out.push((sel, Cmp::Eq, 1.0));
    Ok((m, w))
}

/// x^t for t = 0..=T̂ under a fixed choice vector, by forward propagation of
/// the Type 1–3 structure.
pub fn emulate(gp: &GroundProgram, t_hat: usize, state: &State) -> Result<Vec<Vec<f64>>> {
    state.validate(gp)?;
    let cs = build_ilc(gp, t_hat, false)?;
    let layout = cs.layout.as_ref().unwrap();
    let mut vals = vec![0.0; cs.vars.len()];
    layout.propagate(state, &mut vals);
    Ok(layout.x.iter().map(|row| row.iter().map(|&v| vals[v]).collect()).collect())
}
