use std::fmt::Write;

use super::{ConstraintSystem, Sense, VarId, VarKind};
use crate::function::fmt_num;

fn terms_text(cs: &ConstraintSystem, terms: &[(VarId, f64)]) -> String {
    let mut s = String::new();
    for (i, (v, c)) in terms.iter().enumerate() {
        let name = &cs.vars[*v].name;
        let mag = c.abs();
        let coef = if mag == 1.0 { String::new() } else { format!("{} ", fmt_num(mag)) };
        match (i, *c < 0.0) {
            (0, false) => write!(s, "{coef}{name}"),
            (0, true) => write!(s, "- {coef}{name}"),
            (_, false) => write!(s, " + {coef}{name}"),
            (_, true) => write!(s, " - {coef}{name}"),
        }
        .unwrap();
    }
    s
}

/// CPLEX LP text. A system without objective is written as a zero
/// minimization over its first variable.
pub fn export_lp(cs: &ConstraintSystem) -> String {
    let mut out = String::new();
    match &cs.objective {
        Some(o) => {
            let head = if o.sense == Sense::Maximize { "Maximize" } else { "Minimize" };
            let body = if o.expr.terms.is_empty() { zero(cs) } else { terms_text(cs, &o.expr.terms) };
            writeln!(out, "{head}\n obj: {body}").unwrap();
            if o.expr.constant != 0.0 {
                writeln!(out, "\\ objective constant {}", fmt_num(o.expr.constant)).unwrap();
            }
        }
        None => writeln!(out, "Minimize\n obj: {}", zero(cs)).unwrap(),
    }
    writeln!(out, "Subject To").unwrap();
    for c in &cs.constraints {
        let lhs = if c.terms.is_empty() { zero(cs) } else { terms_text(cs, &c.terms) };
        writeln!(out, " {}: {lhs} {} {}", c.name, c.cmp.symbol(), fmt_num(c.rhs)).unwrap();
    }
    writeln!(out, "Bounds").unwrap();
    for v in cs.vars.iter().filter(|v| v.kind == VarKind::Continuous) {
        writeln!(out, " {} <= {} <= {}", fmt_num(v.lb), v.name, fmt_num(v.ub)).unwrap();
    }
    let bins: Vec<&str> = cs.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        writeln!(out, "Binary").unwrap();
        for b in bins {
            writeln!(out, " {b}").unwrap();
        }
    }
    out.push_str("End\n");
    out
}

fn zero(cs: &ConstraintSystem) -> String {
    match cs.vars.first() {
        Some(v) => format!("0 {}", v.name),
        None => "0".into(),
    }
}
