use std::fmt::Write;

use crate::function::{fmt_num, FunctionRegistry};
use crate::ground::{AtomId, GroundProgram, HeadExpr};
use crate::model::{Aggregate, AnnExpr, Atom, BodyAnn, NeighborTemplate, Program, Rule, Term, VcRule};

fn plain_const(s: &str) -> bool {
    match s.chars().next() {
        Some(c) if c.is_ascii_lowercase() => s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '^'),
        Some(c) if c.is_ascii_digit() => s.chars().all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

/// Constant as it must be written to read back unchanged.
pub fn quote_const(s: &str) -> String {
    if plain_const(s) {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

pub fn atom_text(a: &Atom) -> String {
    let args: Vec<String> = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => v.clone(),
            Term::Const(c) => quote_const(c),
        })
        .collect();
    format!("{}({})", a.pred, args.join(","))
}

fn expr_text(e: &AnnExpr) -> String {
    match e {
        AnnExpr::Const(c) => fmt_num(*c),
        AnnExpr::Var(v) => v.clone(),
        AnnExpr::Apply(f, args) => format!("{f}({})", args.iter().map(expr_text).collect::<Vec<_>>().join(", ")),
    }
}

pub fn rule_text(r: &Rule) -> String {
    let body: Vec<String> = r
        .body
        .iter()
        .map(|l| match &l.ann {
            BodyAnn::Var(v) => format!("{}:{v}", atom_text(&l.atom)),
            BodyAnn::Const(c) => format!("{}:{}", atom_text(&l.atom), fmt_num(*c)),
        })
        .collect();
    if body.is_empty() {
        format!("{}:{} <- .", atom_text(&r.head), expr_text(&r.ann))
    } else {
        format!("{}:{} <- {} .", atom_text(&r.head), expr_text(&r.ann), body.join(", "))
    }
}

fn template_text(t: &NeighborTemplate) -> String {
    let agg = match t.agg {
        Aggregate::Avg => "avg",
        Aggregate::Max => "max",
    };
    let gate = t.gate.map(|g| format!(" if sum >= {}", fmt_num(g))).unwrap_or_default();
    format!(
        "{}: {agg}{{ {} | {}:{}, {}:{} }}{gate} .",
        atom_text(&t.head),
        t.var,
        atom_text(&t.edge),
        fmt_num(t.edge_ann),
        atom_text(&t.body),
        t.var
    )
}

fn vc_text(vc: &VcRule) -> String {
    let list = |xs: &[Atom]| xs.iter().map(atom_text).collect::<Vec<_>>().join(", ");
    format!("{} <~ {} .", list(&vc.decisions), list(&vc.utilities))
}

fn functions_text(out: &mut String, fns: &FunctionRegistry) {
    for f in fns.declared() {
        let arity = f.arity.map_or("*".to_string(), |a| a.to_string());
        writeln!(out, "#function {} {arity} {}", f.name, f.kind_text()).unwrap();
    }
}

/// Program text that parses back to an equal program.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    functions_text(&mut out, &p.functions);
    for r in &p.rules {
        writeln!(out, "{}", rule_text(r)).unwrap();
    }
    for t in &p.templates {
        writeln!(out, "{}", template_text(t)).unwrap();
    }
    writeln!(out, "{}", vc_text(&p.vc)).unwrap();
    out
}

fn ground_atom(gp: &GroundProgram, id: AtomId) -> String {
    let ix = &gp.index;
    let args: Vec<String> = ix.atom(id).args().iter().map(|&v| quote_const(ix.vertex_name(v))).collect();
    format!("{}({})", ix.pred_of(id), args.join(","))
}

fn head_text(gp: &GroundProgram, e: &HeadExpr) -> String {
    match e {
        HeadExpr::Const(c) => fmt_num(*c),
        HeadExpr::Arg(k) => format!("M{k}"),
        HeadExpr::Apply(f, args) => {
            format!("{}({})", gp.functions.get(*f).name, args.iter().map(|a| head_text(gp, a)).collect::<Vec<_>>().join(", "))
        }
    }
}

/// The ground program in program syntax: functions, one rule per ground
/// rule, and the vertex choice rule it was grounded from.
pub fn print_ground(gp: &GroundProgram, vc: &VcRule) -> String {
    let mut out = String::new();
    functions_text(&mut out, &gp.functions);
    for r in &gp.rules {
        let mut body: Vec<String> = r.body.iter().enumerate().map(|(k, &a)| format!("{}:M{k}", ground_atom(gp, a))).collect();
        body.extend(r.conds.iter().map(|&(a, c)| format!("{}:{}", ground_atom(gp, a), fmt_num(c))));
        let head = format!("{}:{}", ground_atom(gp, r.head), head_text(gp, &r.expr));
        if body.is_empty() {
            writeln!(out, "{head} <- .").unwrap();
        } else {
            writeln!(out, "{head} <- {} .", body.join(", ")).unwrap();
        }
    }
    writeln!(out, "{}", vc_text(vc)).unwrap();
    out
}
