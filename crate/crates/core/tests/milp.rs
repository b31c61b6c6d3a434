mod common;

use std::collections::BTreeSet;

use cgap::equilibria::{enumerate_strong_equilibria, EnumOptions};
use cgap::game::induced_model;
use cgap::milp::*;
use cgap::semantics::{is_coherent_model, is_strong_equilibrium};
use cgap::{Error, GroundProgram, State};
use common::*;
use lp_parser_rs::problem::LpProblem;
use proptest::prelude::*;

fn has(cs: &ConstraintSystem, terms: &[(&str, f64)], cmp: Cmp, rhs: f64) -> bool {
    let want: BTreeSet<(usize, i64)> = terms.iter().map(|(n, c)| (cs.var_id(n).unwrap(), (c * 1e6).round() as i64)).collect();
    cs.constraints.iter().any(|c| {
        let got: BTreeSet<(usize, i64)> = c.terms.iter().map(|&(v, k)| (v, (k * 1e6).round() as i64)).collect();
        c.cmp == cmp && (c.rhs - rhs).abs() < 1e-9 && got == want
    })
}

fn states(gp: &GroundProgram) -> impl Iterator<Item = State> + '_ {
    let n = gp.vc.len();
    let m = gp.vc.first().map_or(1, |i| i.decisions.len());
    (0..(m as u64).pow(n as u32)).map(move |code| State::from_code(code, n, m))
}

#[test]
fn illustration_has_exactly_the_listed_real_variables() {
    let (_, gp) = load("exspiega");
    let cs = build_ilc(&gp, 2, true).unwrap();
    let real: BTreeSet<&str> = cs.vars.iter().filter(|v| v.kind == VarKind::Continuous).map(|v| v.name.as_str()).collect();
    let mut want = BTreeSet::new();
    for t in 0..=2 {
        for a in ["a1", "a2", "b1", "b2"] {
            want.insert(format!("x_{t}_{a}_1"));
        }
    }
    for t in 1..=2 {
        for r in ["r1", "r2"] {
            want.insert(format!("z_{t}_{r}"));
        }
    }
    assert_eq!(real, want.iter().map(String::as_str).collect());
    for v in &cs.vars {
        if v.kind == VarKind::Binary {
            assert_eq!((v.lb, v.ub), (0.0, 1.0));
        }
    }
}

#[test]
fn max_selection_block_for_the_two_rule_atom() {
    let (_, gp) = load("exspiega");
    let cs = build_ilc(&gp, 2, true).unwrap();
    for t in 0..=2 {
        assert!(has(&cs, &[(&format!("x_{t}_a2_1"), 1.0)], Cmp::Eq, 0.0), "t={t}");
    }
    for t in 1..=2 {
        let x = format!("x_{t}_a1_1");
        let (z1, z2, u1, u2) = (format!("z_{t}_r1"), format!("z_{t}_r2"), format!("u_{t}_r1"), format!("u_{t}_r2"));
        assert!(has(&cs, &[(&u1, 1.0), (&u2, 1.0)], Cmp::Eq, 1.0));
        for (z, u) in [(&z1, &u1), (&z2, &u2)] {
            assert!(has(&cs, &[(z, 1.0), (&x, -1.0), (u, -1.0)], Cmp::Ge, -1.0));
            assert!(has(&cs, &[(&x, 1.0), (z, -1.0)], Cmp::Ge, 0.0));
        }
    }
}

#[test]
fn equilibrium_block_at_the_last_step() {
    let (_, gp) = load("exspiega");
    let cs = build_ilc(&gp, 2, true).unwrap();
    for a in ["x_2_a1_1", "x_2_a2_1"] {
        assert!(has(&cs, &[(a, -1.0), ("x_2_b1_1", 1.0), ("x_2_b2_1", 1.0)], Cmp::Ge, 0.0));
    }
    let weak = build_ilc(&gp, 2, false).unwrap();
    assert_eq!(cs.constraints.len() - weak.constraints.len(), 2);
}

fn stabilizing_step(gp: &GroundProgram) -> usize {
    let horizon = 4 * gp.atom_count() + 4;
    states(gp)
        .map(|s| {
            let rows = emulate(gp, horizon, &s).unwrap();
            let mm = induced_model(gp, &s).unwrap();
            assert!(rows[horizon].iter().zip(mm.values()).all(|(a, b)| (a - b).abs() <= 1e-7));
            (1..=horizon).find(|&t| rows[t] == rows[t - 1]).unwrap()
        })
        .max()
        .unwrap()
}

#[test]
fn iteration_bound_examples() {
    // x⁰ is pinned to 0, so even facts need one more step to show no change.
    let (_, facts) = parse("p(v):0.4 <- .\nq(v):0.7 <- .\na^D(X), b^D(X) <~ a^U(X), b^U(X) .\n");
    assert_eq!(compute_t_hat(&facts, 1).unwrap(), 2);
    for k in 1..=5 {
        let mut src = String::from("c0(v):0.5 <- .\n");
        for i in 1..=k {
            src += &format!("c{i}(v):0.5 <- c{}(v):0.5 .\n", i - 1);
        }
        src += "a^D(X), b^D(X) <~ a^U(X), b^U(X) .\n";
        let (_, gp) = parse(&src);
        assert_eq!(compute_t_hat(&gp, 1).unwrap(), k + 2, "k={k}");
        assert_eq!(compute_t_hat(&gp, 3).unwrap(), k + 2, "k={k}, δ=3");
        assert_eq!(stabilizing_step(&gp), k + 2);
    }
    let (_, gp) = load("exspiega");
    let t_hat = compute_t_hat(&gp, 1).unwrap();
    assert_eq!(t_hat, stabilizing_step(&gp));
    assert_eq!(t_hat, 3);
    assert!(compute_t_hat(&gp, 0).is_err());
}

#[test]
fn iteration_bound_cap_reports_non_finitary() {
    let (_, gp) = load("exspiega");
    let r = compute_t_hat_with(&gp, THatOptions { cap: Some(2), ..Default::default() });
    assert!(matches!(r, Err(Error::NonFinitary(_))), "{r:?}");
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut cs = ConstraintSystem::new();
    let x = cs.continuous("x", 0.0, 1.0).unwrap();
    cs.constrain(&LinExpr::var(x), Cmp::Ge, 0.7);
    cs.constrain(&LinExpr::var(x), Cmp::Le, 0.3);
    let sol = solve(&cs, Sense::Feasibility).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    assert!(!sol.is_feasible());
}

#[test]
fn plain_lp_optimum() {
    let mut cs = ConstraintSystem::new();
    let x = cs.continuous("x", 0.0, 1.0).unwrap();
    let y = cs.continuous("y", 0.0, 1.0).unwrap();
    cs.constrain_terms(&[(x, 1.0), (y, 1.0)], Cmp::Le, 1.2);
    let mut obj = LinExpr::var(x);
    obj.add_term(y, 2.0);
    cs.set_objective(Sense::Maximize, obj);
    let sol = solve(&cs, Sense::Maximize).unwrap();
    assert!((sol.objective.unwrap() - 2.2).abs() < 1e-7);
    assert!((sol.value(&cs, "y").unwrap() - 1.0).abs() < 1e-7);
}

#[test]
fn two_choice_example_feasibility_and_cuts() {
    let (_, gp) = load("ex_2eq");
    let eqs = enumerate_se_milp(&gp, None, SolveOptions::default()).unwrap();
    let states: Vec<State> = eqs.iter().map(|e| e.state.clone()).collect();
    assert_eq!(states, vec![State(vec![1]), State(vec![2])]);
    let brute = enumerate_strong_equilibria(&gp, &EnumOptions::default()).unwrap();
    for (m, b) in eqs.iter().zip(&brute) {
        assert!(m.interp.approx_eq(&b.interp, 1e-7));
    }

    let t_hat = compute_t_hat(&gp, 1).unwrap();
    let mut cs = build_ilc(&gp, t_hat, true).unwrap();
    let first = solve(&cs, Sense::Feasibility).unwrap();
    assert!(first.is_feasible());
    for c in &cs.constraints {
        assert!(c.holds(&first.values, FEAS_TOL), "{}", c.name);
    }
    let k = add_nogood_cut(&mut cs, &first).unwrap();
    assert!(!cs.constraints[k].holds(&first.values, FEAS_TOL));
    let second = solve(&cs, Sense::Feasibility).unwrap();
    assert!(second.is_feasible());
    assert!(cs.constraints[k].holds(&second.values, FEAS_TOL));
    add_nogood_cut(&mut cs, &second).unwrap();
    assert!(!solve(&cs, Sense::Feasibility).unwrap().is_feasible());
}

#[test]
fn three_colour_example_has_no_milp_equilibrium() {
    let (_, gp) = load("exa_vice");
    assert!(enumerate_se_milp(&gp, None, SolveOptions::default()).unwrap().is_empty());
}

#[test]
fn count_objective_matches_enumeration() {
    let mut checked = 0;
    for seed in 0..400u64 {
        let (_, gp) = parse(&random_program(seed, RandomShape { max_vertices: 3, cross: false }));
        if gp.vc.len() != 3 {
            continue;
        }
        let brute = enumerate_strong_equilibria(&gp, &EnumOptions::default()).unwrap();
        let counts: Vec<f64> = brute.iter().map(|e| e.state.0.iter().filter(|&&a| a == 2).count() as f64).collect();
        let mut cs = build_ilc(&gp, compute_t_hat(&gp, 1).unwrap(), true).unwrap();
        let layout = cs.layout.clone().unwrap();
        let mut obj = LinExpr::default();
        for ys in &layout.y {
            obj.add_term(ys[1], 1.0);
        }
        cs.set_objective(Sense::Maximize, obj);
        let hi = solve(&cs, Sense::Maximize).unwrap();
        let lo = solve(&cs, Sense::Minimize).unwrap();
        if counts.is_empty() {
            assert!(!hi.is_feasible());
            continue;
        }
        let max = counts.iter().cloned().fold(f64::MIN, f64::max);
        let min = counts.iter().cloned().fold(f64::MAX, f64::min);
        assert!((hi.objective.unwrap() - max).abs() < 1e-7, "seed {seed}");
        assert!((lo.objective.unwrap() - min).abs() < 1e-7, "seed {seed}");
        checked += 1;
        if checked == 30 {
            break;
        }
    }
    assert_eq!(checked, 30);
}

#[test]
fn match_sum_is_not_linearizable() {
    let (_, gp) = load("matchsum");
    assert!(matches!(build_ilc(&gp, 2, true), Err(Error::Unsupported(_))));
}

#[test]
fn lp_text_examples() {
    let mut cs = ConstraintSystem::new();
    let x = cs.continuous("x", 0.0, 1.0).unwrap();
    cs.constrain(&LinExpr::var(x), Cmp::Le, 0.5);
    cs.set_objective(Sense::Maximize, LinExpr::var(x));
    let text = export_lp(&cs);
    assert!(text.contains("Maximize\n obj: x\nSubject To\n c1: x <= 0.5"), "{text}");
    assert!(text.trim_end().ends_with("End"));

    let empty = export_lp(&ConstraintSystem::new());
    assert!(empty.contains("Bounds") && empty.trim_end().ends_with("End"));
    LpProblem::parse(&empty).unwrap();

    let mut bare = ConstraintSystem::new();
    bare.continuous("w", 0.0, 0.5).unwrap();
    let lp = LpProblem::parse(&export_lp(&bare)).unwrap();
    assert_eq!(lp.constraint_count(), 0);
}

#[test]
fn exported_system_parses_back() {
    let (_, gp) = load("ex_2eq");
    let cs = build_ilc(&gp, compute_t_hat(&gp, 1).unwrap(), true).unwrap();
    let text = export_lp(&cs);
    assert_eq!(text, export_lp(&cs));
    let lp = LpProblem::parse(&text).unwrap();
    assert_eq!(lp.constraint_count(), cs.constraints.len());
    assert_eq!(lp.variable_count(), cs.vars.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn milp_and_brute_force_agree((seed, cross) in (any::<u64>(), any::<bool>())) {
        let (_, gp) = parse(&random_program(seed, RandomShape { max_vertices: 4, cross }));
        let brute = enumerate_strong_equilibria(&gp, &EnumOptions::default()).unwrap();
        let milp = enumerate_se_milp(&gp, None, SolveOptions::default()).unwrap();
        let mut got: Vec<State> = milp.iter().map(|e| e.state.clone()).collect();
        got.sort_by(|a, b| a.0.cmp(&b.0));
        let want: Vec<State> = brute.iter().map(|e| e.state.clone()).collect();
        prop_assert_eq!(got, want);
        for e in &milp {
            prop_assert!(is_coherent_model(&gp, &e.interp).unwrap());
            prop_assert!(is_strong_equilibrium(&gp, &e.interp).unwrap());
        }
    }

    #[test]
    fn emulation_reaches_the_induced_minimal_model(seed in any::<u64>()) {
        let (_, gp) = parse(&random_program(seed, RandomShape { max_vertices: 4, cross: true }));
        let t_hat = compute_t_hat(&gp, 2).unwrap();
        for s in states(&gp) {
            let rows = emulate(&gp, t_hat, &s).unwrap();
            let mm = induced_model(&gp, &s).unwrap();
            for (a, b) in rows[t_hat].iter().zip(mm.values()) {
                prop_assert!((a - b).abs() <= 1e-7, "{} vs {} in {:?}", a, b, s);
            }
            prop_assert_eq!(&rows[0], &vec![0.0; gp.atom_count()]);
        }
    }
}
