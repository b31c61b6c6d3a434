use std::collections::BTreeSet;

use cgap::experiments::*;
use cgap::ground::ground;
use cgap::text::Like;
use cgap::SocialNetwork;
use proptest::prelude::*;

fn likes(user: &str, counts: &[u32]) -> Vec<Like> {
    let mut out = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        for j in 0..c {
            out.push(Like { user: user.into(), page: format!("{}_page{j}", PARTIES[k]), category: PARTIES[k].into() });
        }
    }
    out
}

#[test]
fn rho_is_the_like_ratio() {
    let t = compute_rho(&likes("u", &[2, 1, 1]), &PARTIES);
    let u = t.get("u").unwrap();
    assert_eq!(u.rho, vec![0.5, 0.25, 0.25]);
    assert_eq!(u.supporter, 0);

    let t = compute_rho(&likes("u", &[0, 3, 0]), &PARTIES);
    assert_eq!(t.get("u").unwrap().rho, vec![0.0, 1.0, 0.0]);
    assert_eq!(t.get("u").unwrap().supporter, 1);
}

#[test]
fn rho_ties_go_to_the_lowest_party() {
    let t = compute_rho(&likes("u", &[1, 1, 0]), &PARTIES);
    assert_eq!(t.get("u").unwrap().supporter, 0);
    let t = compute_rho(&likes("u", &[0, 2, 2]), &PARTIES);
    assert_eq!(t.get("u").unwrap().supporter, 1);
}

#[test]
fn users_without_party_likes_are_left_out() {
    let mut l = likes("a", &[0, 1, 0]);
    l.push(Like { user: "b".into(), page: "cats".into(), category: "other".into() });
    let t = compute_rho(&l, &PARTIES);
    assert_eq!(t.users.len(), 1);
    assert!(t.get("b").is_none());
}

#[test]
fn competitions_split_the_coefficients() {
    let t = compute_rho(&likes("u", &[2, 1, 1]), &PARTIES);
    let u = t.get("u").unwrap();
    let c2 = Competition::standard(2).unwrap();
    let (u1, u2) = c2.utilities(u).unwrap();
    assert!((u1 - 0.5).abs() < 1e-12 && (u2 - 0.5).abs() < 1e-12);
    assert_eq!(c2.side_of(u), Some(2));
    let c1 = Competition::standard(1).unwrap();
    assert_eq!(c1.side_of(u), None);
    assert!(Competition::standard(5).is_err());
    for k in 1..=4 {
        let c = Competition::standard(k).unwrap();
        assert!(!c.side1.is_empty() && !c.side2.is_empty());
        assert!(c.side1.iter().all(|p| !c.side2.contains(p)));
    }
}

#[test]
fn split_sizes_and_determinism() {
    let users: Vec<u32> = (0..37).collect();
    let (t, v) = split(&users, 0.0, 1);
    assert!(t.is_empty() && v.len() == 37);
    let (t, v) = split(&users, 100.0, 1);
    assert!(t.len() == 37 && v.is_empty());
    let (t, v) = split(&users, 50.0, 9);
    assert_eq!(t.len(), 19);
    assert_eq!(t.len() + v.len(), 37);
    assert_eq!(split(&users, 50.0, 9), (t.clone(), v));
    assert_ne!(split(&users, 50.0, 10).0, t);
}

#[test]
fn roc_degenerate_cases() {
    let sep = [(0.9, true), (0.8, true), (0.1, false), (-0.3, false)];
    assert_eq!(roc_curve(&sep).unwrap().1, 1.0);
    let flat = [(0.2, true), (0.2, false), (0.2, true), (0.2, false), (0.2, false)];
    let (pts, auc) = roc_curve(&flat).unwrap();
    assert_eq!(auc, 0.5);
    assert_eq!(pts, vec![(0.0, 0.0), (1.0, 1.0)]);
    assert!(roc_curve(&[(0.1, true)]).is_err());
}

#[test]
fn roc_matches_a_hand_count() {
    // Sorted: 0.9 P | 0.5 N | 0.4 P, 0.4 N | 0.1 N
    let s = [(0.4, true), (0.9, true), (0.1, false), (0.5, false), (0.4, false)];
    let (pts, auc) = roc_curve(&s).unwrap();
    let third = 1.0 / 3.0;
    let want = [(0.0, 0.0), (0.0, 0.5), (third, 0.5), (2.0 * third, 1.0), (1.0, 1.0)];
    for (p, w) in pts.iter().zip(want) {
        assert!((p.0 - w.0).abs() < 1e-12 && (p.1 - w.1).abs() < 1e-12);
    }
    // Trapezoids: 0 + 1/3·0.5 + 1/3·0.75 + 1/3·1
    assert!((auc - (0.5 + 0.75 + 1.0) / 3.0).abs() < 1e-12);
}

fn scored_strategy() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((-20i32..20, any::<bool>()), 2..40)
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 10.0, l)).collect::<Vec<_>>())
        .prop_filter("both classes", |v| v.iter().any(|s| s.1) && v.iter().any(|s| !s.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roc_is_monotone_and_bounded(s in scored_strategy()) {
        let (pts, auc) = roc_curve(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        prop_assert_eq!(pts.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(pts.last().copied(), Some((1.0, 1.0)));
        prop_assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    }

    #[test]
    fn auroc_ignores_increasing_transforms(s in scored_strategy()) {
        let auc = roc_curve(&s).unwrap().1;
        let t: Vec<(f64, bool)> = s.iter().map(|&(x, l)| ((3.0 * x).exp() + 7.0, l)).collect();
        prop_assert!((roc_curve(&t).unwrap().1 - auc).abs() < 1e-12);
    }

    #[test]
    fn flipping_labels_mirrors_auroc(s in scored_strategy()) {
        let auc = roc_curve(&s).unwrap().1;
        let f: Vec<(f64, bool)> = s.iter().map(|&(x, l)| (x, !l)).collect();
        prop_assert!((roc_curve(&f).unwrap().1 - (1.0 - auc)).abs() < 1e-12);
    }

    #[test]
    fn auroc_counts_ordered_pairs(s in scored_strategy()) {
        // Mann-Whitney: P(score⁺ > score⁻) + ½·P(tie).
        let (mut wins, mut pairs) = (0.0, 0.0);
        for a in s.iter().filter(|x| x.1) {
            for b in s.iter().filter(|x| !x.1) {
                pairs += 1.0;
                wins += if a.0 > b.0 { 1.0 } else if a.0 == b.0 { 0.5 } else { 0.0 };
            }
        }
        prop_assert!((roc_curve(&s).unwrap().1 - wins / pairs).abs() < 1e-12);
    }
}

fn tiny_train() -> Vec<TrainingUtility> {
    vec![
        TrainingUtility { user: "t1".into(), u1: 0.9, u2: 0.1 },
        TrainingUtility { user: "t2".into(), u1: 0.2, u2: 0.8 },
    ]
}

fn tiny_network() -> SocialNetwork {
    let mut sn = SocialNetwork::new();
    for v in ["t1", "t2", "v1", "v2", "v3", "v4"] {
        sn.add_vertex(v);
    }
    for (a, b) in [("t1", "v1"), ("t2", "v2"), ("v3", "v4")] {
        sn.add_undirected(a, b, FRIEND, 1.0).unwrap();
    }
    sn
}

#[test]
fn six_vertex_auroc_by_hand() {
    // v1 hears only t1 (0.9 vs 0.1) and scores 0.9; v2 hears only t2 and
    // scores −0.8; v3 and v4 hear nobody and score 0. Labels P, N, P, N
    // give the curve (0,0) (0,½) (½,1) (1,1) with area 0.875.
    let labels = [("v1", true), ("v2", false), ("v3", true), ("v4", false)];
    let want = [0.9, -0.8, 0.0, 0.0];
    for m in [DiffusionModel::Average, DiffusionModel::Max, DiffusionModel::Tipping] {
        let p = scenario_program((m, m), DEFAULT_TAU, FRIEND, &tiny_train()).unwrap();
        let gp = ground(&p, &tiny_network()).unwrap();
        let b = utility_bounds(&p, &gp).unwrap();
        let scored: Vec<(f64, bool)> = labels.iter().map(|(v, l)| (score(&b[*v]), *l)).collect();
        for ((s, _), w) in scored.iter().zip(want) {
            assert!((s - w).abs() < 1e-9, "{m:?}: {scored:?}");
        }
        assert!((roc_curve(&scored).unwrap().1 - 0.875).abs() < 1e-12);
    }
}

#[test]
fn tipping_gate_blocks_weak_neighbours() {
    let train = vec![TrainingUtility { user: "t1".into(), u1: 0.3, u2: 0.0 }];
    let mut sn = SocialNetwork::new();
    for v in ["t1", "v1"] {
        sn.add_vertex(v);
    }
    sn.add_undirected("t1", "v1", FRIEND, 1.0).unwrap();
    for (tau, want) in [(0.5, 0.0), (0.25, 0.3)] {
        let p = scenario_program((DiffusionModel::Tipping, DiffusionModel::Tipping), tau, FRIEND, &train).unwrap();
        let gp = ground(&p, &sn).unwrap();
        let b = utility_bounds(&p, &gp).unwrap();
        assert!((b["v1"][1] - want).abs() < 1e-9, "tau {tau}: {:?}", b["v1"]);
    }
}

#[test]
fn average_model_averages_friends() {
    let train = vec![
        TrainingUtility { user: "a".into(), u1: 0.8, u2: 0.2 },
        TrainingUtility { user: "b".into(), u1: 0.6, u2: 0.4 },
    ];
    let mut sn = SocialNetwork::new();
    for v in ["a", "b", "c"] {
        sn.add_vertex(v);
    }
    sn.add_undirected("a", "c", FRIEND, 1.0).unwrap();
    sn.add_undirected("b", "c", FRIEND, 1.0).unwrap();
    let p = scenario_program((DiffusionModel::Average, DiffusionModel::Average), DEFAULT_TAU, FRIEND, &train).unwrap();
    let gp = ground(&p, &sn).unwrap();
    let b = utility_bounds(&p, &gp).unwrap();
    // Everyone keeps choice 1. c averages a and b, and b hears c back, so
    // x_c = (max(0.8, x_c) + max(0.6, x_c)) / 2, whose least solution is 0.8.
    for v in ["b", "c"] {
        assert!((b[v][0] - 0.8).abs() < 1e-9 && (b[v][1] - 0.8).abs() < 1e-9, "{v}: {:?}", b[v]);
    }
    assert!(b["c"][3].abs() < 1e-9);
}

#[test]
fn full_training_leaves_no_validation() {
    let data = synth_network(&SynthConfig { vertices: 200, edges: 260, ..Default::default() }).unwrap();
    let cfg = ScenarioConfig { delta: 100.0, ..Default::default() };
    let sc = build_scenario(&cfg, &data.network, &data.prefs()).unwrap();
    assert!(sc.validation.is_empty());
    let comp = Competition::standard(cfg.competition).unwrap();
    let prefs = data.prefs();
    let population = prefs.users.iter().filter(|u| comp.side_of(u).is_some()).count();
    assert_eq!(sc.train.len(), population);
    assert!(run_scenario(&cfg, &data.network, &prefs).is_err());
}

#[test]
fn node_perturbation_identities() {
    let train: Vec<TrainingUtility> = (0..20).map(|i| TrainingUtility { user: i.to_string(), u1: i as f64 / 20.0, u2: 1.0 - i as f64 / 20.0 }).collect();
    assert_eq!(perturb_nodes(&train, 0.0, 3).unwrap(), train);
    let swapped = perturb_nodes(&train, 1.0, 3).unwrap();
    for (a, b) in train.iter().zip(&swapped) {
        assert_eq!((a.u1, a.u2), (b.u2, b.u1));
    }
    assert!(perturb_nodes(&train, 1.5, 3).is_err());
}

fn undirected(sn: &SocialNetwork) -> BTreeSet<(String, String)> {
    sn.edges
        .iter()
        .filter(|e| e.pred == FRIEND)
        .map(|e| if e.src < e.dst { (e.src.clone(), e.dst.clone()) } else { (e.dst.clone(), e.src.clone()) })
        .collect()
}

#[test]
fn edge_perturbation_identities() {
    let data = synth_network(&SynthConfig { vertices: 60, edges: 90, seed: 4, ..Default::default() }).unwrap();
    let sn = &data.network;
    let before = undirected(sn);
    assert_eq!(before.len(), 90);
    assert_eq!(undirected(&perturb_edges(sn, FRIEND, 0.0, 1).unwrap()), before);
    let after = perturb_edges(sn, FRIEND, 1.0, 1).unwrap();
    let after_set = undirected(&after);
    assert_eq!(before.symmetric_difference(&after_set).count(), 90);
    assert!(after_set.len() <= 2 * before.len());
    assert_eq!(after.edges.len(), 2 * after_set.len());
    assert_eq!(after.vertices(), sn.vertices());
    assert_eq!(undirected(&perturb_edges(sn, FRIEND, 0.3, 7).unwrap()), undirected(&perturb_edges(sn, FRIEND, 0.3, 7).unwrap()));
}

#[test]
fn synth_is_reproducible() {
    let cfg = SynthConfig { vertices: 10, edges: 15, seed: 11, ..Default::default() };
    let a = synth_network(&cfg).unwrap();
    let b = synth_network(&cfg).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.likes, b.likes);
    assert_eq!(undirected(&a.network).len(), 15);
    let c = synth_network(&SynthConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(undirected(&a.network), undirected(&c.network));
}

#[test]
fn full_homophily_keeps_communities_apart() {
    let data = synth_network(&SynthConfig { vertices: 300, edges: 500, communities: 2, homophily: 1.0, seed: 2, ..Default::default() }).unwrap();
    let idx = |v: &str| v.parse::<usize>().unwrap();
    for e in &data.network.edges {
        assert_eq!(data.community[idx(&e.src)], data.community[idx(&e.dst)]);
    }
    assert_eq!(undirected(&data.network).len(), 500);
}

#[test]
fn synth_rejects_infeasible_sizes() {
    assert!(synth_network(&SynthConfig { vertices: 10, edges: 5, ..Default::default() }).is_err());
    assert!(synth_network(&SynthConfig { vertices: 5, edges: 11, ..Default::default() }).is_err());
    assert!(synth_network(&SynthConfig { vertices: 6, edges: 7, homophily: 1.0, ..Default::default() }).is_err());
}

#[test]
fn reference_scale_density() {
    assert!((density(64_889, 83_752) - 3.98e-5).abs() < 0.005e-5);
    let data = synth_network(&SynthConfig { vertices: 64_889, edges: 83_752, ..Default::default() }).unwrap();
    assert_eq!(data.network.vertices().len(), 64_889);
    assert_eq!(data.network.edges.len(), 2 * 83_752);
}

#[test]
fn scenarios_are_deterministic() {
    let data = synth_network(&SynthConfig { vertices: 400, edges: 520, seed: 5, ..Default::default() }).unwrap();
    let prefs = data.prefs();
    for perturb in [Perturbation::None, Perturbation::Node(0.3), Perturbation::Edge(0.2)] {
        let cfg = ScenarioConfig { seed: 5, perturb, ..Default::default() };
        let mut a = run_scenario(&cfg, &data.network, &prefs).unwrap();
        let mut b = run_scenario(&cfg, &data.network, &prefs).unwrap();
        a.runtime_ms = 0;
        b.runtime_ms = 0;
        assert_eq!(a, b);
    }
}

#[test]
fn result_rows_follow_the_table_schema() {
    let data = synth_network(&SynthConfig { vertices: 400, edges: 520, seed: 6, ..Default::default() }).unwrap();
    let cfg = ScenarioConfig { models: (DiffusionModel::Average, DiffusionModel::Tipping), delta: 40.0, competition: 3, seed: 6, ..Default::default() };
    let row = run_row(&cfg, &data.network, &data.prefs()).unwrap();
    let v = serde_json::to_value(&row).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in ["mod1", "mod2", "training_pct", "comp", "auroc", "time_ms", "tau", "seed", "perturb"] {
        assert!(keys.contains(&k), "{k} missing from {keys:?}");
    }
    assert_eq!((row.mod1, row.mod2, row.comp), (1, 3, 3));
    assert_eq!(row.training_pct, 40.0);
    assert!((0.0..=1.0).contains(&row.auroc));
    let back: ResultRow = serde_json::from_value(v).unwrap();
    assert_eq!(back, row);
}

#[test]
fn matrix_runs_in_input_order() {
    let data = synth_network(&SynthConfig { vertices: 300, edges: 400, seed: 8, ..Default::default() }).unwrap();
    let prefs = data.prefs();
    let cfgs: Vec<ScenarioConfig> = (0..4).map(|s| ScenarioConfig { seed: s, ..Default::default() }).collect();
    let rows = run_matrix(&cfgs, &data.network, &prefs, 2).unwrap();
    for (cfg, row) in cfgs.iter().zip(rows) {
        let row = row.unwrap();
        let solo = run_row(cfg, &data.network, &prefs).unwrap();
        assert_eq!((row.seed, row.auroc), (solo.seed, solo.auroc));
    }
}

#[test]
fn config_parsing() {
    assert_eq!("node:0.25".parse::<Perturbation>().unwrap(), Perturbation::Node(0.25));
    assert_eq!("edge:1".parse::<Perturbation>().unwrap(), Perturbation::Edge(1.0));
    assert_eq!("none".parse::<Perturbation>().unwrap(), Perturbation::None);
    assert!("node:2".parse::<Perturbation>().is_err());
    assert!("swap:0.1".parse::<Perturbation>().is_err());
    let cfg: ScenarioConfig = serde_json::from_str(r#"{"models": [1, 3], "delta": 20}"#).unwrap();
    assert_eq!(cfg.models, (DiffusionModel::Average, DiffusionModel::Tipping));
    assert_eq!(cfg.tau, DEFAULT_TAU);
    assert!(serde_json::from_str::<ScenarioConfig>(r#"{"models": [1, 4]}"#).is_err());
    assert!(ScenarioConfig { delta: 120.0, ..Default::default() }.validate().is_err());
}

#[test]
fn training_utilities_stay_fixed() {
    let data = synth_network(&SynthConfig { vertices: 300, edges: 400, seed: 9, ..Default::default() }).unwrap();
    let cfg = ScenarioConfig::default();
    let sc = build_scenario(&cfg, &data.network, &data.prefs()).unwrap();
    let trained: BTreeSet<&str> = sc.train.iter().map(|t| t.user.as_str()).collect();
    let spread: Vec<_> = sc.network.edges.iter().filter(|e| e.pred == SPREAD).collect();
    assert!(!spread.is_empty());
    assert!(spread.iter().all(|e| !trained.contains(e.dst.as_str())));
    let gp = ground(&sc.program, &sc.network).unwrap();
    let b = utility_bounds(&sc.program, &gp).unwrap();
    for t in &sc.train {
        for (k, u) in [t.u1, t.u2].into_iter().enumerate() {
            let (lo, hi) = (b[&t.user][2 * k], b[&t.user][2 * k + 1]);
            assert!((lo - u).abs() < 1e-12 && (hi - u).abs() < 1e-12, "{}: {:?}", t.user, b[&t.user]);
        }
    }
}
