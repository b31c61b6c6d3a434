//! Noise injected into the training utilities or the friendship graph.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::TrainingUtility;
use crate::error::{Error, Result};
use crate::model::SocialNetwork;

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Experiment(format!("perturbation probability {p} outside [0,1]")))
    }
}

/// Swaps u₁ and u₂ of each training user with probability `p`.
pub fn perturb_nodes(train: &[TrainingUtility], p: f64, seed: u64) -> Result<Vec<TrainingUtility>> {
    check_p(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(train
        .iter()
        .map(|t| if rng.gen_bool(p) { TrainingUtility { user: t.user.clone(), u1: t.u2, u2: t.u1 } } else { t.clone() })
        .collect())
}

/// Draws round(p·|E|) distinct vertex pairs uniformly and flips their
/// membership among the undirected `pred` edges. Removed edges vanish in
/// both directions; inserted ones get weight 1. Other edges and labels are
/// kept.
pub fn perturb_edges(sn: &SocialNetwork, pred: &str, p: f64, seed: u64) -> Result<SocialNetwork> {
    check_p(p)?;
    let pos: BTreeMap<&str, usize> = sn.vertices().iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let n = sn.vertices().len();
    let mut weight: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in sn.edges.iter().filter(|e| e.pred == pred && e.src != e.dst) {
        let (a, b) = (pos[e.src.as_str()], pos[e.dst.as_str()]);
        weight.entry((a.min(b), a.max(b))).or_insert(e.weight);
    }
    let all_pairs = n * n.saturating_sub(1) / 2;
    let k = ((p * weight.len() as f64).round() as usize).min(all_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut guessed = BTreeSet::new();
    while guessed.len() < k {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            guessed.insert((a.min(b), a.max(b)));
        }
    }
    for g in guessed {
        if weight.remove(&g).is_none() {
            weight.insert(g, 1.0);
        }
    }
    let mut out = SocialNetwork::new();
    for v in sn.vertices() {
        out.add_vertex(v);
    }
    out.labels = sn.labels.clone();
    out.edges = sn.edges.iter().filter(|e| e.pred != pred || e.src == e.dst).cloned().collect();
    let names = sn.vertices();
    for ((a, b), w) in weight {
        out.add_undirected(&names[a], &names[b], pred, w)?;
    }
    Ok(out)
}
