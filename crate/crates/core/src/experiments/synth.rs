//! Planted-partition friendship graphs with community-specific party
//! preferences, standing in for the real social network.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prefs::{compute_rho, PreferenceTable, PARTIES};
use crate::error::{Error, Result};
use crate::model::SocialNetwork;
use crate::text::Like;

pub const FRIEND: &str = "friend";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub vertices: usize,
    /// Undirected edges.
    pub edges: usize,
    pub communities: usize,
    /// Probability that an edge stays inside its source's community.
    pub homophily: f64,
    pub seed: u64,
    /// Share of users with at least one party like.
    pub political: f64,
    /// Probability that a party like goes to the community's favourite.
    pub loyalty: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { vertices: 2000, edges: 2580, communities: 2, homophily: 0.9, seed: 0, political: 0.3, loyalty: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub network: SocialNetwork,
    pub likes: Vec<Like>,
    pub community: Vec<usize>,
}

impl SynthData {
    pub fn prefs(&self) -> PreferenceTable {
        compute_rho(&self.likes, &PARTIES)
    }
}

/// Favourite party of a community: p2, p1, p3, then repeating.
pub fn favourite(community: usize) -> usize {
    [1, 0, 2][community % 3]
}

/// 2e / (n(n−1)).
pub fn density(n: usize, e: usize) -> f64 {
    2.0 * e as f64 / (n as f64 * (n as f64 - 1.0))
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub fn synth_network(cfg: &SynthConfig) -> Result<SynthData> {
    let bad = |m: String| Err(Error::Experiment(format!("synthetic network: {m}")));
    let (n, c) = (cfg.vertices, cfg.communities);
    if n == 0 || c == 0 || c > n {
        return bad(format!("need 1 <= communities ({c}) <= vertices ({n})"));
    }
    for (name, x) in [("homophily", cfg.homophily), ("political", cfg.political), ("loyalty", cfg.loyalty)] {
        if !(0.0..=1.0).contains(&x) {
            return bad(format!("{name} {x} outside [0,1]"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let community: Vec<usize> = (0..n).map(|v| v % c).collect();
    let sizes: Vec<usize> = (0..c).map(|k| (n - k).div_ceil(c)).collect();
    let closed = cfg.homophily >= 1.0 && c > 1;
    let max_edges = if closed { sizes.iter().map(|s| s * (s - 1) / 2).sum() } else { n * (n - 1) / 2 };
    let min_edges = if closed { n - c } else { n - 1 };
    if cfg.edges < min_edges || cfg.edges > max_edges {
        return bad(format!("{} edges outside the feasible range {min_edges}..={max_edges}", cfg.edges));
    }

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(cfg.edges);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(cfg.edges * 2);
    // Spanning forest grown by preferential attachment: each vertex, in
    // random order, links to an earlier one picked with probability
    // proportional to degree + 1. The bags hold one entry per vertex plus one
    // per incident edge.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut bag: Vec<Vec<usize>> = vec![Vec::new(); c];
    let mut bag_all: Vec<usize> = Vec::new();
    let link = |u: usize, v: usize, edges: &mut Vec<(usize, usize)>, bag: &mut Vec<Vec<usize>>, bag_all: &mut Vec<usize>| {
        edges.push(pair(u, v));
        for w in [u, v] {
            bag[community[w]].push(w);
            bag_all.push(w);
        }
    };
    for &v in &order {
        let own = &bag[community[v]];
        let target = if !own.is_empty() && (closed || bag_all.len() == own.len() || rng.gen_bool(cfg.homophily)) {
            Some(own[rng.gen_range(0..own.len())])
        } else if !closed && !bag_all.is_empty() {
            loop {
                let u = bag_all[rng.gen_range(0..bag_all.len())];
                if community[u] != community[v] {
                    break Some(u);
                }
            }
        } else {
            None
        };
        if let Some(u) = target {
            seen.insert(pair(u, v));
            link(u, v, &mut edges, &mut bag, &mut bag_all);
        }
        bag[community[v]].push(v);
        bag_all.push(v);
    }
    let mut attempts = 0usize;
    while edges.len() < cfg.edges {
        attempts += 1;
        if attempts > 100 * cfg.edges + 10_000 {
            return bad("edge sampling made no progress; lower the edge count".into());
        }
        let u = rng.gen_range(0..n);
        let k = if c == 1 || closed || rng.gen_bool(cfg.homophily) {
            community[u]
        } else {
            let k = rng.gen_range(0..c - 1);
            if k >= community[u] { k + 1 } else { k }
        };
        let v = bag[k][rng.gen_range(0..bag[k].len())];
        if u != v && seen.insert(pair(u, v)) {
            link(u, v, &mut edges, &mut bag, &mut bag_all);
        }
    }
    edges.sort_unstable();

    let mut network = SocialNetwork::new();
    let names: Vec<String> = (0..n).map(|v| v.to_string()).collect();
    for name in &names {
        network.add_vertex(name);
    }
    for &(u, v) in &edges {
        network.add_undirected(&names[u], &names[v], FRIEND, 1.0)?;
    }

    let mut likes = Vec::new();
    for v in 0..n {
        if rng.gen_bool(cfg.political) {
            let fav = favourite(community[v]);
            for _ in 0..rng.gen_range(1..=4) {
                let party = if rng.gen_bool(cfg.loyalty) {
                    fav
                } else {
                    let mut k = rng.gen_range(0..PARTIES.len() - 1);
                    if k >= fav {
                        k += 1;
                    }
                    k
                };
                let page = format!("{}_page{}", PARTIES[party], rng.gen_range(0..20));
                likes.push(Like { user: names[v].clone(), page, category: PARTIES[party].into() });
            }
        }
        if rng.gen_bool(0.3) {
            likes.push(Like { user: names[v].clone(), page: format!("misc_page{}", rng.gen_range(0..50)), category: "other".into() });
        }
    }
    Ok(SynthData { network, likes, community })
}
