//! Election-prediction pipeline: likes to preferences, scenario programs
//! over a friendship graph, bound-based classification scored by AUROC,
//! perturbation studies and a synthetic network generator.

mod perturb;
mod prefs;
mod roc;
mod scenario;
mod synth;

pub use perturb::{perturb_edges, perturb_nodes};
pub use prefs::{compute_rho, Competition, PreferenceTable, UserPrefs, PARTIES};
pub use roc::{roc_curve, RocResult};
pub use scenario::{build_scenario, run_scenario, scenario_program, score, split, utility_bounds, DiffusionModel, Perturbation, Scenario, ScenarioConfig, TrainingUtility, DEFAULT_TAU, SPREAD};
pub use synth::{density, favourite, synth_network, SynthConfig, SynthData, FRIEND};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SocialNetwork;

/// One results row, with the appendix table's columns first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mod1: u8,
    pub mod2: u8,
    pub training_pct: f64,
    pub comp: u32,
    pub auroc: f64,
    pub time_ms: u64,
    pub tau: f64,
    pub seed: u64,
    pub perturb: String,
}

impl ResultRow {
    pub fn new(cfg: &ScenarioConfig, roc: &RocResult) -> Self {
        ResultRow {
            mod1: cfg.models.0.into(),
            mod2: cfg.models.1.into(),
            training_pct: cfg.delta,
            comp: cfg.competition,
            auroc: roc.auroc,
            time_ms: roc.runtime_ms,
            tau: cfg.tau,
            seed: cfg.seed,
            perturb: cfg.perturb.to_string(),
        }
    }
}

pub fn run_row(cfg: &ScenarioConfig, sn: &SocialNetwork, prefs: &PreferenceTable) -> Result<ResultRow> {
    run_scenario(cfg, sn, prefs).map(|roc| ResultRow::new(cfg, &roc))
}

/// Runs every configuration on a pool of `jobs` workers (0: all cores).
/// Results come back in input order.
pub fn run_matrix(cfgs: &[ScenarioConfig], sn: &SocialNetwork, prefs: &PreferenceTable, jobs: usize) -> Result<Vec<Result<ResultRow>>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Experiment(e.to_string()))?;
    Ok(pool.install(|| cfgs.par_iter().map(|c| run_row(c, sn, prefs)).collect()))
}
