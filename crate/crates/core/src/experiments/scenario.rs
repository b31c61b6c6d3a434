//! Scenario programs: two opinions spreading over the friendship graph
//! under chosen diffusion models, seeded with the training users' utilities.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::perturb::{perturb_edges, perturb_nodes};
use super::prefs::{Competition, PreferenceTable};
use super::roc::{roc_curve, RocResult};
use super::synth::FRIEND;
use crate::error::{Error, Result};
use crate::function::FunctionRegistry;
use crate::ground::{ground, GroundProgram};
use crate::model::{Aggregate, Atom, NeighborTemplate, Program, Rule, SocialNetwork, Term, VcRule};
use crate::vic::extremal_models;

pub const DEFAULT_TAU: f64 = 0.5;

/// How an opinion spreads to a vertex from its friends' decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DiffusionModel {
    /// Average over friends.
    Average = 1,
    /// Strongest friend.
    Max = 2,
    /// Strongest friend once the friends' sum reaches τ.
    Tipping = 3,
}

impl TryFrom<u8> for DiffusionModel {
    type Error = Error;

    fn try_from(x: u8) -> Result<Self> {
        match x {
            1 => Ok(DiffusionModel::Average),
            2 => Ok(DiffusionModel::Max),
            3 => Ok(DiffusionModel::Tipping),
            _ => Err(Error::Experiment(format!("unknown diffusion model {x}; expected 1-3"))),
        }
    }
}

impl From<DiffusionModel> for u8 {
    fn from(m: DiffusionModel) -> u8 {
        m as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
pub enum Perturbation {
    None,
    Node(f64),
    Edge(f64),
}

impl std::fmt::Display for Perturbation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Perturbation::None => write!(f, "none"),
            Perturbation::Node(p) => write!(f, "node:{p}"),
            Perturbation::Edge(p) => write!(f, "edge:{p}"),
        }
    }
}

impl std::str::FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Experiment(format!("bad perturbation `{s}`; expected none, node:P or edge:P"));
        if s == "none" {
            return Ok(Perturbation::None);
        }
        let (kind, p) = s.split_once(':').ok_or_else(bad)?;
        let p: f64 = p.parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad());
        }
        match kind {
            "node" => Ok(Perturbation::Node(p)),
            "edge" => Ok(Perturbation::Edge(p)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Diffusion of choice 1 and choice 2.
    pub models: (DiffusionModel, DiffusionModel),
    /// Percentage of the competition's users put in the training set.
    pub delta: f64,
    pub competition: u32,
    pub tau: f64,
    pub seed: u64,
    pub perturb: Perturbation,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            models: (DiffusionModel::Average, DiffusionModel::Average),
            delta: 50.0,
            competition: 3,
            tau: DEFAULT_TAU,
            seed: 0,
            perturb: Perturbation::None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.delta) {
            return Err(Error::Experiment(format!("training share {} outside [0,100]", self.delta)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Experiment(format!("tipping threshold {} must be non-negative", self.tau)));
        }
        if let Perturbation::Node(p) | Perturbation::Edge(p) = self.perturb {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Experiment(format!("perturbation probability {p} outside [0,1]")));
            }
        }
        Competition::standard(self.competition).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingUtility {
    pub user: String,
    pub u1: f64,
    pub u2: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub program: Program,
    pub network: SocialNetwork,
    pub train: Vec<TrainingUtility>,
    /// Validation users and whether they back choice 1.
    pub validation: Vec<(String, bool)>,
}

/// Seed streams, so the split and the perturbations draw independently.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Seeded shuffle; the first round(δ·|users|/100) go to training.
pub fn split<T: Clone>(users: &[T], delta: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((delta * users.len() as f64 / 100.0).round() as usize).min(users.len());
    let mut train: Vec<usize> = order[..k].to_vec();
    let mut val: Vec<usize> = order[k..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train.iter().map(|&i| users[i].clone()).collect(), val.iter().map(|&i| users[i].clone()).collect())
}

const CHOICE_U: [&str; 2] = ["choice1^U", "choice2^U"];
const CHOICE_D: [&str; 2] = ["choice1^D", "choice2^D"];

fn var(v: &str) -> Term {
    Term::Var(v.into())
}

/// The two-choice program: one neighbourhood template per choice and a
/// utility fact per nonzero training utility.
pub fn scenario_program(models: (DiffusionModel, DiffusionModel), tau: f64, edge_pred: &str, train: &[TrainingUtility]) -> Result<Program> {
    let mut rules = Vec::new();
    for t in train {
        for (k, u) in [t.u1, t.u2].into_iter().enumerate() {
            if u > 0.0 {
                rules.push(Rule::fact(Atom::ground(CHOICE_U[k], &[&t.user]), u));
            }
        }
    }
    let templates = [models.0, models.1]
        .into_iter()
        .enumerate()
        .map(|(k, m)| NeighborTemplate {
            head: Atom::new(CHOICE_U[k], vec![var("V")]),
            agg: if m == DiffusionModel::Average { Aggregate::Avg } else { Aggregate::Max },
            var: "M".into(),
            edge: Atom::new(edge_pred, vec![var("U"), var("V")]),
            edge_ann: 1.0,
            body: Atom::new(CHOICE_D[k], vec![var("U")]),
            gate: (m == DiffusionModel::Tipping).then_some(tau),
        })
        .collect();
    let vc = VcRule {
        decisions: CHOICE_D.iter().map(|p| Atom::new(*p, vec![var("X")])).collect(),
        utilities: CHOICE_U.iter().map(|p| Atom::new(*p, vec![var("X")])).collect(),
    };
    Program::new(FunctionRegistry::new(), rules, templates, vc)
}

/// Friend edges into vertices without a utility fact. Training utilities
/// are observed values, so spreading only fills in the other vertices;
/// on a connected graph an average rule at a training vertex would
/// otherwise lift every utility to the largest fact.
pub const SPREAD: &str = "spread";

fn with_spread_edges(mut sn: SocialNetwork, train: &[TrainingUtility]) -> Result<SocialNetwork> {
    let fixed: HashSet<&str> = train.iter().map(|t| t.user.as_str()).collect();
    let spread: Vec<(String, String, f64)> =
        sn.edges.iter().filter(|e| e.pred == FRIEND && !fixed.contains(e.dst.as_str())).map(|e| (e.src.clone(), e.dst.clone(), e.weight)).collect();
    for (u, v, w) in spread {
        sn.add_edge(&u, &v, SPREAD, w)?;
    }
    Ok(sn)
}

/// Splits the competition's users, applies the configured perturbation and
/// builds the program. Users whose supporter party is outside the
/// competition take no part.
pub fn build_scenario(cfg: &ScenarioConfig, sn: &SocialNetwork, prefs: &PreferenceTable) -> Result<Scenario> {
    cfg.validate()?;
    let comp = Competition::standard(cfg.competition)?;
    let population: Vec<usize> = (0..prefs.users.len()).filter(|&i| comp.side_of(&prefs.users[i]).is_some()).collect();
    if let Some(&i) = population.iter().find(|&&i| !sn.contains(&prefs.users[i].user)) {
        return Err(Error::Experiment(format!("user {} is not a vertex of the network", prefs.users[i].user)));
    }
    let (train, val) = split(&population, cfg.delta, stream_seed(cfg.seed, 0));
    let mut train: Vec<TrainingUtility> = train
        .iter()
        .map(|&i| {
            let u = &prefs.users[i];
            let (u1, u2) = comp.utilities(u).expect("supporter party has a positive coefficient");
            TrainingUtility { user: u.user.clone(), u1, u2 }
        })
        .collect();
    let validation = val.iter().map(|&i| (prefs.users[i].user.clone(), comp.side_of(&prefs.users[i]) == Some(1))).collect();
    let network = match cfg.perturb {
        Perturbation::Edge(p) => perturb_edges(sn, FRIEND, p, stream_seed(cfg.seed, 2))?,
        _ => sn.clone(),
    };
    if let Perturbation::Node(p) = cfg.perturb {
        train = perturb_nodes(&train, p, stream_seed(cfg.seed, 1))?;
    }
    let network = with_spread_edges(network, &train)?;
    let program = scenario_program(cfg.models, cfg.tau, SPREAD, &train)?;
    Ok(Scenario { program, network, train, validation })
}

/// Per-vertex utility bounds from the two extremal equilibria, keyed by
/// vertex name: (L₁, U₁, L₂, U₂).
pub fn utility_bounds(p: &Program, gp: &GroundProgram) -> Result<HashMap<String, [f64; 4]>> {
    let ext = extremal_models(p, gp)?;
    Ok(gp
        .vc
        .iter()
        .map(|inst| {
            let (a1, a2) = (inst.utilities[0], inst.utilities[1]);
            let (x, y) = (ext.m12.get(a1), ext.m21.get(a1));
            let (z, w) = (ext.m12.get(a2), ext.m21.get(a2));
            (gp.index.vertex_name(inst.vertex).to_string(), [x.min(y), x.max(y), z.min(w), z.max(w)])
        })
        .collect())
}

/// f(i) = (L₁+U₁)/2 − (L₂+U₂)/2.
pub fn score(b: &[f64; 4]) -> f64 {
    (b[0] + b[1]) / 2.0 - (b[2] + b[3]) / 2.0
}

pub fn run_scenario(cfg: &ScenarioConfig, sn: &SocialNetwork, prefs: &PreferenceTable) -> Result<RocResult> {
    let start = Instant::now();
    let sc = build_scenario(cfg, sn, prefs)?;
    let gp = ground(&sc.program, &sc.network)?;
    let bounds = utility_bounds(&sc.program, &gp)?;
    let scores: Vec<(String, f64, bool)> = sc.validation.iter().map(|(u, pos)| (u.clone(), score(&bounds[u]), *pos)).collect();
    let (points, auroc) = roc_curve(&scores.iter().map(|s| (s.1, s.2)).collect::<Vec<_>>())?;
    Ok(RocResult { points, auroc, scores, runtime_ms: start.elapsed().as_millis() as u64 })
}
