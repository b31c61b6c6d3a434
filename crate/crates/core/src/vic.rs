//! Dependency analysis for vertex-independent choice programs, the polynomial
//! equilibrium search for two choices, and the extremal / mixed models.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function::EPS_EQ;
use crate::game::{state_bridges, State};
use crate::ground::{AtomId, GroundProgram};
use crate::interp::Interpretation;
use crate::model::Program;
use crate::semantics::{minimal_model_bridged, Entailment};

/// Predicate-level dependency graph: body → head for rules and templates,
/// utility → decision for each pair of the choice rule.
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    pub nodes: Vec<String>,
    succ: BTreeMap<String, BTreeSet<String>>,
    pred: BTreeMap<String, BTreeSet<String>>,
    decisions: Vec<String>,
}

impl DependencyGraph {
    pub fn new(p: &Program) -> Self {
        let nodes: Vec<String> = p.predicates().into_keys().collect();
        let mut g = DependencyGraph {
            nodes,
            succ: BTreeMap::new(),
            pred: BTreeMap::new(),
            decisions: p.vc.decision_preds().into_iter().map(String::from).collect(),
        };
        for r in &p.rules {
            for l in &r.body {
                g.add_edge(&l.atom.pred, &r.head.pred);
            }
        }
        for t in &p.templates {
            g.add_edge(&t.edge.pred, &t.head.pred);
            g.add_edge(&t.body.pred, &t.head.pred);
        }
        for (a, b) in p.vc.utilities.iter().zip(&p.vc.decisions) {
            g.add_edge(&a.pred, &b.pred);
        }
        g
    }

    fn add_edge(&mut self, from: &str, to: &str) {
        self.succ.entry(from.to_string()).or_default().insert(to.to_string());
        self.pred.entry(to.to_string()).or_default().insert(from.to_string());
    }

    pub fn successors(&self, n: &str) -> impl Iterator<Item = &String> {
        self.succ.get(n).into_iter().flatten()
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.succ.get(from).is_some_and(|s| s.contains(to))
    }

    /// Shortest path from `from` to `to` (both inclusive), if any.
    pub fn path(&self, from: &str, to: &str) -> Option<Vec<String>> {
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                let mut path = vec![to.to_string()];
                let mut cur = to;
                while cur != from {
                    cur = parent[cur];
                    path.push(cur.to_string());
                }
                path.reverse();
                return Some(path);
            }
            for s in self.successors(n) {
                if seen.insert(s.as_str()) {
                    parent.insert(s, n);
                    queue.push_back(s);
                }
            }
        }
        None
    }

    /// Predicates that reach `target`, including itself.
    pub fn reaching(&self, target: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::from([target.to_string()]);
        let mut queue = VecDeque::from([target.to_string()]);
        while let Some(n) = queue.pop_front() {
            for p in self.pred.get(&n).into_iter().flatten() {
                if out.insert(p.clone()) {
                    queue.push_back(p.clone());
                }
            }
        }
        out
    }

    /// Predⁱ for every action i, in action order.
    pub fn pred_sets(&self) -> Vec<BTreeSet<String>> {
        self.decisions.iter().map(|b| self.reaching(b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    /// A decision predicate is defined by a rule.
    DecisionInHead { pred: String },
    /// A path from decision bⱼ to utility aᵢ with i ≠ j.
    CrossPath { path: Vec<String> },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::DecisionInHead { pred } => write!(f, "decision predicate {pred} appears in a rule head"),
            Witness::CrossPath { path } => write!(f, "dependency path {}", path.join(" -> ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VicClassification {
    Vic { m: usize },
    NotVic(Witness),
}

impl VicClassification {
    pub fn is_vic(&self) -> bool {
        matches!(self, VicClassification::Vic { .. })
    }

    pub fn is_vic2(&self) -> bool {
        *self == VicClassification::Vic { m: 2 }
    }
}

pub fn classify(p: &Program) -> VicClassification {
    let decisions = p.vc.decision_preds();
    let heads = p.rules.iter().map(|r| &r.head).chain(p.templates.iter().map(|t| &t.head));
    for h in heads {
        if decisions.contains(&h.pred.as_str()) {
            return VicClassification::NotVic(Witness::DecisionInHead { pred: h.pred.clone() });
        }
    }
    let g = DependencyGraph::new(p);
    for (j, b) in p.vc.decisions.iter().enumerate() {
        for (i, a) in p.vc.utilities.iter().enumerate() {
            if i != j {
                if let Some(path) = g.path(&b.pred, &a.pred) {
                    return VicClassification::NotVic(Witness::CrossPath { path });
                }
            }
        }
    }
    VicClassification::Vic { m: p.vc.arity() }
}

fn require(p: &Program, m: Option<usize>) -> Result<()> {
    match (classify(p), m) {
        (VicClassification::Vic { m: k }, Some(want)) if k != want => Err(Error::NotVic { expected: want, witness: format!("choice rule has {k} options") }),
        (VicClassification::Vic { .. }, _) => Ok(()),
        (VicClassification::NotVic(w), want) => Err(Error::NotVic { expected: want.unwrap_or(p.vc.arity()), witness: w.to_string() }),
    }
}

/// Ground rules split by the Predⁱ set of their head predicate.
#[derive(Debug, Clone)]
pub struct VicSplit {
    pub pred_sets: Vec<BTreeSet<String>>,
    /// Part i: the GAP rules whose head predicate is in Predⁱ.
    pub parts: Vec<GroundProgram>,
    /// Atom ids whose predicate lies in Predⁱ (choice-indicator atoms excluded).
    pub atom_sides: Vec<Vec<bool>>,
}

impl VicSplit {
    pub fn new(p: &Program, gp: &GroundProgram) -> Result<Self> {
        require(p, None)?;
        let pred_sets = DependencyGraph::new(p).pred_sets();
        let in_set = |set: &BTreeSet<String>, a: AtomId| set.contains(gp.index.pred_of(a));
        let parts = pred_sets
            .iter()
            .map(|set| gp.with_rules(gp.rules.iter().filter(|r| in_set(set, r.head)).cloned().collect(), Vec::new()))
            .collect();
        let atom_sides = pred_sets.iter().map(|set| (0..gp.atom_count() as AtomId).map(|a| in_set(set, a)).collect()).collect();
        Ok(VicSplit { pred_sets, parts, atom_sides })
    }

    /// Bridges of `s` for the vertices that chose `action` (1-based).
    fn bridges(gp: &GroundProgram, s: &State, action: usize) -> Result<Vec<(AtomId, AtomId)>> {
        Ok(state_bridges(gp, s)?.into_iter().zip(&s.0).filter(|(_, a)| **a == action).map(|(b, _)| b).collect())
    }

    /// MM(Πⁱ_S) for 1-based `action` = i.
    pub fn part_model(&self, gp: &GroundProgram, s: &State, action: usize) -> Result<Interpretation> {
        minimal_model_bridged(&self.parts[action - 1], &Self::bridges(gp, s, action)?).into_model()
    }

    /// MM(Π¹_{s1} ∪ Π²_{s2} ∪ …): part i evaluated under state `states[i]`.
    pub fn mixed_model(&self, gp: &GroundProgram, states: &[&State]) -> Result<Interpretation> {
        let mut rules = Vec::new();
        let mut bridges = Vec::new();
        let mut taken = vec![false; gp.rules.len()];
        for (i, s) in states.iter().enumerate() {
            let set = &self.pred_sets[i];
            for (k, r) in gp.rules.iter().enumerate() {
                if !taken[k] && set.contains(gp.index.pred_of(r.head)) {
                    taken[k] = true;
                    rules.push(r.clone());
                }
            }
            bridges.extend(Self::bridges(gp, s, i + 1)?);
        }
        minimal_model_bridged(&gp.with_rules(rules, Vec::new()), &bridges).into_model()
    }
}

/// Πⁱ_S for every action: the induced program's rules over Predⁱ plus the
/// bridges of vertices choosing i.
pub fn split_program(p: &Program, gp: &GroundProgram, s: &State) -> Result<Vec<GroundProgram>> {
    let split = VicSplit::new(p, gp)?;
    let mut out = Vec::new();
    for (i, part) in split.parts.iter().enumerate() {
        let mut rules = part.rules.clone();
        for (b, a) in VicSplit::bridges(gp, s, i + 1)? {
            rules.push(crate::ground::GroundRule::bridge(b, a));
        }
        out.push(gp.with_rules(rules, Vec::new()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Vic2Run {
    pub state: State,
    pub model: Interpretation,
    /// Number of players flipped in each round.
    pub flips: Vec<usize>,
}

/// Start everyone on `default_action` and flip players whose other utility is
/// strictly higher until the state is a strong equilibrium.
pub fn find_se_vic2(p: &Program, gp: &GroundProgram, default_action: usize) -> Result<Vic2Run> {
    require(p, Some(2))?;
    if !(1..=2).contains(&default_action) {
        return Err(Error::BadAction { action: default_action, m: 2 });
    }
    find_se_two_choice(gp, default_action)
}

/// Flip loop without the classification check.
pub(crate) fn find_se_two_choice(gp: &GroundProgram, default_action: usize) -> Result<Vic2Run> {
    let other = 3 - default_action;
    let mut state = State::uniform(gp.vc.len(), default_action);
    let mut flips = Vec::new();
    loop {
        let model = minimal_model_bridged(gp, &state_bridges(gp, &state)?).into_model()?;
        let u = |k: usize, a: usize| model.get(gp.utility_atom(k, a - 1));
        let flip: Vec<usize> = (0..gp.vc.len())
            .into_par_iter()
            .filter(|&k| state.action(k) == default_action && u(k, default_action) + EPS_EQ < u(k, other))
            .collect();
        if flip.is_empty() {
            let stable = (0..gp.vc.len()).all(|k| u(k, state.action(k)) + EPS_EQ >= u(k, 3 - state.action(k)));
            if !stable {
                return Err(Error::NoProgress);
            }
            return Ok(Vic2Run { state, model, flips });
        }
        flips.push(flip.len());
        for k in flip {
            state.0[k] = other;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtremalModels {
    pub s12: State,
    pub s21: State,
    /// MM(Π_{S₁₂}): maximal on Pred¹, minimal on Pred².
    pub m12: Interpretation,
    /// MM(Π_{S₂₁}).
    pub m21: Interpretation,
    /// MM(Π¹_{S₂₁} ∪ Π²_{S₁₂}).
    pub mixed_low: Interpretation,
    /// MM(Π¹_{S₁₂} ∪ Π²_{S₂₁}).
    pub mixed_high: Interpretation,
    pub split: VicSplit,
}

pub fn extremal_models(p: &Program, gp: &GroundProgram) -> Result<ExtremalModels> {
    require(p, Some(2))?;
    let (r12, r21) = rayon::join(|| find_se_two_choice(gp, 1), || find_se_two_choice(gp, 2));
    let (r12, r21) = (r12?, r21?);
    let split = VicSplit::new(p, gp)?;
    let mixed_low = split.mixed_model(gp, &[&r21.state, &r12.state])?;
    let mixed_high = split.mixed_model(gp, &[&r12.state, &r21.state])?;
    Ok(ExtremalModels { s12: r12.state, s21: r21.state, m12: r12.model, m21: r21.model, mixed_low, mixed_high, split })
}

/// Entailment of `atom:mu` from the extremal equilibria: atoms of Pred¹ are
/// minimal under S₂₁, atoms of Pred² under S₁₂.
pub fn entails_vic2(p: &Program, gp: &GroundProgram, atom: AtomId, mu: f64) -> Result<Entailment> {
    let ext = extremal_models(p, gp)?;
    let side1 = ext.split.atom_sides[0][atom as usize];
    let side2 = ext.split.atom_sides[1][atom as usize];
    let low = match (side1, side2) {
        (true, true) => ext.m12.get(atom).min(ext.m21.get(atom)),
        (true, false) => ext.m21.get(atom),
        (false, true) => ext.m12.get(atom),
        (false, false) => return Err(Error::Query(format!("atom {} depends on no choice; entailment is not decided by the extremal models", gp.index.name(atom)))),
    };
    Ok(Entailment { holds: low >= mu - EPS_EQ, vacuous: false })
}
