//! Interpretations over a ground atom index, the lattice operations and the
//! satisfaction relation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::function::EPS_EQ;
use crate::ground::{AtomId, AtomIndex, GroundProgram, GroundRule, VcInstance};

#[derive(Debug, Clone)]
pub struct Interpretation {
    index: Arc<AtomIndex>,
    values: Vec<f64>,
}

impl Interpretation {
    /// The bottom element: every atom maps to 0.
    pub fn bottom(index: Arc<AtomIndex>) -> Self {
        let n = index.len();
        Interpretation { index, values: vec![0.0; n] }
    }

    pub fn from_values(index: Arc<AtomIndex>, values: Vec<f64>) -> Result<Self> {
        if values.len() != index.len() {
            return Err(Error::IndexMismatch);
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("interpretation value {v} outside [0,1]")));
        }
        Ok(Interpretation { index, values })
    }

    pub(crate) fn from_raw(index: Arc<AtomIndex>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), index.len());
        Interpretation { index, values }
    }

    /// Builds an interpretation from (display name, value) pairs; the rest is 0.
    pub fn from_named(index: Arc<AtomIndex>, pairs: &[(&str, f64)]) -> Result<Self> {
        let mut values = vec![0.0; index.len()];
        for (name, v) in pairs {
            values[index.id_by_name(name)? as usize] = *v;
        }
        Interpretation::from_values(index, values)
    }

    pub fn index(&self) -> &Arc<AtomIndex> {
        &self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, a: AtomId) -> f64 {
        self.values[a as usize]
    }

    pub fn set(&mut self, a: AtomId, v: f64) {
        self.values[a as usize] = v.clamp(0.0, 1.0);
    }

    /// Value by display name.
    pub fn value_of(&self, name: &str) -> Result<f64> {
        Ok(self.get(self.index.id_by_name(name)?))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn same_index(&self, other: &Interpretation) -> Result<()> {
        if Arc::ptr_eq(&self.index, &other.index) || self.index.atoms() == other.index.atoms() {
            Ok(())
        } else {
            Err(Error::IndexMismatch)
        }
    }

    fn zip_with(&self, other: &Interpretation, f: impl Fn(f64, f64) -> f64) -> Result<Interpretation> {
        self.same_index(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Interpretation { index: self.index.clone(), values })
    }

    pub fn meet(&self, other: &Interpretation) -> Result<Interpretation> {
        self.zip_with(other, f64::min)
    }

    pub fn join(&self, other: &Interpretation) -> Result<Interpretation> {
        self.zip_with(other, f64::max)
    }

    /// Pointwise ≤ (exact).
    pub fn leq(&self, other: &Interpretation) -> Result<bool> {
        self.same_index(other)?;
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| a <= b))
    }

    /// Pointwise ≤ up to `tol`.
    pub fn leq_tol(&self, other: &Interpretation, tol: f64) -> Result<bool> {
        self.same_index(other)?;
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| *a <= *b + tol))
    }

    pub fn max_diff(&self, other: &Interpretation) -> Result<f64> {
        self.same_index(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn approx_eq(&self, other: &Interpretation, tol: f64) -> bool {
        self.max_diff(other).map_or(false, |d| d <= tol)
    }

    /// Atoms with their values, in id order.
    pub fn iter(&self) -> impl Iterator<Item = (AtomId, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| (i as AtomId, *v))
    }
}

/// I ⊨ A:μ iff I(A) ≥ μ.
pub fn satisfies_atom(i: &Interpretation, a: AtomId, mu: f64) -> bool {
    i.get(a) >= mu - EPS_EQ
}

/// A ground rule is satisfied when its head reaches the rule's value, or some
/// condition fails.
pub fn satisfies_rule(gp: &GroundProgram, i: &Interpretation, r: &GroundRule) -> bool {
    match gp.rule_value(r, i.values()) {
        None => true,
        Some(v) => satisfies_atom(i, r.head, v),
    }
}

/// A VC instance is satisfied when some pair has I(Bᵢ) = I(Aᵢ) and every other
/// decision atom is 0.
pub fn satisfies_vc(i: &Interpretation, vc: &VcInstance) -> bool {
    chosen_pair(i, vc).is_some()
}

/// Index of the pair that satisfies the VC instance, preferring a positive one.
pub fn chosen_pair(i: &Interpretation, vc: &VcInstance) -> Option<usize> {
    let m = vc.decisions.len();
    let zero = |k: usize| i.get(vc.decisions[k]).abs() <= EPS_EQ;
    let candidates = (0..m).filter(|&k| (i.get(vc.decisions[k]) - i.get(vc.utilities[k])).abs() <= EPS_EQ && (0..m).all(|j| j == k || zero(j)));
    let mut first = None;
    for k in candidates {
        if i.get(vc.decisions[k]) > EPS_EQ {
            return Some(k);
        }
        first.get_or_insert(k);
    }
    first
}

/// I is a model: every ground rule and every VC instance is satisfied.
pub fn is_model(gp: &GroundProgram, i: &Interpretation) -> Result<bool> {
    check_index(gp, i)?;
    Ok(gp.rules.iter().all(|r| satisfies_rule(gp, i, r)) && gp.vc.iter().all(|vc| satisfies_vc(i, vc)))
}

pub(crate) fn check_index(gp: &GroundProgram, i: &Interpretation) -> Result<()> {
    if Arc::ptr_eq(&gp.index, i.index()) || gp.index.atoms() == i.index().atoms() {
        Ok(())
    } else {
        Err(Error::IndexMismatch)
    }
}
