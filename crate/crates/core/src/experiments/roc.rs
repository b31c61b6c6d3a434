//! ROC curves of a score threshold classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// (FPR, TPR) from (0,0) to (1,1), one point per distinct score.
    pub points: Vec<(f64, f64)>,
    pub auroc: f64,
    /// Validation users with their score and whether they back choice 1.
    pub scores: Vec<(String, f64, bool)>,
    pub runtime_ms: u64,
}

/// Sweeps the threshold over every distinct score (plus ±∞): a vertex is
/// predicted positive when its score exceeds the threshold. Tied scores move
/// the curve diagonally. AUROC is the trapezoid area.
pub fn roc_curve(scored: &[(f64, bool)]) -> Result<(Vec<(f64, f64)>, f64)> {
    let pos = scored.iter().filter(|s| s.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Experiment(format!("ROC needs both classes; got {pos} positive and {neg} negative")));
    }
    if scored.iter().any(|s| !s.0.is_finite()) {
        return Err(Error::Experiment("scores must be finite".into()));
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auroc = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let p = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let q = *points.last().unwrap();
        auroc += (p.0 - q.0) * (p.1 + q.1) / 2.0;
        points.push(p);
        i = j;
    }
    Ok((points, auroc))
}
