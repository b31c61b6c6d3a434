//! Party preference coefficients from page likes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Like;

pub const PARTIES: [&str; 3] = ["p1", "p2", "p3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPrefs {
    pub user: String,
    /// Likes per party, in the table's party order.
    pub likes: Vec<u32>,
    /// likes / total likes.
    pub rho: Vec<f64>,
    /// Index of the party with the largest coefficient; ties go to the lowest index.
    pub supporter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTable {
    pub parties: Vec<String>,
    /// Users with at least one like on a party page, sorted by name.
    pub users: Vec<UserPrefs>,
}

impl PreferenceTable {
    pub fn get(&self, user: &str) -> Option<&UserPrefs> {
        self.users.binary_search_by(|u| u.user.as_str().cmp(user)).ok().map(|i| &self.users[i])
    }
}

/// Counts likes per user on pages classified under `parties` and
/// normalises them. Likes of any other category are ignored.
pub fn compute_rho(likes: &[Like], parties: &[&str]) -> PreferenceTable {
    let mut counts: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for l in likes {
        if let Some(i) = parties.iter().position(|p| *p == l.category) {
            counts.entry(l.user.as_str()).or_insert_with(|| vec![0; parties.len()])[i] += 1;
        }
    }
    let users = counts
        .into_iter()
        .map(|(user, likes)| {
            let total: u32 = likes.iter().sum();
            let rho: Vec<f64> = likes.iter().map(|&c| c as f64 / total as f64).collect();
            let supporter = (0..rho.len()).fold(0, |best, i| if rho[i] > rho[best] { i } else { best });
            UserPrefs { user: user.to_string(), likes, rho, supporter }
        })
        .collect();
    PreferenceTable { parties: parties.iter().map(|s| s.to_string()).collect(), users }
}

/// Two groups of parties competing for users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Competition {
    pub label: u32,
    /// Party indices behind choice 1 and choice 2.
    pub side1: Vec<usize>,
    pub side2: Vec<usize>,
}

impl Competition {
    /// 1: p2 vs p3, 2: p2+p3 vs p1, 3: p2 vs p1, 4: p3 vs p1.
    pub fn standard(label: u32) -> Result<Self> {
        let (side1, side2) = match label {
            1 => (vec![1], vec![2]),
            2 => (vec![1, 2], vec![0]),
            3 => (vec![1], vec![0]),
            4 => (vec![2], vec![0]),
            _ => return Err(Error::Experiment(format!("unknown competition {label}; expected 1-4"))),
        };
        Ok(Competition { label, side1, side2 })
    }

    /// Choice of the user's supporter party, if it takes part.
    pub fn side_of(&self, u: &UserPrefs) -> Option<usize> {
        if self.side1.contains(&u.supporter) {
            Some(1)
        } else if self.side2.contains(&u.supporter) {
            Some(2)
        } else {
            None
        }
    }

    /// (u₁, u₂): each side's share of the coefficients of both sides.
    pub fn utilities(&self, u: &UserPrefs) -> Option<(f64, f64)> {
        let s1: f64 = self.side1.iter().map(|&i| u.rho[i]).sum();
        let s2: f64 = self.side2.iter().map(|&i| u.rho[i]).sum();
        (s1 + s2 > 0.0).then(|| (s1 / (s1 + s2), s2 / (s1 + s2)))
    }
}
