use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-stochastic motif transition matrix; `rows[j][i]` is the probability of
/// motif `i` following motif `j`. Rows of motifs never seen with a successor
/// are all zero and flagged in `empty`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub rows: Vec<Vec<f64>>,
    pub empty: Vec<bool>,
}

impl TransitionMatrix {
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.rows.len();
        if self.empty.len() != k {
            return Err(Error::Schema("transition flags do not match rows".into()));
        }
        for (j, row) in self.rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Schema(format!("transition row {j} has {} entries, expected {k}", row.len())));
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Schema(format!("transition row {j} has invalid entries")));
            }
            let s: f64 = row.iter().sum();
            let ok = if self.empty[j] { s == 0.0 } else { (s - 1.0).abs() <= 1e-9 };
            if !ok {
                return Err(Error::Schema(format!("transition row {j} sums to {s}")));
            }
        }
        Ok(())
    }
}

/// Counts consecutive pairs inside each stream (never across streams) and
/// normalizes rows.
pub fn build_transition_matrix(streams: &[Vec<usize>], k: usize) -> Result<TransitionMatrix> {
    let mut counts = vec![vec![0u64; k]; k];
    for s in streams {
        for &m in s {
            if m >= k {
                return Err(Error::MotifOutOfRange { id: m, k });
            }
        }
        for w in s.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
    }
    let mut empty = vec![false; k];
    let rows = counts
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                empty[j] = true;
                vec![0.0; k]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok(TransitionMatrix { rows, empty })
}
