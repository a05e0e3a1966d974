//! Clustering agreement: normalized mutual information and pair-counting F-measure.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Joint counts of two labelings of the same items.
struct Contingency {
    n: u64,
    cells: Vec<u64>,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

impl Contingency {
    fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::LengthMismatch(pred.len(), truth.len()));
        }
        let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
        let mut rows: HashMap<usize, u64> = HashMap::new();
        let mut cols: HashMap<usize, u64> = HashMap::new();
        for (&p, &t) in pred.iter().zip(truth) {
            *joint.entry((p, t)).or_insert(0) += 1;
            *rows.entry(p).or_insert(0) += 1;
            *cols.entry(t).or_insert(0) += 1;
        }
        Ok(Self {
            n: pred.len() as u64,
            cells: joint.into_values().collect(),
            rows: rows.into_values().collect(),
            cols: cols.into_values().collect(),
        })
    }
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn pairs(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

/// Mutual information divided by the arithmetic mean of the two entropies.
/// Two single-cluster labelings score 1.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("empty labeling".into()));
    }
    let c = Contingency::new(pred, truth)?;
    let n = c.n as f64;
    let h_pred = entropy(&c.rows, n);
    let h_truth = entropy(&c.cols, n);
    let denom = 0.5 * (h_pred + h_truth);
    if denom <= 0.0 {
        return Ok(1.0);
    }
    // I = H(P) + H(T) - H(P, T)
    let mi = h_pred + h_truth - entropy(&c.cells, n);
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Pair-counting precision and recall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCounts {
    pub true_positive: u64,
    pub predicted_positive: u64,
    pub actual_positive: u64,
}

impl PairCounts {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        let c = Contingency::new(pred, truth)?;
        Ok(Self {
            true_positive: c.cells.iter().map(|&v| pairs(v)).sum(),
            predicted_positive: c.rows.iter().map(|&v| pairs(v)).sum(),
            actual_positive: c.cols.iter().map(|&v| pairs(v)).sum(),
        })
    }

    pub fn precision(&self) -> f64 {
        if self.predicted_positive == 0 {
            0.0
        } else {
            self.true_positive as f64 / self.predicted_positive as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.actual_positive == 0 {
            0.0
        } else {
            self.true_positive as f64 / self.actual_positive as f64
        }
    }
}

/// `(1 + b^2) P R / (b^2 P + R)`, zero when both are zero.
pub fn f_beta_from(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        return 0.0;
    }
    (1.0 + b2) * precision * recall / denom
}

/// Pair-counting F-measure. Zero when no pair is a true positive.
pub fn f_beta(pred: &[usize], truth: &[usize], beta: f64) -> Result<f64> {
    let c = PairCounts::new(pred, truth)?;
    if c.true_positive == 0 {
        return Ok(0.0);
    }
    Ok(f_beta_from(c.precision(), c.recall(), beta))
}
