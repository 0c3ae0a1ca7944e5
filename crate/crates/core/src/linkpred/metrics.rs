//! Ranking metrics for scored positive/negative edge lists.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dense::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::models::sigmoid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check_scores(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::ContractViolation(
            "ranking metrics need at least one positive and one negative score".into(),
        ));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::NumericFailure("NaN score".into()));
    }
    Ok(())
}

/// Scores labelled `true` for positives, with `-0.0` folded into `0.0` so
/// that sorting and equality agree.
fn labelled(pos: &[f64], neg: &[f64]) -> Vec<(f64, bool)> {
    pos.iter()
        .map(|&s| (s + 0.0, true))
        .chain(neg.iter().map(|&s| (s + 0.0, false)))
        .collect()
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
///
/// Computed from mid-rank sums in `O((m + n) log(m + n))`. Everything is kept
/// in integers (twice the rank sum) until the final division.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_scores(pos, neg)?;
    let mut all = labelled(pos, neg);
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut twice_pos_rank_sum: u128 = 0;
    let mut start = 0;
    while start < all.len() {
        let mut end = start;
        while end < all.len() && all[end].0 == all[start].0 {
            end += 1;
        }
        let n_pos_in_group = all[start..end].iter().filter(|e| e.1).count() as u128;
        // ranks start+1 ..= end share the mid-rank (start+1+end)/2
        twice_pos_rank_sum += n_pos_in_group * (start + 1 + end) as u128;
        start = end;
    }
    let (m, n) = (pos.len() as u128, neg.len() as u128);
    let twice_u = twice_pos_rank_sum - m * (m + 1);
    Ok(twice_u as f64 / (2 * m * n) as f64)
}

/// Orders scores descending; at equal scores negatives come first.
pub(crate) fn ranking_order(a: &(f64, bool), b: &(f64, bool)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Average precision: mean over positives of the precision at each
/// positive's rank. Ties are broken pessimistically (negatives ranked first).
pub fn average_precision(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_scores(pos, neg)?;
    let mut all = labelled(pos, neg);
    all.sort_by(ranking_order);
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (rank0, &(_, is_pos)) in all.iter().enumerate() {
        if is_pos {
            hits += 1;
            precision_sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(precision_sum / pos.len() as f64)
}

/// `sigmoid(z_u · z_v)` for each pair.
pub fn score_edges(z: &DenseMatrix, pairs: &[Edge]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(u, v)| {
            if u >= z.n_rows() || v >= z.n_rows() {
                return Err(Error::shape(
                    "score_edges",
                    format!("pair ({u}, {v}) with {} embeddings", z.n_rows()),
                ));
            }
            Ok(sigmoid(dot(z.row(u), z.row(v))))
        })
        .collect()
}

pub fn evaluate(z: &DenseMatrix, positives: &[Edge], negatives: &[Edge]) -> Result<MetricResult> {
    let pos = score_edges(z, positives)?;
    let neg = score_edges(z, negatives)?;
    Ok(MetricResult {
        auc: auc(&pos, &neg)?,
        ap: average_precision(&pos, &neg)?,
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2, 0.3]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4, 0.6, 0.5], &[0.4, 0.6, 0.5]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.4], &[0.6, 0.2]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1], &[0.9]).unwrap(), 0.0);
        assert!(auc(&[], &[0.1]).is_err());
        assert!(auc(&[0.1], &[f64::NAN]).is_err());
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.9, 0.8], &[0.1, 0.7]).unwrap(), 1.0);
        // single positive at the bottom of m + 1 items
        let m = 4;
        let neg = vec![0.9; m];
        assert_eq!(average_precision(&[0.1], &neg).unwrap(), 1.0 / (m + 1) as f64);
        let ap = average_precision(&[0.9, 0.5], &[0.7]).unwrap();
        assert!((ap - (0.5 + 2.0 / 3.0 * 0.5)).abs() < 1e-15);
        assert!((ap - 0.8333).abs() < 1e-4);
        // a tie puts the negative first
        assert_eq!(average_precision(&[0.5], &[0.5]).unwrap(), 0.5);
        assert!(average_precision(&[0.5], &[]).is_err());
    }

    #[test]
    fn score_examples() {
        let z = DenseMatrix::zeros(3, 2);
        assert_eq!(score_edges(&z, &[(0, 1), (1, 2)]).unwrap(), vec![0.5, 0.5]);
        let z = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let s = score_edges(&z, &[(0, 1)]).unwrap()[0];
        assert!((s - 0.9820).abs() < 1e-4);
        assert!(score_edges(&z, &[(0, 2)]).is_err());
    }
}
