//! Partition-quality metrics over the cross-evaluation score matrix s_ij
//! (row i: agent trained on partition i; column j: evaluated on partition j).

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionMetrics {
    /// E_i[E_{j≠i}[s_ij]] — generalization capability outside the home partition.
    pub oop_score: f64,
    /// E_i[V_{j≠i}[s_ij]] with a K−2 denominator — stability outside the home partition.
    pub oop_variance: f64,
    /// E_i[s_ii − E_{j≠i}[s_ij]] — generalization gap against the home partition.
    pub oop_error: f64,
}

/// Compute the out-of-partition score, variance, and error of an N×N score
/// matrix given as rows. Requires N ≥ 3 (the variance divides by N−2).
pub fn partition_metrics(scores: &[Vec<f64>]) -> Result<PartitionMetrics> {
    let n = scores.len();
    if n < 3 {
        return Err(Error::InvalidArg(format!("partition_metrics: need N >= 3, got {n}")));
    }
    for row in scores {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                context: "partition_metrics",
                expected: n,
                actual: row.len(),
            });
        }
    }
    let mut score_sum = 0.0;
    let mut var_sum = 0.0;
    let mut err_sum = 0.0;
    for i in 0..n {
        let off: Vec<f64> =
            (0..n).filter(|&j| j != i).map(|j| scores[i][j]).collect();
        let mean = off.iter().sum::<f64>() / off.len() as f64;
        let var = off.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 2) as f64;
        score_sum += mean;
        var_sum += var;
        err_sum += scores[i][i] - mean;
    }
    Ok(PartitionMetrics {
        oop_score: score_sum / n as f64,
        oop_variance: var_sum / n as f64,
        oop_error: err_sum / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matrix_collapses() {
        let m = vec![vec![0.4; 4]; 4];
        let pm = partition_metrics(&m).unwrap();
        assert!((pm.oop_score - 0.4).abs() < 1e-12);
        assert!(pm.oop_variance.abs() < 1e-30);
        assert!(pm.oop_error.abs() < 1e-12);
    }

    #[test]
    fn identity_matrix_shows_full_gap() {
        let n = 4;
        let m: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let pm = partition_metrics(&m).unwrap();
        assert_eq!(pm.oop_score, 0.0);
        assert_eq!(pm.oop_error, 1.0);
        assert_eq!(pm.oop_variance, 0.0);
    }

    #[test]
    fn random_matrix_matches_hand_spreadsheet() {
        // 4×4 values evaluated by hand
        let m = vec![
            vec![0.9, 0.2, 0.4, 0.6],
            vec![0.1, 0.8, 0.3, 0.5],
            vec![0.7, 0.6, 0.95, 0.2],
            vec![0.3, 0.4, 0.1, 0.85],
        ];
        let pm = partition_metrics(&m).unwrap();
        // row off-diagonal means: 0.4, 0.3, 0.5, 8/30
        let means = [0.4, 0.3, 0.5, 0.8 / 3.0];
        let score = means.iter().sum::<f64>() / 4.0;
        assert!((pm.oop_score - score).abs() < 1e-12);
        // row variances with K−2 = 2 denominator
        let v1 = ((0.2f64 - 0.4).powi(2) + (0.4f64 - 0.4).powi(2) + (0.6f64 - 0.4).powi(2)) / 2.0;
        let v2 = ((0.1f64 - 0.3).powi(2) + (0.3f64 - 0.3).powi(2) + (0.5f64 - 0.3).powi(2)) / 2.0;
        let v3 = ((0.7f64 - 0.5).powi(2) + (0.6f64 - 0.5).powi(2) + (0.2f64 - 0.5).powi(2)) / 2.0;
        let m4 = 0.8 / 3.0;
        let v4 = ((0.3f64 - m4).powi(2) + (0.4f64 - m4).powi(2) + (0.1f64 - m4).powi(2)) / 2.0;
        let var = (v1 + v2 + v3 + v4) / 4.0;
        assert!((pm.oop_variance - var).abs() < 1e-12);
        let err = ((0.9 - 0.4) + (0.8 - 0.3) + (0.95 - 0.5) + (0.85 - m4)) / 4.0;
        assert!((pm.oop_error - err).abs() < 1e-12);
    }

    #[test]
    fn small_or_ragged_matrices_rejected() {
        assert!(partition_metrics(&[vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(partition_metrics(&[vec![1.0; 3], vec![1.0; 2], vec![1.0; 3]]).is_err());
    }
}
