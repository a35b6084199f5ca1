//! Cross-evaluation of partition-trained agents: build the s_ij score matrix
//! (agent i on partition j's held-out queries) and derive the partition
//! quality metrics.

use crate::metrics::{partition_metrics, PartitionMetrics};
use crate::Result;

/// Fill the N×N score matrix by invoking `score(i, j)` for every (agent,
/// partition) pair and compute the out-of-partition metrics. Requires N ≥ 3.
pub fn evaluate_partitioning<F>(n: usize, mut score: F) -> Result<(Vec<Vec<f64>>, PartitionMetrics)>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = score(i, j)?;
        }
    }
    let metrics = partition_metrics(&matrix)?;
    Ok((matrix, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_agents_give_constant_rows_and_zero_error() {
        let (matrix, m) = evaluate_partitioning(4, |_, j| Ok(0.3 + 0.1 * j as f64)).unwrap();
        assert_eq!(matrix[0], matrix[3]);
        assert!(m.oop_error.abs() < 1e-12);
    }

    #[test]
    fn too_few_partitions_rejected() {
        assert!(evaluate_partitioning(2, |_, _| Ok(0.0)).is_err());
    }
}
