//! Training-set partitioning: random equal-size splits, bootstrap bagging
//! samples, and balanced mini-batch k-means over query/answer embedding
//! features.

mod embed;
mod eval;
mod kmeans;

pub use embed::{
    load_feature_matrix, save_feature_matrix, train_ppmi_embeddings, CooccurrenceEmbeddings,
};
pub use eval::evaluate_partitioning;
pub use kmeans::{balance_clusters, kmeans_partition, BalanceStats, KmeansOpts};

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionStrategy {
    Random,
    Bagging,
    KmeansQ,
    KmeansA,
    KmeansQa,
}

impl PartitionStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            PartitionStrategy::Random => "random",
            PartitionStrategy::Bagging => "bagging",
            PartitionStrategy::KmeansQ => "kmeans-Q",
            PartitionStrategy::KmeansA => "kmeans-A",
            PartitionStrategy::KmeansQa => "kmeans-QA",
        }
    }
}

/// K groups of query ids. Random and k-means partitions are pairwise disjoint
/// and cover the input with sizes differing by at most one; bagging groups
/// are with-replacement multisets of full size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub groups: Vec<Vec<String>>,
    pub strategy: PartitionStrategy,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    /// Disjointness + cover check against the full id set (random/k-means).
    pub fn validate_disjoint_cover(&self, all_ids: &[String]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for group in &self.groups {
            for id in group {
                if !seen.insert(id.clone()) {
                    return Err(Error::Data(format!("partition: id {id} appears twice")));
                }
            }
        }
        let full: BTreeSet<String> = all_ids.iter().cloned().collect();
        if seen != full {
            return Err(Error::Data("partition: groups do not cover the id set".into()));
        }
        Ok(())
    }
}

/// Uniform shuffle followed by round-robin assignment into K groups.
pub fn random_partition(query_ids: &[String], k: usize, seed_val: u64) -> Result<Partition> {
    if k == 0 {
        return Err(Error::InvalidArg("random_partition: K must be >= 1".into()));
    }
    if k > query_ids.len() {
        return Err(Error::InvalidArg(format!(
            "random_partition: K = {k} exceeds {} queries",
            query_ids.len()
        )));
    }
    let mut shuffled = query_ids.to_vec();
    shuffled.shuffle(&mut seed::rng(seed_val, "random-partition"));
    let mut groups = vec![Vec::new(); k];
    for (i, id) in shuffled.into_iter().enumerate() {
        groups[i % k].push(id);
    }
    Ok(Partition { groups, strategy: PartitionStrategy::Random })
}

/// K independent bootstrap samples (with replacement, full size each).
pub fn bootstrap_partition(query_ids: &[String], k: usize, seed_val: u64) -> Result<Partition> {
    if k == 0 {
        return Err(Error::InvalidArg("bootstrap_partition: K must be >= 1".into()));
    }
    if query_ids.is_empty() {
        return Err(Error::EmptyInput("bootstrap_partition: query_ids"));
    }
    let mut rng = seed::rng(seed_val, "bootstrap-partition");
    let n = query_ids.len();
    let groups = (0..k)
        .map(|_| (0..n).map(|_| query_ids[rng.gen_range(0..n)].clone()).collect())
        .collect();
    Ok(Partition { groups, strategy: PartitionStrategy::Bagging })
}

/// Write `qid<TAB>partition_index` lines.
pub fn save_partition_tsv(path: &Path, partition: &Partition) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for (gi, group) in partition.groups.iter().enumerate() {
        for qid in group {
            writeln!(w, "{qid}\t{gi}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a partition file back; the strategy tag is not stored in the TSV and
/// must be supplied.
pub fn load_partition_tsv(path: &Path, strategy: PartitionStrategy) -> Result<Partition> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, idx) = line.split_once('\t').ok_or_else(|| {
            Error::Data(format!("{}:{}: expected qid<TAB>index", path.display(), lineno + 1))
        })?;
        let idx: usize = idx
            .parse()
            .map_err(|e| Error::Data(format!("{}:{}: bad index: {e}", path.display(), lineno + 1)))?;
        if groups.len() <= idx {
            groups.resize_with(idx + 1, Vec::new);
        }
        groups[idx].push(qid.to_string());
    }
    Ok(Partition { groups, strategy })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i:03}")).collect()
    }

    #[test]
    fn k_one_is_the_full_set_and_k_n_is_singletons() {
        let all = ids(6);
        let p1 = random_partition(&all, 1, 0).unwrap();
        assert_eq!(p1.groups.len(), 1);
        assert_eq!(p1.groups[0].len(), 6);
        let pn = random_partition(&all, 6, 0).unwrap();
        assert!(pn.groups.iter().all(|g| g.len() == 1));
        pn.validate_disjoint_cover(&all).unwrap();
    }

    #[test]
    fn sizes_differ_by_at_most_one() {
        let all = ids(10);
        let p = random_partition(&all, 3, 7).unwrap();
        let mut sizes: Vec<usize> = p.groups.iter().map(|g| g.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        p.validate_disjoint_cover(&all).unwrap();
    }

    #[test]
    fn k_larger_than_n_rejected() {
        assert!(random_partition(&ids(3), 4, 0).is_err());
    }

    #[test]
    fn bootstrap_single_id_repeats_it() {
        let all = ids(1);
        let p = bootstrap_partition(&all, 3, 0).unwrap();
        for g in &p.groups {
            assert_eq!(g.len(), 1);
            assert_eq!(g[0], "q000");
        }
    }

    #[test]
    fn bootstrap_unique_fraction_near_63_percent() {
        let all = ids(1000);
        let mut total_unique = 0.0;
        for s in 0..20 {
            let p = bootstrap_partition(&all, 1, s).unwrap();
            let unique: BTreeSet<&String> = p.groups[0].iter().collect();
            total_unique += unique.len() as f64 / 1000.0;
        }
        let mean = total_unique / 20.0;
        assert!((0.61..=0.65).contains(&mean), "unique fraction {mean}");
    }

    #[test]
    fn partitions_are_deterministic_per_seed() {
        let all = ids(50);
        assert_eq!(random_partition(&all, 4, 9).unwrap(), random_partition(&all, 4, 9).unwrap());
        assert_eq!(
            bootstrap_partition(&all, 4, 9).unwrap(),
            bootstrap_partition(&all, 4, 9).unwrap()
        );
        assert_ne!(random_partition(&all, 4, 9).unwrap(), random_partition(&all, 4, 10).unwrap());
    }

    #[test]
    fn partition_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.tsv");
        let p = random_partition(&ids(9), 3, 1).unwrap();
        save_partition_tsv(&path, &p).unwrap();
        let q = load_partition_tsv(&path, PartitionStrategy::Random).unwrap();
        assert_eq!(p.groups, q.groups);
    }
}
