//! Mini-batch k-means with k-means++ seeding and a greedy cluster balancing
//! pass.
//!
//! The balancing loop follows the published pseudocode with its loop
//! direction corrected: as printed, the inner loop moves items *out of* a
//! cluster while it is *smaller* than the target, which never terminates.
//! Here, clusters are visited in descending size order and trimmed *down* to
//! the target M by donating a uniformly chosen item to the nearest remaining
//! cluster. When M = ceil(N/K), a final top-up pass pulls items into any
//! cluster still below floor(N/K), so sizes end within [floor(N/K), ceil(N/K)].

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::partition::{Partition, PartitionStrategy};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct KmeansOpts {
    pub batch_size: usize,
    pub iterations: usize,
}

impl Default for KmeansOpts {
    fn default() -> Self {
        KmeansOpts { batch_size: 256, iterations: 100 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BalanceStats {
    /// Items moved while trimming oversized clusters.
    pub trim_moves: usize,
    /// Items parked on an already-processed cluster because no remaining
    /// cluster could take them.
    pub overflow_moves: usize,
    /// Items pulled up during the floor top-up pass.
    pub topup_moves: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroid(cluster: &[usize], features: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    if cluster.is_empty() {
        return c;
    }
    for &i in cluster {
        for (acc, v) in c.iter_mut().zip(&features[i]) {
            *acc += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= cluster.len() as f64);
    c
}

fn kmeans_plus_plus(features: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = features.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(features[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = features.iter().map(|f| sq_dist(f, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a center; pick uniformly
            rng.gen_range(0..n)
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(features[next].clone());
        for (i, f) in features.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(f, centers.last().unwrap()));
        }
    }
    centers
}

fn nearest_center(f: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(f, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Mini-batch k-means over per-query feature vectors, followed by cluster
/// balancing to M = ceil(N/K). `ids[i]` labels `features[i]`.
pub fn kmeans_partition(
    ids: &[String],
    features: &[Vec<f64>],
    k: usize,
    seed_val: u64,
    opts: &KmeansOpts,
    strategy: PartitionStrategy,
) -> Result<Partition> {
    if k < 2 {
        return Err(Error::InvalidArg("kmeans_partition: K must be >= 2".into()));
    }
    if ids.len() != features.len() {
        return Err(Error::DimensionMismatch {
            context: "kmeans_partition",
            expected: ids.len(),
            actual: features.len(),
        });
    }
    if features.is_empty() || features[0].is_empty() {
        return Err(Error::EmptyInput("kmeans_partition: features"));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::InvalidArg("kmeans_partition: ragged feature matrix".into()));
    }
    {
        let mut distinct: Vec<&Vec<f64>> = features.iter().collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        distinct.dedup();
        if distinct.len() < k {
            return Err(Error::Data(format!(
                "kmeans_partition: only {} distinct feature vectors for K = {k}",
                distinct.len()
            )));
        }
    }

    let mut rng = seed::rng(seed_val, "kmeans");
    let mut centers = kmeans_plus_plus(features, k, &mut rng);
    let mut counts = vec![0u64; k];
    let n = features.len();
    let batch = opts.batch_size.min(n);
    let indices: Vec<usize> = (0..n).collect();
    for _ in 0..opts.iterations {
        let sample: Vec<usize> =
            indices.choose_multiple(&mut rng, batch).copied().collect();
        let assigned: Vec<usize> = sample.iter().map(|&i| nearest_center(&features[i], &centers)).collect();
        for (&i, &c) in sample.iter().zip(&assigned) {
            counts[c] += 1;
            let lr = 1.0 / counts[c] as f64;
            for (cv, fv) in centers[c].iter_mut().zip(&features[i]) {
                *cv = (1.0 - lr) * *cv + lr * fv;
            }
        }
    }

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        clusters[nearest_center(&features[i], &centers)].push(i);
    }
    let m = n.div_ceil(k);
    let (clusters, _) = balance_clusters(clusters, features, m, &mut rng)?;
    let groups = clusters
        .into_iter()
        .map(|c| c.into_iter().map(|i| ids[i].clone()).collect())
        .collect();
    Ok(Partition { groups, strategy })
}

/// Greedy cluster balancing. Visits clusters in descending size order; while
/// a cluster exceeds M, a uniformly chosen item moves to the nearest (by
/// centroid distance) not-yet-visited cluster, re-sorting the remainder by
/// size after every transfer and updating both centroids. If M = ceil(N/K),
/// a top-up pass then pulls the closest items from the largest clusters into
/// any cluster below floor(N/K).
pub fn balance_clusters(
    mut clusters: Vec<Vec<usize>>,
    features: &[Vec<f64>],
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<usize>>, BalanceStats)> {
    if m == 0 {
        return Err(Error::InvalidArg("balance_clusters: M must be >= 1".into()));
    }
    let dim = features.first().map(|f| f.len()).unwrap_or(0);
    let kc = clusters.len();
    let mut stats = BalanceStats::default();
    let mut centroids: Vec<Vec<f64>> =
        clusters.iter().map(|c| centroid(c, features, dim)).collect();

    // visit order: descending size, stable on cluster index
    let mut order: Vec<usize> = (0..kc).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(clusters[c].len()));
    let mut remaining: Vec<usize> = order.clone();

    let add_to = |clusters: &mut Vec<Vec<usize>>, centroids: &mut Vec<Vec<f64>>, c: usize, item: usize| {
        let len = clusters[c].len() as f64;
        for (cv, fv) in centroids[c].iter_mut().zip(&features[item]) {
            *cv = (*cv * len + fv) / (len + 1.0);
        }
        clusters[c].push(item);
    };

    for &current in &order {
        remaining.retain(|&c| c != current);
        while clusters[current].len() > m {
            let pick = rng.gen_range(0..clusters[current].len());
            let item = clusters[current].swap_remove(pick);
            let target = remaining
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    sq_dist(&features[item], &centroids[a])
                        .total_cmp(&sq_dist(&features[item], &centroids[b]))
                        .then(a.cmp(&b))
                })
                .or_else(|| {
                    // no remaining cluster: park the overflow on the smallest
                    // already-processed cluster
                    stats.overflow_moves += 1;
                    (0..kc)
                        .filter(|&c| c != current)
                        .min_by_key(|&c| (clusters[c].len(), c))
                });
            match target {
                Some(t) => {
                    stats.trim_moves += 1;
                    add_to(&mut clusters, &mut centroids, t, item);
                }
                None => {
                    // single cluster: nothing to donate to
                    clusters[current].push(item);
                    break;
                }
            }
            remaining.sort_by_key(|&c| std::cmp::Reverse(clusters[c].len()));
        }
    }

    // top-up pass, only meaningful when M = ceil(N/K)
    let n: usize = clusters.iter().map(|c| c.len()).sum();
    if kc > 0 && m == n.div_ceil(kc) {
        let floor = n / kc;
        loop {
            let Some(under) = (0..kc).filter(|&c| clusters[c].len() < floor).min() else { break };
            let donor = (0..kc)
                .max_by_key(|&c| (clusters[c].len(), std::cmp::Reverse(c)))
                .expect("at least one cluster");
            if clusters[donor].len() <= floor {
                break;
            }
            // move the donor item closest to the undersized centroid
            let (pos, _) = clusters[donor]
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| {
                    sq_dist(&features[a], &centroids[under])
                        .total_cmp(&sq_dist(&features[b], &centroids[under]))
                        .then(a.cmp(&b))
                })
                .expect("donor non-empty");
            let item = clusters[donor].remove(pos);
            add_to(&mut clusters, &mut centroids, under, item);
            stats.topup_moves += 1;
        }
    }
    Ok((clusters, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(coords: &[(f64, f64)]) -> Vec<Vec<f64>> {
        coords.iter().map(|&(x, y)| vec![x, y]).collect()
    }

    fn sizes(clusters: &[Vec<usize>]) -> Vec<usize> {
        let mut s: Vec<usize> = clusters.iter().map(|c| c.len()).collect();
        s.sort_unstable();
        s
    }

    #[test]
    fn already_balanced_is_unchanged() {
        let features = points(&[(0.0, 0.0), (0.1, 0.0), (5.0, 5.0), (5.1, 5.0)]);
        let clusters = vec![vec![0, 1], vec![2, 3]];
        let mut rng = seed::rng(0, "bal");
        let (out, stats) = balance_clusters(clusters.clone(), &features, 2, &mut rng).unwrap();
        assert_eq!(out, clusters);
        assert_eq!(stats, BalanceStats::default());
    }

    #[test]
    fn forced_transfer_from_four_zero() {
        let features = points(&[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
        let clusters = vec![vec![0, 1, 2, 3], vec![]];
        let mut rng = seed::rng(1, "bal");
        let (out, stats) = balance_clusters(clusters, &features, 2, &mut rng).unwrap();
        assert_eq!(sizes(&out), vec![2, 2]);
        assert_eq!(stats.trim_moves, 2);
    }

    #[test]
    fn hand_trace_five_three_one() {
        // cluster 0: five points far on the right, all nearest to cluster 2's
        // centroid; cluster 1: three points near the origin; cluster 2: one
        // point on the right. Trimming c0 to M = 3 must send both donated
        // items to c2 (closest remaining every time), giving sizes {3, 3, 3}.
        let features = points(&[
            (10.0, 0.0),
            (10.0, 1.0),
            (10.0, 2.0),
            (10.0, 3.0),
            (10.0, 4.0),
            (0.0, 0.0),
            (0.0, 1.0),
            (0.0, 2.0),
            (9.0, 2.0),
        ]);
        let clusters = vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7], vec![8]];
        let mut rng = seed::rng(2, "bal");
        let (out, stats) = balance_clusters(clusters, &features, 3, &mut rng).unwrap();
        assert_eq!(out[0].len(), 3);
        assert_eq!(out[1], vec![5, 6, 7], "left cluster untouched");
        assert_eq!(out[2].len(), 3);
        assert!(out[2].contains(&8));
        assert_eq!(stats.trim_moves, 2);
        assert_eq!(stats.topup_moves, 0);
        // the two donated items are original members of cluster 0
        assert!(out[2].iter().filter(|&&i| i != 8).all(|&i| i <= 4));
    }

    #[test]
    fn balancing_preserves_the_item_multiset() {
        let features: Vec<Vec<f64>> = (0..13).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let clusters = vec![vec![0, 1, 2, 3, 4, 5, 6, 7, 8], vec![9, 10], vec![11], vec![12]];
        let mut rng = seed::rng(3, "bal");
        let m = 13usize.div_ceil(4);
        let (out, _) = balance_clusters(clusters, &features, m, &mut rng).unwrap();
        let mut all: Vec<usize> = out.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..13).collect::<Vec<_>>());
        let s = sizes(&out);
        assert!(*s.first().unwrap() >= 13 / 4 && *s.last().unwrap() <= m, "sizes {s:?}");
    }

    #[test]
    fn well_separated_blobs_recovered_then_balanced() {
        use std::collections::BTreeSet;
        let mut features = Vec::new();
        let mut ids = Vec::new();
        for i in 0..10 {
            features.push(vec![0.0 + 0.01 * i as f64, 0.0]);
            ids.push(format!("a{i}"));
        }
        for i in 0..10 {
            features.push(vec![100.0 + 0.01 * i as f64, 0.0]);
            ids.push(format!("b{i}"));
        }
        let p = kmeans_partition(&ids, &features, 2, 0, &KmeansOpts::default(), PartitionStrategy::KmeansQ)
            .unwrap();
        p.validate_disjoint_cover(&ids).unwrap();
        // each group is exactly one blob
        for group in &p.groups {
            let prefixes: BTreeSet<char> = group.iter().map(|s| s.chars().next().unwrap()).collect();
            assert_eq!(prefixes.len(), 1, "blob split across groups: {group:?}");
        }
    }

    #[test]
    fn identical_features_balance_to_equal_sizes() {
        let ids: Vec<String> = (0..9).map(|i| format!("q{i}")).collect();
        let features = vec![vec![1.0, 2.0]; 9];
        let err = kmeans_partition(&ids, &features, 3, 0, &KmeansOpts::default(), PartitionStrategy::KmeansQ);
        // fewer distinct vectors than K is an error by contract
        assert!(err.is_err());
        // but balancing identical features directly yields equal sizes
        let clusters = vec![vec![0, 1, 2, 3, 4, 5, 6, 7, 8], vec![], vec![]];
        let mut rng = seed::rng(5, "bal");
        let (out, _) = balance_clusters(clusters, &features, 3, &mut rng).unwrap();
        assert_eq!(sizes(&out), vec![3, 3, 3]);
    }

    #[test]
    fn kmeans_beats_random_assignment_on_wcss() {
        use rand::Rng;
        let mut rng = seed::rng(8, "wcss");
        let mut features = Vec::new();
        let mut ids = Vec::new();
        for i in 0..50 {
            let cx = if i % 2 == 0 { 0.0 } else { 8.0 };
            features.push(vec![cx + rng.gen::<f64>(), rng.gen::<f64>()]);
            ids.push(format!("q{i:02}"));
        }
        let wcss = |groups: &[Vec<String>]| -> f64 {
            groups
                .iter()
                .map(|g| {
                    let idx: Vec<usize> =
                        g.iter().map(|id| ids.iter().position(|x| x == id).unwrap()).collect();
                    let c = centroid(&idx, &features, 2);
                    idx.iter().map(|&i| sq_dist(&features[i], &c)).sum::<f64>()
                })
                .sum()
        };
        let km = kmeans_partition(&ids, &features, 2, 0, &KmeansOpts::default(), PartitionStrategy::KmeansQ)
            .unwrap();
        let rnd = crate::partition::random_partition(&ids, 2, 0).unwrap();
        assert!(wcss(&km.groups) <= wcss(&rnd.groups), "k-means should not lose to random");
    }

    #[test]
    fn kmeans_partition_is_deterministic() {
        let ids: Vec<String> = (0..30).map(|i| format!("q{i}")).collect();
        let features: Vec<Vec<f64>> =
            (0..30).map(|i| vec![(i % 5) as f64, (i / 5) as f64]).collect();
        let a = kmeans_partition(&ids, &features, 3, 4, &KmeansOpts::default(), PartitionStrategy::KmeansQa)
            .unwrap();
        let b = kmeans_partition(&ids, &features, 3, 4, &KmeansOpts::default(), PartitionStrategy::KmeansQa)
            .unwrap();
        assert_eq!(a, b);
    }
}
