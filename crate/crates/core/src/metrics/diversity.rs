//! Diversity metrics over sets of reformulations: mean pairwise cosine of
//! token-count vectors (pCos), mean pairwise sentence-level BLEU (pBLEU),
//! paraphrase-in-k-gram-changes (PINC, K = 4), and the standard deviation of
//! reformulation lengths. pCos, pBLEU, and PINC are reported ×100.

use std::collections::HashMap;

use crate::{Error, Result};

/// The reformulated queries produced for one original query.
pub type ReformulationSet = Vec<Vec<String>>;

fn check_sets(sets: &[ReformulationSet], min_size: usize, what: &'static str) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    for set in sets {
        if set.len() < min_size {
            return Err(Error::Data(format!("{what}: set smaller than {min_size}")));
        }
    }
    Ok(())
}

fn count_vector(tokens: &[String]) -> HashMap<&str, f64> {
    let mut counts: HashMap<&str, f64> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    counts
}

fn cosine(a: &[String], b: &[String]) -> f64 {
    let ca = count_vector(a);
    let cb = count_vector(b);
    let dot: f64 = ca.iter().filter_map(|(t, x)| cb.get(t).map(|y| x * y)).sum();
    let na: f64 = ca.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = cb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Mean over all ordered pairs q ≠ q' within each set, then mean over sets.
fn mean_pairwise<F: Fn(&[String], &[String]) -> f64>(sets: &[ReformulationSet], f: F) -> f64 {
    let mut set_means = Vec::with_capacity(sets.len());
    for set in sets {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (i, q) in set.iter().enumerate() {
            for (j, q2) in set.iter().enumerate() {
                if i != j {
                    sum += f(q, q2);
                    pairs += 1;
                }
            }
        }
        set_means.push(sum / pairs as f64);
    }
    set_means.iter().sum::<f64>() / set_means.len() as f64
}

/// Mean pairwise cosine similarity of token count vectors, ×100. Lower means
/// more diverse.
pub fn pcos(sets: &[ReformulationSet]) -> Result<f64> {
    check_sets(sets, 2, "pcos")?;
    Ok(100.0 * mean_pairwise(sets, cosine))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts: HashMap<Vec<&str>, usize> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(|t| t.as_str()).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU of `hyp` against `ref_`, max order 4, with add-one
/// smoothing on the n-gram precisions for n ≥ 2. Orders the hypothesis is too
/// short to produce are skipped and the geometric mean renormalizes over the
/// remaining orders, so identical short pairs still score 1.
fn sentence_bleu(hyp: &[String], ref_: &[String]) -> f64 {
    const MAX_ORDER: usize = 4;
    if hyp.is_empty() || ref_.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut used = 0usize;
    for n in 1..=MAX_ORDER {
        let total = hyp.len().saturating_sub(n - 1);
        if total == 0 {
            continue;
        }
        let hyp_counts = ngram_counts(hyp, n);
        let ref_counts = ngram_counts(ref_, n);
        let mut matches = 0usize;
        for (gram, &count) in &hyp_counts {
            if let Some(&rc) = ref_counts.get(gram) {
                matches += count.min(rc);
            }
        }
        let (num, den) = if n == 1 {
            (matches as f64, total as f64)
        } else {
            (matches as f64 + 1.0, total as f64 + 1.0)
        };
        if num == 0.0 {
            return 0.0;
        }
        log_sum += (num / den).ln();
        used += 1;
    }
    if used == 0 {
        return 0.0;
    }
    let geo = (log_sum / used as f64).exp();
    let bp = if hyp.len() < ref_.len() {
        (1.0 - ref_.len() as f64 / hyp.len() as f64).exp()
    } else {
        1.0
    };
    bp * geo
}

/// Mean pairwise sentence-level BLEU, ×100. Lower means more diverse.
pub fn pbleu(sets: &[ReformulationSet]) -> Result<f64> {
    check_sets(sets, 2, "pbleu")?;
    Ok(100.0 * mean_pairwise(sets, sentence_bleu))
}

fn ngram_set(tokens: &[String], n: usize) -> Vec<Vec<&str>> {
    let mut grams: Vec<Vec<&str>> = ngram_counts(tokens, n).into_keys().collect();
    grams.sort_unstable();
    grams
}

/// PINC for an ordered pair (q, q'): the average over k-gram orders of the
/// fraction of q' k-grams not present in q. Orders where q' has no k-grams
/// are skipped and K renormalizes to the available orders.
fn pinc_pair(q: &[String], q2: &[String]) -> f64 {
    const MAX_ORDER: usize = 4;
    let mut sum = 0.0;
    let mut used = 0usize;
    for n in 1..=MAX_ORDER {
        let target = ngram_set(q2, n);
        if target.is_empty() {
            continue;
        }
        let source = ngram_set(q, n);
        let overlap = target.iter().filter(|g| source.binary_search(g).is_ok()).count();
        sum += 1.0 - overlap as f64 / target.len() as f64;
        used += 1;
    }
    if used == 0 {
        return 0.0;
    }
    sum / used as f64
}

/// Mean pairwise PINC, ×100. Higher means more diverse.
pub fn pinc(sets: &[ReformulationSet]) -> Result<f64> {
    check_sets(sets, 2, "pinc")?;
    Ok(100.0 * mean_pairwise(sets, pinc_pair))
}

/// Mean over sets of the population standard deviation of reformulation
/// lengths within the set.
pub fn length_std(sets: &[ReformulationSet]) -> Result<f64> {
    check_sets(sets, 2, "length_std")?;
    let mut total = 0.0;
    for set in sets {
        let lens: Vec<f64> = set.iter().map(|q| q.len() as f64).collect();
        let mean = lens.iter().sum::<f64>() / lens.len() as f64;
        let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lens.len() as f64;
        total += var.sqrt();
    }
    Ok(total / sets.len() as f64)
}
