//! Binary-relevance retrieval metrics and token-level F1.

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::search::RankedList;
use crate::{Error, Result};

fn require_relevant(relevant: &BTreeSet<String>, what: &'static str) -> Result<()> {
    if relevant.is_empty() {
        return Err(Error::Data(format!("{what}: empty relevant set (undefined)")));
    }
    Ok(())
}

/// R@K = |D_K ∩ D*| / |D*|.
pub fn recall_at_k(ranked: &RankedList, relevant: &BTreeSet<String>, k: usize) -> Result<f64> {
    require_relevant(relevant, "recall_at_k")?;
    let hits = ranked.iter().take(k).filter(|d| relevant.contains(&d.doc_id)).count();
    Ok(hits as f64 / relevant.len() as f64)
}

/// Mean average precision: mean over all relevant documents of the precision
/// at their rank; relevant documents never retrieved contribute 0.
pub fn map(ranked: &RankedList, relevant: &BTreeSet<String>) -> Result<f64> {
    require_relevant(relevant, "map")?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranked.iter().enumerate() {
        if relevant.contains(&doc.doc_id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Precision at rank |D*|.
pub fn r_precision(ranked: &RankedList, relevant: &BTreeSet<String>) -> Result<f64> {
    require_relevant(relevant, "r_precision")?;
    let r = relevant.len();
    let hits = ranked.iter().take(r).filter(|d| relevant.contains(&d.doc_id)).count();
    Ok(hits as f64 / r as f64)
}

/// Reciprocal rank of the first relevant document; 0 when none is retrieved.
pub fn mrr(ranked: &RankedList, relevant: &BTreeSet<String>) -> Result<f64> {
    require_relevant(relevant, "mrr")?;
    for (i, doc) in ranked.iter().enumerate() {
        if relevant.contains(&doc.doc_id) {
            return Ok(1.0 / (i + 1) as f64);
        }
    }
    Ok(0.0)
}

/// NDCG with binary gains, discount 1/log2(rank+1), and the ideal ranking
/// placing every relevant document at the top.
pub fn ndcg(ranked: &RankedList, relevant: &BTreeSet<String>) -> Result<f64> {
    require_relevant(relevant, "ndcg")?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .enumerate()
        .filter(|(_, d)| relevant.contains(&d.doc_id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let idcg: f64 = (1..=relevant.len()).map(discount).sum();
    Ok(dcg / idcg)
}

/// Token-level F1: harmonic mean of bag-of-tokens precision and recall, with
/// multiset intersection counts.
pub fn token_f1(prediction: &[String], truth: &[String]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Data("token_f1: empty truth".into()));
    }
    if prediction.is_empty() {
        return Ok(0.0);
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in truth {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0i64;
    for p in prediction {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return Ok(0.0);
    }
    let precision = overlap as f64 / prediction.len() as f64;
    let recall = overlap as f64 / truth.len() as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Oracle: for each query, the best metric value attainable over its
/// candidates; macro-averaged over queries.
pub fn oracle_score(per_query_candidate_scores: &[Vec<f64>]) -> Result<f64> {
    if per_query_candidate_scores.is_empty() {
        return Err(Error::EmptyInput("oracle_score: no queries"));
    }
    let mut total = 0.0;
    for scores in per_query_candidate_scores {
        if scores.is_empty() {
            return Err(Error::EmptyInput("oracle_score: query with no candidates"));
        }
        total += scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(total / per_query_candidate_scores.len() as f64)
}
