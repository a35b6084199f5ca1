//! Candidate term pools: the action space of the term-appending policy.

use std::collections::BTreeSet;

use crate::search::SearchEnv;
use crate::{Error, Result};

/// One candidate term with its selection features.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolTerm {
    pub term: String,
    /// Corpus term id.
    pub term_id: u32,
    /// Embedding id (corpus id shifted by one; 0 is reserved for unknowns).
    pub nn_id: u32,
    /// [tf-idf normalized to the pool max, idf / ln N, 1/source rank, in-q0 flag]
    pub features: [f64; 4],
}

/// Deduplicated candidate terms for one query, in (source doc rank, tf-idf)
/// order. Empty when the original query retrieves nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidatePool {
    pub terms: Vec<PoolTerm>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Harvest the top-M tf-idf terms from each of the top-K documents retrieved
/// with q0. A term contributed by several documents keeps the features of its
/// best-ranked source. The pool is capped at K·M entries by construction.
pub fn build_candidate_pool(
    q0: &[String],
    env: &SearchEnv,
    k_docs: usize,
    m_terms: usize,
) -> Result<CandidatePool> {
    if k_docs == 0 || m_terms == 0 {
        return Err(Error::InvalidArg("build_candidate_pool: K_docs and M_terms must be >= 1".into()));
    }
    let hits = env.search(q0, k_docs)?;
    let q0_set: BTreeSet<&str> = q0.iter().map(|s| s.as_str()).collect();
    let n_docs = env.index.num_docs() as f64;
    let ln_n = n_docs.ln();
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut terms: Vec<PoolTerm> = Vec::new();
    for (rank0, hit) in hits.iter().enumerate() {
        let internal = env
            .index
            .doc_id_to_internal(&hit.doc_id)
            .expect("ranked doc must exist in index");
        for (term_id, tfidf) in env.top_tfidf_terms(internal, m_terms) {
            if !seen.insert(term_id) {
                continue;
            }
            let term = env.corpus.term(term_id).to_string();
            let df = env.index.doc_freq(term_id) as f64;
            let idf_norm = if ln_n > 0.0 { (n_docs / df).ln() / ln_n } else { 0.0 };
            let in_q0 = if q0_set.contains(term.as_str()) { 1.0 } else { 0.0 };
            terms.push(PoolTerm {
                nn_id: term_id + 1,
                term_id,
                term,
                features: [tfidf, idf_norm, 1.0 / (rank0 + 1) as f64, in_q0],
            });
        }
    }
    // normalize the raw tf-idf feature to the pool maximum
    let max_tfidf = terms.iter().map(|t| t.features[0]).fold(0.0f64, f64::max);
    if max_tfidf > 0.0 {
        for t in terms.iter_mut() {
            t.features[0] /= max_tfidf;
        }
    }
    Ok(CandidatePool { terms })
}
