//! Query environment: the agent-facing surface. A query goes in; a ranked
//! list and a recall reward come out. The environment is stateless and safe
//! for unlimited concurrent readers.

use std::collections::BTreeSet;

use crate::metrics::recall_at_k;
use crate::search::{bm25_search, Corpus, InvertedIndex, RankedList};
use crate::Result;

/// Immutable corpus + index bundle.
pub struct SearchEnv {
    pub corpus: Corpus,
    pub index: InvertedIndex,
}

impl SearchEnv {
    pub fn new(corpus: Corpus, index: InvertedIndex) -> SearchEnv {
        SearchEnv { corpus, index }
    }

    /// Map surface tokens to corpus term ids, dropping unknown tokens.
    pub fn term_ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.corpus.term_id(t)).collect()
    }

    /// BM25 search over surface tokens.
    pub fn search(&self, tokens: &[String], k: usize) -> Result<RankedList> {
        bm25_search(&self.index, &self.term_ids(tokens), k)
    }

    /// One environment interaction: ranked list plus Recall@K reward.
    pub fn query(
        &self,
        tokens: &[String],
        k: usize,
        relevant: &BTreeSet<String>,
    ) -> Result<(RankedList, f64)> {
        query_environment(&self.index, &self.term_ids(tokens), k, relevant)
    }

    /// Distinct (term id, tf) pairs of the document at internal index,
    /// ascending by term id.
    pub fn doc_term_counts(&self, internal: u32) -> Vec<(u32, u32)> {
        let doc = self.corpus.doc(self.index.corpus_index(internal));
        let mut counts: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
        for &t in &doc.tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut out: Vec<(u32, u32)> = counts.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Top-n terms of a document by tf·ln(N/df), ties broken by ascending
    /// term string so expansion is deterministic.
    pub fn top_tfidf_terms(&self, internal: u32, n: usize) -> Vec<(u32, f64)> {
        let n_docs = self.index.num_docs() as f64;
        let mut scored: Vec<(u32, f64)> = self
            .doc_term_counts(internal)
            .into_iter()
            .map(|(term, tf)| {
                let df = self.index.doc_freq(term) as f64;
                (term, tf as f64 * (n_docs / df).ln())
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1).then_with(|| self.corpus.term(a.0).cmp(self.corpus.term(b.0)))
        });
        scored.truncate(n);
        scored
    }
}

/// Search the index and compute the Recall@K reward against `relevant`.
pub fn query_environment(
    index: &InvertedIndex,
    query: &[u32],
    k: usize,
    relevant: &BTreeSet<String>,
) -> Result<(RankedList, f64)> {
    let ranked = bm25_search(index, query, k)?;
    let reward = recall_at_k(&ranked, relevant, k)?;
    Ok((ranked, reward))
}
