//! Immutable inverted index with BM25 ranking.

use std::collections::HashMap;

use crate::search::Corpus;
use crate::{Error, Result};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// One scored document in a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Ordered (doc_id, score) pairs, strictly sorted by (score desc, doc_id asc)
/// with no duplicate doc ids.
pub type RankedList = Vec<ScoredDoc>;

#[derive(Debug, Clone, Copy)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// Inverted index over a corpus. Documents are held in ascending `doc_id`
/// order, so postings sorted by internal index are sorted by doc id as well.
/// The index is immutable after build and safe to share across threads.
#[derive(Debug)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    /// Internal index of every document ordered like `doc_ids`.
    corpus_doc_idx: Vec<usize>,
    postings: Vec<Vec<Posting>>,
    doc_freq: Vec<u32>,
    avg_doc_len: f64,
    k1: f64,
    b: f64,
}

impl InvertedIndex {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn doc_id(&self, internal: u32) -> &str {
        &self.doc_ids[internal as usize]
    }

    /// Internal index of a document id (doc ids are held sorted).
    pub fn doc_id_to_internal(&self, doc_id: &str) -> Option<u32> {
        self.doc_ids.binary_search_by(|d| d.as_str().cmp(doc_id)).ok().map(|i| i as u32)
    }

    pub fn doc_len(&self, internal: u32) -> u32 {
        self.doc_lengths[internal as usize]
    }

    /// Position of the document in the underlying corpus' document list.
    pub fn corpus_index(&self, internal: u32) -> usize {
        self.corpus_doc_idx[internal as usize]
    }

    /// Document frequency of a corpus term id.
    pub fn doc_freq(&self, term: u32) -> u32 {
        self.doc_freq.get(term as usize).copied().unwrap_or(0)
    }

    /// Term frequency of `term` in the document at `internal`.
    pub fn term_freq(&self, term: u32, internal: u32) -> u32 {
        match self.postings.get(term as usize) {
            Some(list) => list
                .binary_search_by_key(&internal, |p| p.doc)
                .map(|i| list[i].tf)
                .unwrap_or(0),
            None => 0,
        }
    }

    /// idf(t) = ln(1 + (N − df + 0.5) / (df + 0.5))
    pub fn idf(&self, term: u32) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 contribution of one (term, doc) pair for a single query
    /// occurrence of the term.
    pub fn bm25_term_score(&self, term: u32, internal: u32) -> f64 {
        let tf = self.term_freq(term, internal) as f64;
        if tf == 0.0 {
            return 0.0;
        }
        let dl = self.doc_lengths[internal as usize] as f64;
        let norm = tf + self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_len);
        self.idf(term) * tf * (self.k1 + 1.0) / norm
    }
}

/// Build an immutable index over the corpus with BM25 constants `k1`, `b`.
pub fn build_index(corpus: &Corpus, k1: f64, b: f64) -> Result<InvertedIndex> {
    if corpus.num_docs() == 0 {
        return Err(Error::EmptyInput("build_index: corpus"));
    }
    if !(k1 >= 0.0) || !(0.0..=1.0).contains(&b) {
        return Err(Error::InvalidArg(format!("bad BM25 constants k1={k1} b={b}")));
    }
    let mut order: Vec<usize> = (0..corpus.num_docs()).collect();
    order.sort_by(|&a, &b| corpus.doc(a).doc_id.cmp(&corpus.doc(b).doc_id));

    let mut doc_ids = Vec::with_capacity(order.len());
    let mut doc_lengths = Vec::with_capacity(order.len());
    let mut postings: Vec<Vec<Posting>> = vec![Vec::new(); corpus.vocab_len()];
    let mut doc_freq = vec![0u32; corpus.vocab_len()];
    let mut total_len = 0u64;

    for (internal, &ci) in order.iter().enumerate() {
        let doc = corpus.doc(ci);
        doc_ids.push(doc.doc_id.clone());
        doc_lengths.push(doc.len() as u32);
        total_len += doc.len() as u64;
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for &t in &doc.tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut terms: Vec<(u32, u32)> = counts.into_iter().collect();
        terms.sort_unstable();
        for (term, tf) in terms {
            postings[term as usize].push(Posting { doc: internal as u32, tf });
            doc_freq[term as usize] += 1;
        }
    }

    Ok(InvertedIndex {
        avg_doc_len: total_len as f64 / order.len() as f64,
        doc_ids,
        doc_lengths,
        corpus_doc_idx: order,
        postings,
        doc_freq,
        k1,
        b,
    })
}

/// Rank the top-K documents for a query given as corpus term ids (callers map
/// surface tokens first; unknown tokens simply contribute nothing).
///
/// The score sums over query token occurrences, so a repeated query term
/// counts once per occurrence. Only documents matching at least one query
/// term are returned; ties break by ascending doc id.
pub fn bm25_search(index: &InvertedIndex, query: &[u32], k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidArg("bm25_search: K must be >= 1".into()));
    }
    let mut scores: HashMap<u32, f64> = HashMap::new();
    for &term in query {
        let Some(list) = index.postings.get(term as usize) else { continue };
        if list.is_empty() {
            continue;
        }
        let idf = index.idf(term);
        for p in list {
            let tf = p.tf as f64;
            let dl = index.doc_lengths[p.doc as usize] as f64;
            let norm = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_len);
            *scores.entry(p.doc).or_insert(0.0) += idf * tf * (index.k1 + 1.0) / norm;
        }
    }
    let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked
        .into_iter()
        .map(|(doc, score)| ScoredDoc { doc_id: index.doc_ids[doc as usize].clone(), score })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::Corpus;

    fn hand_corpus() -> Corpus {
        Corpus::from_texts(vec![
            ("d1", "apple banana apple"),
            ("d2", "banana cherry"),
            ("d3", "cherry cherry cherry date"),
        ])
        .unwrap()
    }

    #[test]
    fn single_doc_corpus_has_df_one_everywhere() {
        let corpus = Corpus::from_texts(vec![("only", "alpha beta alpha")]).unwrap();
        let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        for term in 0..corpus.vocab_len() as u32 {
            assert_eq!(index.doc_freq(term), 1);
        }
        assert_eq!(index.avg_doc_len(), 3.0);
    }

    #[test]
    fn df_tf_and_avgdl_match_hand_count() {
        let corpus = hand_corpus();
        let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        let id = |t: &str| corpus.term_id(t).unwrap();
        assert_eq!(index.doc_freq(id("apple")), 1);
        assert_eq!(index.doc_freq(id("banana")), 2);
        assert_eq!(index.doc_freq(id("cherry")), 2);
        assert_eq!(index.doc_freq(id("date")), 1);
        // internal order is doc_id ascending: d1, d2, d3
        assert_eq!(index.term_freq(id("apple"), 0), 2);
        assert_eq!(index.term_freq(id("cherry"), 2), 3);
        assert_eq!(index.term_freq(id("cherry"), 0), 0);
        assert!((index.avg_doc_len() - (3.0 + 2.0 + 4.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_rejected() {
        let corpus = Corpus::from_texts(Vec::<(&str, &str)>::new()).unwrap();
        assert!(build_index(&corpus, DEFAULT_K1, DEFAULT_B).is_err());
    }

    #[test]
    fn absent_terms_return_empty_list() {
        let corpus = hand_corpus();
        let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        // vocab id beyond any document (simulate unknown via empty query)
        let hits = bm25_search(&index, &[], 5).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn exact_match_dominates_disjoint_docs() {
        let corpus = Corpus::from_texts(vec![
            ("a", "solar panel efficiency"),
            ("b", "quantum entanglement"),
            ("c", "medieval history"),
        ])
        .unwrap();
        let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        let query: Vec<u32> =
            ["solar", "panel", "efficiency"].iter().map(|t| corpus.term_id(t).unwrap()).collect();
        let hits = bm25_search(&index, &query, 3).unwrap();
        assert_eq!(hits[0].doc_id, "a");
        assert_eq!(hits.len(), 1, "disjoint docs must not appear");
    }

    #[test]
    fn hand_corpus_scores_match_scalar_formula() {
        let corpus = hand_corpus();
        let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        let id = |t: &str| corpus.term_id(t).unwrap();
        let query = vec![id("banana"), id("cherry")];
        let hits = bm25_search(&index, &query, 3).unwrap();

        let n = 3.0f64;
        let avgdl = 3.0;
        let idf = |df: f64| (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let term = |tf: f64, dl: f64, df: f64| {
            idf(df) * tf * (DEFAULT_K1 + 1.0)
                / (tf + DEFAULT_K1 * (1.0 - DEFAULT_B + DEFAULT_B * dl / avgdl))
        };
        // d2 (len 2): banana tf1 df2, cherry tf1 df2
        let d2 = term(1.0, 2.0, 2.0) + term(1.0, 2.0, 2.0);
        // d3 (len 4): cherry tf3 df2
        let d3 = term(3.0, 4.0, 2.0);
        // d1 (len 3): banana tf1 df2
        let d1 = term(1.0, 3.0, 2.0);
        let by_id: std::collections::HashMap<&str, f64> =
            hits.iter().map(|h| (h.doc_id.as_str(), h.score)).collect();
        assert!((by_id["d2"] - d2).abs() < 1e-12);
        assert!((by_id["d3"] - d3).abs() < 1e-12);
        assert!((by_id["d1"] - d1).abs() < 1e-12);
    }

    #[test]
    fn extra_term_occurrence_never_lowers_score() {
        // tf-monotonicity of BM25 on a fixed-length slot: adding an occurrence
        // of a query term (replacing a non-query filler) must not lower the score
        let base = Corpus::from_texts(vec![("x", "apple filler filler"), ("y", "other stuff")]).unwrap();
        let more = Corpus::from_texts(vec![("x", "apple apple filler"), ("y", "other stuff")]).unwrap();
        let qi = |c: &Corpus| vec![c.term_id("apple").unwrap()];
        let s_base = {
            let idx = build_index(&base, DEFAULT_K1, DEFAULT_B).unwrap();
            bm25_search(&idx, &qi(&base), 2).unwrap()[0].score
        };
        let s_more = {
            let idx = build_index(&more, DEFAULT_K1, DEFAULT_B).unwrap();
            bm25_search(&idx, &qi(&more), 2).unwrap()[0].score
        };
        assert!(s_more >= s_base);
    }

    #[test]
    fn repeated_searches_are_identical() {
        let corpus = hand_corpus();
        let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B).unwrap();
        let query = vec![corpus.term_id("cherry").unwrap()];
        let a = bm25_search(&index, &query, 10).unwrap();
        let b = bm25_search(&index, &query, 10).unwrap();
        assert_eq!(a, b);
    }
}
