//! Synthetic retrieval benchmark generator.
//!
//! Documents are built from topics. Each topic draws a set of concepts from a
//! global pool; every concept has two surface forms and each topic commits to
//! one form per concept for all of its documents. Queries sample concepts
//! from one source document and then corrupt a fraction of them by flipping
//! to the other surface form — a synonym that never occurs in the topic's own
//! documents but does occur in other topics that chose the opposite form.
//! Plain term matching therefore under-retrieves corrupted queries, while
//! appending topical terms found in the initially retrieved documents
//! recovers them. Bursty background "trap" terms give naive tf-idf expansion
//! something to lose: they top per-document term rankings but match documents
//! across all topics.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use requery_core::search::Query;
use requery_core::seed;
use requery_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    pub docs_per_topic: usize,
    /// Upper bound on the total vocabulary (validation only).
    pub vocab_size: usize,
    /// Global pool of synonym pairs (concepts).
    pub synonym_pairs: usize,
    pub concepts_per_topic: usize,
    pub background_words: usize,
    /// Bursty background terms that reward selective expansion.
    pub trap_words: usize,
    /// Occurrences per trap burst.
    pub trap_burst: usize,
    /// Probability that a document carries a trap burst.
    pub trap_rate: f64,
    /// Document length range (inclusive).
    pub doc_len: (usize, usize),
    /// Fraction of document tokens drawn from topic concepts.
    pub content_fraction: f64,
    /// Concepts sampled into each query.
    pub query_len: usize,
    /// Fraction of query terms replaced by the opposite surface form.
    pub corruption_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_topics: 200,
            docs_per_topic: 10,
            vocab_size: 1500,
            synonym_pairs: 600,
            concepts_per_topic: 16,
            background_words: 120,
            trap_words: 8,
            trap_burst: 4,
            trap_rate: 0.05,
            doc_len: (30, 50),
            content_fraction: 0.8,
            query_len: 6,
            corruption_rate: 0.5,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return Err(Error::InvalidArg(format!(
                "corruption_rate must be in [0,1], got {}",
                self.corruption_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.content_fraction) || !(0.0..=1.0).contains(&self.trap_rate) {
            return Err(Error::InvalidArg("content_fraction and trap_rate must be in [0,1]".into()));
        }
        if self.n_topics == 0 || self.docs_per_topic == 0 || self.query_len == 0 {
            return Err(Error::InvalidArg("topic, document, and query counts must be >= 1".into()));
        }
        if self.concepts_per_topic > self.synonym_pairs {
            return Err(Error::InvalidArg("concepts_per_topic exceeds the synonym pool".into()));
        }
        if self.doc_len.0 == 0 || self.doc_len.0 > self.doc_len.1 {
            return Err(Error::InvalidArg(format!("bad doc_len range {:?}", self.doc_len)));
        }
        let needed = 2 * self.synonym_pairs + self.background_words + self.trap_words;
        if needed > self.vocab_size {
            return Err(Error::InvalidArg(format!(
                "vocab too small for synonym table: need {needed}, have {}",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// Everything the generator produces. Documents are raw text, ready for
/// corpus files or in-memory indexing.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub documents: Vec<(String, String)>,
    pub queries: Vec<Query>,
    pub qrels: requery_core::search::Qrels,
    /// (form0, form1) synonym pairs.
    pub synonyms: Vec<(String, String)>,
}

fn concept_form(concept: usize, form: usize) -> String {
    format!("w{concept:04}{}", if form == 0 { "a" } else { "b" })
}

/// Generate a corpus, `n_queries` queries, qrels, and the synonym table.
pub fn synth_corpus(spec: &SyntheticSpec, n_queries: usize, seed_val: u64) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = seed::rng(seed_val, "synth");

    // per-topic concept subsets and surface-form commitments
    let all_concepts: Vec<usize> = (0..spec.synonym_pairs).collect();
    let mut topic_concepts: Vec<Vec<usize>> = Vec::with_capacity(spec.n_topics);
    let mut topic_forms: Vec<Vec<usize>> = Vec::with_capacity(spec.n_topics);
    for _ in 0..spec.n_topics {
        let mut concepts: Vec<usize> = all_concepts
            .choose_multiple(&mut rng, spec.concepts_per_topic)
            .copied()
            .collect();
        concepts.sort_unstable();
        let forms = concepts.iter().map(|_| rng.gen_range(0..2usize)).collect();
        topic_concepts.push(concepts);
        topic_forms.push(forms);
    }

    // background pool with a light frequency skew
    let background: Vec<String> = (0..spec.background_words).map(|i| format!("bg{i:03}")).collect();
    let bg_weights: Vec<f64> = (0..spec.background_words)
        .map(|i| 1.0 / (1.0 + i as f64).powf(0.8))
        .collect();
    let bg_total: f64 = bg_weights.iter().sum();
    let traps: Vec<String> = (0..spec.trap_words).map(|i| format!("trap{i:02}")).collect();

    fn pick_weighted(rng: &mut impl Rng, words: &[String], weights: &[f64], total: f64) -> String {
        let mut u = rng.gen::<f64>() * total;
        for (word, w) in words.iter().zip(weights) {
            u -= w;
            if u <= 0.0 {
                return word.clone();
            }
        }
        words.last().expect("non-empty pool").clone()
    }

    // documents
    let mut documents = Vec::with_capacity(spec.n_topics * spec.docs_per_topic);
    for t in 0..spec.n_topics {
        for d in 0..spec.docs_per_topic {
            let len = rng.gen_range(spec.doc_len.0..=spec.doc_len.1);
            let mut tokens: Vec<String> = Vec::with_capacity(len + spec.trap_burst);
            for _ in 0..len {
                if rng.gen::<f64>() < spec.content_fraction {
                    let ci = rng.gen_range(0..topic_concepts[t].len());
                    tokens.push(concept_form(topic_concepts[t][ci], topic_forms[t][ci]));
                } else {
                    tokens.push(pick_weighted(&mut rng, &background, &bg_weights, bg_total));
                }
            }
            if spec.trap_words > 0 && rng.gen::<f64>() < spec.trap_rate {
                let trap = traps[rng.gen_range(0..spec.trap_words)].clone();
                for _ in 0..spec.trap_burst {
                    tokens.push(trap.clone());
                }
            }
            documents.push((format!("t{t:03}-d{d:02}"), tokens.join(" ")));
        }
    }

    // queries: concepts observed in one source document, partially flipped
    let mut queries = Vec::with_capacity(n_queries);
    let mut qrels = requery_core::search::Qrels::new();
    for qi in 0..n_queries {
        let t = rng.gen_range(0..spec.n_topics);
        let d = rng.gen_range(0..spec.docs_per_topic);
        let source_text = &documents[t * spec.docs_per_topic + d].1;
        let present: BTreeSet<&str> = source_text.split(' ').collect();
        let mut available: Vec<usize> = (0..topic_concepts[t].len())
            .filter(|&ci| present.contains(concept_form(topic_concepts[t][ci], topic_forms[t][ci]).as_str()))
            .collect();
        available.shuffle(&mut rng);
        available.truncate(spec.query_len);
        if available.is_empty() {
            // degenerate short doc; fall back to any topic concept
            available.push(rng.gen_range(0..topic_concepts[t].len()));
        }
        let n_flip = (spec.corruption_rate * available.len() as f64).ceil() as usize;
        let mut flip: Vec<bool> = (0..available.len()).map(|i| i < n_flip).collect();
        flip.shuffle(&mut rng);
        let tokens: Vec<String> = available
            .iter()
            .zip(&flip)
            .map(|(&ci, &flipped)| {
                let form = if flipped { 1 - topic_forms[t][ci] } else { topic_forms[t][ci] };
                concept_form(topic_concepts[t][ci], form)
            })
            .collect();
        let qid = format!("q{qi:04}");
        let relevant: BTreeSet<String> =
            (0..spec.docs_per_topic).map(|dd| format!("t{t:03}-d{dd:02}")).collect();
        qrels.insert(qid.clone(), relevant);
        queries.push(Query { qid, tokens });
    }

    let synonyms =
        (0..spec.synonym_pairs).map(|c| (concept_form(c, 0), concept_form(c, 1))).collect();
    Ok(SynthOutput { documents, queries, qrels, synonyms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let spec = SyntheticSpec { n_topics: 10, docs_per_topic: 4, ..Default::default() };
        let a = synth_corpus(&spec, 20, 7).unwrap();
        let b = synth_corpus(&spec, 20, 7).unwrap();
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.queries.len(), b.queries.len());
        for (qa, qb) in a.queries.iter().zip(&b.queries) {
            assert_eq!(qa.qid, qb.qid);
            assert_eq!(qa.tokens, qb.tokens);
        }
        assert_eq!(a.qrels, b.qrels);
    }

    #[test]
    fn vocab_budget_is_enforced() {
        let spec = SyntheticSpec { vocab_size: 10, ..Default::default() };
        assert!(matches!(synth_corpus(&spec, 5, 0), Err(Error::InvalidArg(_))));
    }

    #[test]
    fn qrels_are_the_source_topic() {
        let spec = SyntheticSpec { n_topics: 5, docs_per_topic: 3, ..Default::default() };
        let out = synth_corpus(&spec, 10, 1).unwrap();
        for q in &out.queries {
            let rel = &out.qrels[&q.qid];
            assert_eq!(rel.len(), 3);
            let topics: BTreeSet<&str> = rel.iter().map(|d| &d[..4]).collect();
            assert_eq!(topics.len(), 1, "relevant docs must share one topic");
        }
    }

    #[test]
    fn corrupted_forms_are_absent_from_relevant_docs() {
        let spec =
            SyntheticSpec { n_topics: 8, docs_per_topic: 4, corruption_rate: 1.0, ..Default::default() };
        let out = synth_corpus(&spec, 15, 3).unwrap();
        for q in &out.queries {
            let rel = &out.qrels[&q.qid];
            for (doc_id, text) in &out.documents {
                if rel.contains(doc_id) {
                    for token in &q.tokens {
                        assert!(
                            !text.split(' ').any(|t| t == token),
                            "corrupted term {token} found in relevant doc {doc_id}"
                        );
                    }
                }
            }
        }
    }
}
