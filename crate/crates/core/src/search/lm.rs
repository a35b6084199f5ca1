//! Dirichlet-smoothed document language models.

use crate::search::{Corpus, Document};
use crate::{Error, Result};

/// Smoothing pseudo-count used throughout the experiments.
pub const DEFAULT_DIRICHLET_U: f64 = 1500.0;

/// P(t|C): collection probability of a surface term.
pub fn collection_prob(term: &str, corpus: &Corpus) -> f64 {
    corpus.collection_prob_str(term)
}

/// Dirichlet-smoothed P(t|d) = (tf(t,d) + u·P(t|C)) / (|d| + u).
pub fn dirichlet_prob(term: &str, doc: &Document, u: f64, corpus: &Corpus) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::InvalidArg(format!("dirichlet u must be >= 0, got {u}")));
    }
    let denom = doc.len() as f64 + u;
    if denom == 0.0 {
        return Err(Error::InvalidArg("dirichlet_prob: |d| + u = 0".into()));
    }
    let tf = match corpus.term_id(term) {
        Some(id) => doc.tokens.iter().filter(|&&t| t == id).count() as f64,
        None => 0.0,
    };
    Ok((tf + u * collection_prob(term, corpus)) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        Corpus::from_texts(vec![("d1", "a a b"), ("d2", "b c")]).unwrap()
    }

    #[test]
    fn unsmoothed_is_relative_frequency() {
        let c = corpus();
        let d1 = &c.documents()[0];
        assert!((dirichlet_prob("a", d1, 0.0, &c).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_everywhere_is_zero() {
        let c = corpus();
        let d1 = &c.documents()[0];
        assert_eq!(dirichlet_prob("zzz", d1, 100.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn hand_arithmetic_case() {
        // tf=2, |d|=10, u=1500, P(t|C)=0.01 → (2 + 15) / 1510
        let mut texts = vec![("d".to_string(), "t t f f f f f f f f".to_string())];
        // pad the collection so that P(t|C) = 0.01: t occurs 2 times → need 200 total tokens
        texts.push(("pad".to_string(), vec!["pad"; 190].join(" ")));
        let c = Corpus::from_texts(texts.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
        assert_eq!(c.total_tokens(), 200);
        let d = &c.documents()[0];
        let p = dirichlet_prob("t", d, 1500.0, &c).unwrap();
        assert!((p - 17.0 / 1510.0).abs() < 1e-12);
    }

    #[test]
    fn empty_doc_with_zero_u_errors() {
        let c = Corpus::from_texts(vec![("e", ""), ("f", "x")]).unwrap();
        let e = &c.documents()[0];
        assert!(dirichlet_prob("x", e, 0.0, &c).is_err());
    }

    #[test]
    fn document_model_sums_to_one_over_vocab() {
        let c = corpus();
        let d2 = &c.documents()[1];
        let total: f64 = (0..c.vocab_len() as u32)
            .map(|id| dirichlet_prob(c.term(id), d2, 1500.0, &c).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
