//! The black-box search environment: tokenizer, corpus store, immutable
//! inverted index, BM25 ranking, Dirichlet-smoothed language models, and the
//! query → (results, reward) interaction surface.

mod corpus;
mod env;
mod index;
mod lm;

pub use corpus::{load_corpus_jsonl, load_qrels_tsv, load_queries_tsv, save_corpus_jsonl, Corpus, Document, Qrels, Query};
pub use env::{query_environment, SearchEnv};
pub use index::{build_index, bm25_search, InvertedIndex, RankedList, ScoredDoc, DEFAULT_B, DEFAULT_K1};
pub use lm::{collection_prob, dirichlet_prob, DEFAULT_DIRICHLET_U};

/// Lowercase, split on non-alphanumeric characters, drop empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Nobel Prize, 1993"), vec!["nobel", "prize", "1993"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
    }

    #[test]
    fn tokenize_is_idempotent_over_rejoin() {
        for text in ["Hello, World!", "a-b_c 42", "ÅNGSTRÖM unit", "x    y"] {
            let once = tokenize(text);
            let rejoined = once.join(" ");
            assert_eq!(tokenize(&rejoined), once);
        }
    }
}
