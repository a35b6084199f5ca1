//! Corpus store: documents, vocabulary, and collection statistics, plus the
//! JSON-lines / TSV file formats for corpora, queries, and qrels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::search::tokenize;
use crate::{Error, Result};

/// A tokenized document. Tokens are interned ids into the corpus vocabulary.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<u32>,
}

impl Document {
    /// Document length |d| in tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Tokenized corpus with an interned vocabulary and collection term counts.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    terms: Vec<String>,
    term_ids: HashMap<String, u32>,
    collection_counts: Vec<u64>,
    total_tokens: u64,
}

impl Corpus {
    /// Build a corpus from (doc_id, raw text) pairs. Duplicate doc ids are
    /// rejected; empty documents are kept (they simply match nothing).
    pub fn from_texts<I, S>(entries: I) -> Result<Corpus>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut corpus = Corpus::default();
        let mut seen = BTreeSet::new();
        for (doc_id, text) in entries {
            let doc_id = doc_id.as_ref().to_string();
            if !seen.insert(doc_id.clone()) {
                return Err(Error::Data(format!("duplicate doc_id {doc_id:?}")));
            }
            let tokens: Vec<u32> =
                tokenize(text.as_ref()).into_iter().map(|t| corpus.intern(&t)).collect();
            corpus.total_tokens += tokens.len() as u64;
            for &t in &tokens {
                corpus.collection_counts[t as usize] += 1;
            }
            corpus.documents.push(Document { doc_id, tokens });
        }
        Ok(corpus)
    }

    fn intern(&mut self, term: &str) -> u32 {
        if let Some(&id) = self.term_ids.get(term) {
            return id;
        }
        let id = self.terms.len() as u32;
        self.terms.push(term.to_string());
        self.term_ids.insert(term.to_string(), id);
        self.collection_counts.push(0);
        id
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc(&self, idx: usize) -> &Document {
        &self.documents[idx]
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocab_len(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_ids.get(term).copied()
    }

    /// Total token count |C| over the collection.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Collection frequency of a term id.
    pub fn collection_count(&self, id: u32) -> u64 {
        self.collection_counts[id as usize]
    }

    /// P(t|C): probability of the term in the entire corpus; 0 for
    /// out-of-vocabulary terms.
    pub fn collection_prob_str(&self, term: &str) -> f64 {
        match self.term_id(term) {
            Some(id) if self.total_tokens > 0 => {
                self.collection_counts[id as usize] as f64 / self.total_tokens as f64
            }
            _ => 0.0,
        }
    }

    /// Vocabulary size for neural models: id 0 is reserved for unknowns and
    /// corpus term `t` maps to `t + 1`.
    pub fn nn_vocab_size(&self) -> usize {
        self.terms.len() + 1
    }

    /// Map a surface token to its neural id (0 = unknown).
    pub fn nn_id(&self, term: &str) -> u32 {
        self.term_id(term).map(|id| id + 1).unwrap_or(0)
    }

    pub fn nn_ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.nn_id(t)).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    doc_id: String,
    text: String,
}

/// Load a corpus from a JSON-lines file: one {"doc_id", "text"} per line.
pub fn load_corpus_jsonl(path: &Path) -> Result<Corpus> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusLine = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        entries.push((rec.doc_id, rec.text));
    }
    Corpus::from_texts(entries)
}

/// Write (doc_id, text) pairs as corpus JSON-lines.
pub fn save_corpus_jsonl(path: &Path, docs: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for (doc_id, text) in docs {
        let line = serde_json::to_string(&CorpusLine { doc_id: doc_id.clone(), text: text.clone() })?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// A query: id plus tokenized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub qid: String,
    pub tokens: Vec<String>,
}

/// Load queries.tsv: `qid<TAB>text`, one query per line.
pub fn load_queries_tsv(path: &Path) -> Result<Vec<Query>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut queries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line.split_once('\t').ok_or_else(|| {
            Error::Data(format!("{}:{}: expected qid<TAB>text", path.display(), lineno + 1))
        })?;
        queries.push(Query { qid: qid.to_string(), tokens: tokenize(text) });
    }
    Ok(queries)
}

/// Binary relevance judgments: qid → set of relevant doc ids.
pub type Qrels = BTreeMap<String, BTreeSet<String>>;

/// Load qrels.tsv: `qid<TAB>doc_id`, one pair per line.
pub fn load_qrels_tsv(path: &Path) -> Result<Qrels> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut qrels = Qrels::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, doc_id) = line.split_once('\t').ok_or_else(|| {
            Error::Data(format!("{}:{}: expected qid<TAB>doc_id", path.display(), lineno + 1))
        })?;
        qrels.entry(qid.to_string()).or_default().insert(doc_id.to_string());
    }
    Ok(qrels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collection_probabilities_sum_to_one() {
        let corpus = Corpus::from_texts(vec![
            ("d1", "the cat sat on the mat"),
            ("d2", "a cat and a dog"),
        ])
        .unwrap();
        let total: f64 = (0..corpus.vocab_len() as u32)
            .map(|id| corpus.collection_count(id) as f64 / corpus.total_tokens() as f64)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(corpus.total_tokens(), 11);
    }

    #[test]
    fn duplicate_doc_ids_rejected() {
        assert!(Corpus::from_texts(vec![("d", "a"), ("d", "b")]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let docs =
            vec![("d1".to_string(), "Alpha beta".to_string()), ("d2".to_string(), "Gamma".to_string())];
        save_corpus_jsonl(&path, &docs).unwrap();
        let corpus = load_corpus_jsonl(&path).unwrap();
        assert_eq!(corpus.num_docs(), 2);
        assert_eq!(corpus.doc(0).doc_id, "d1");
        assert_eq!(corpus.term_id("alpha"), Some(0));
    }

    #[test]
    fn nn_ids_reserve_zero_for_unknown() {
        let corpus = Corpus::from_texts(vec![("d1", "alpha beta")]).unwrap();
        assert_eq!(corpus.nn_id("alpha"), 1);
        assert_eq!(corpus.nn_id("missing"), 0);
        assert_eq!(corpus.nn_vocab_size(), 3);
    }
}
