//! World assembly: corpus, index, query splits, and qrels from either the
//! synthetic generator or user-provided files.

use rand::seq::SliceRandom;

use requery_core::search::{
    build_index, load_corpus_jsonl, load_qrels_tsv, load_queries_tsv, Corpus, Qrels, Query,
    SearchEnv, DEFAULT_B, DEFAULT_K1,
};
use requery_core::seed;
use requery_core::{Error, Result};

use crate::config::{CorpusSource, ExperimentConfig};
use crate::synth::synth_corpus;

pub struct World {
    pub env: SearchEnv,
    pub train: Vec<Query>,
    pub dev: Vec<Query>,
    pub test: Vec<Query>,
    pub qrels: Qrels,
    /// Synonym table of the synthetic generator (empty for file corpora).
    pub synonyms: Vec<(String, String)>,
    /// Raw document texts, kept for corpus file emission.
    pub documents: Vec<(String, String)>,
}

impl World {
    pub fn queries_with_relevance(
        &self,
        queries: &[Query],
    ) -> Vec<(String, Vec<String>, std::collections::BTreeSet<String>)> {
        queries
            .iter()
            .filter_map(|q| {
                self.qrels.get(&q.qid).map(|rel| (q.qid.clone(), q.tokens.clone(), rel.clone()))
            })
            .collect()
    }
}

/// Build the world for one seed: generate or load data, split queries into
/// train/dev/test by seeded shuffle, and index the corpus.
pub fn build_world(cfg: &ExperimentConfig, seed_val: u64) -> Result<World> {
    cfg.validate()?;
    let total = cfg.split.n_train + cfg.split.n_dev + cfg.split.n_test;
    let (documents, mut queries, qrels, synonyms) = match &cfg.corpus {
        CorpusSource::Synthetic(spec) => {
            let out = synth_corpus(spec, total, seed_val)?;
            (out.documents, out.queries, out.qrels, out.synonyms)
        }
        CorpusSource::Files { corpus, queries, qrels } => {
            let corpus_docs = load_corpus_jsonl(corpus)?;
            let docs: Vec<(String, String)> = corpus_docs
                .documents()
                .iter()
                .map(|d| {
                    let text: Vec<&str> =
                        d.tokens.iter().map(|&t| corpus_docs.term(t)).collect();
                    (d.doc_id.clone(), text.join(" "))
                })
                .collect();
            (docs, load_queries_tsv(queries)?, load_qrels_tsv(qrels)?, Vec::new())
        }
    };
    if queries.len() < total {
        return Err(Error::Data(format!(
            "need {total} queries for the split, have {}",
            queries.len()
        )));
    }
    // queries without qrels cannot be scored; drop them before splitting
    queries.retain(|q| qrels.get(&q.qid).map(|r| !r.is_empty()).unwrap_or(false));
    if queries.len() < total {
        return Err(Error::Data(format!(
            "only {} queries have relevance judgments, need {total}",
            queries.len()
        )));
    }
    queries.shuffle(&mut seed::rng(seed_val, "split"));
    let train = queries[..cfg.split.n_train].to_vec();
    let dev = queries[cfg.split.n_train..cfg.split.n_train + cfg.split.n_dev].to_vec();
    let test = queries
        [cfg.split.n_train + cfg.split.n_dev..cfg.split.n_train + cfg.split.n_dev + cfg.split.n_test]
        .to_vec();

    let corpus = Corpus::from_texts(documents.iter().map(|(a, b)| (a.as_str(), b.as_str())))?;
    let index = build_index(&corpus, DEFAULT_K1, DEFAULT_B)?;
    Ok(World { env: SearchEnv::new(corpus, index), train, dev, test, qrels, synonyms, documents })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SplitSpec;
    use crate::synth::SyntheticSpec;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            corpus: CorpusSource::Synthetic(SyntheticSpec {
                n_topics: 20,
                docs_per_topic: 5,
                ..Default::default()
            }),
            split: SplitSpec { n_train: 30, n_dev: 10, n_test: 10 },
            ..Default::default()
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let world = build_world(&small_cfg(), 0).unwrap();
        assert_eq!(world.train.len(), 30);
        assert_eq!(world.dev.len(), 10);
        assert_eq!(world.test.len(), 10);
        let mut qids: Vec<&str> = world
            .train
            .iter()
            .chain(&world.dev)
            .chain(&world.test)
            .map(|q| q.qid.as_str())
            .collect();
        let before = qids.len();
        qids.sort_unstable();
        qids.dedup();
        assert_eq!(qids.len(), before);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let a = build_world(&small_cfg(), 3).unwrap();
        let b = build_world(&small_cfg(), 3).unwrap();
        let ids = |w: &World| w.train.iter().map(|q| q.qid.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        let c = build_world(&small_cfg(), 4).unwrap();
        assert_ne!(ids(&a), ids(&c));
    }
}
