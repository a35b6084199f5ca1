//! Cross-entropy training of the relevance model from a precomputed
//! AgentResult log. Sub-agents and the environment are never called: the log
//! plus qrels (labels), queries (q0 text), and corpus (result text) fully
//! determine the training set.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::agents::AgentResultRecord;
use crate::aggregator::{attach_result_text, dedupe_doc_id_lists, CandidateResult};
use crate::nn::layers::softplus;
use crate::nn::{
    assemble_z, bow_backward, bow_forward, cnn_backward, cnn_forward, head_backward, head_forward,
    init_relevance_params, split_dz, ModelParams, Optimizer, OptimizerKind, RelevanceConfig,
};
use crate::search::{Corpus, InvertedIndex, Qrels};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregatorTrainConfig {
    pub relevance: RelevanceConfig,
    pub epochs: usize,
    /// Queries per mini-batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Result text truncation for f_BOW.
    pub result_text_len: usize,
    /// Optional cap on negatives per query (keeps the highest-s^A ones).
    pub negative_cap: Option<usize>,
}

#[derive(Debug)]
pub struct TrainedAggregator {
    pub params: ModelParams,
    /// Mean per-query loss after each epoch.
    pub loss_curve: Vec<f64>,
    /// Queries dropped for having no positive candidate.
    pub skipped_queries: usize,
}

struct TrainQuery {
    q0_ids: Vec<u32>,
    candidates: Vec<CandidateResult>,
    labels: Vec<bool>,
}

/// Assemble per-query candidate sets from the log. Queries with no positive
/// candidate are dropped (their loss has no useful gradient signal).
fn build_training_set(
    records: &[AgentResultRecord],
    qrels: &Qrels,
    queries: &BTreeMap<String, Vec<String>>,
    corpus: &Corpus,
    index: &InvertedIndex,
    cfg: &AggregatorTrainConfig,
) -> Result<(Vec<TrainQuery>, usize)> {
    let mut by_qid: BTreeMap<&str, Vec<&AgentResultRecord>> = BTreeMap::new();
    for rec in records {
        by_qid.entry(rec.qid.as_str()).or_default().push(rec);
    }
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (qid, recs) in by_qid {
        let relevant = qrels
            .get(qid)
            .ok_or_else(|| Error::Data(format!("train_aggregator: no qrels for {qid}")))?;
        let q0 = queries
            .get(qid)
            .ok_or_else(|| Error::Data(format!("train_aggregator: no query text for {qid}")))?;
        if q0.is_empty() {
            return Err(Error::Data(format!("train_aggregator: empty query {qid}")));
        }
        let lists: Vec<&[String]> = recs.iter().map(|r| r.ranked_doc_ids.as_slice()).collect();
        let mut candidates = dedupe_doc_id_lists(lists);
        attach_result_text(&mut candidates, corpus, index, cfg.result_text_len)?;
        let labels: Vec<bool> = candidates.iter().map(|c| relevant.contains(&c.doc_id)).collect();
        if !labels.iter().any(|&l| l) {
            skipped += 1;
            continue;
        }
        if let Some(cap) = cfg.negative_cap {
            let mut keep: Vec<(CandidateResult, bool)> = Vec::new();
            let mut negatives: Vec<CandidateResult> = Vec::new();
            for (c, l) in candidates.into_iter().zip(labels) {
                if l {
                    keep.push((c, true));
                } else {
                    negatives.push(c);
                }
            }
            negatives.sort_by(|a, b| {
                b.s_accum.total_cmp(&a.s_accum).then_with(|| a.doc_id.cmp(&b.doc_id))
            });
            negatives.truncate(cap);
            keep.extend(negatives.into_iter().map(|c| (c, false)));
            keep.sort_by(|a, b| a.0.doc_id.cmp(&b.0.doc_id));
            let (candidates, labels): (Vec<_>, Vec<_>) = keep.into_iter().unzip();
            out.push(TrainQuery { q0_ids: corpus.nn_ids(q0), candidates, labels });
        } else {
            out.push(TrainQuery { q0_ids: corpus.nn_ids(q0), candidates, labels });
        }
    }
    Ok((out, skipped))
}

/// Forward/backward one query: per-candidate binary cross-entropy summed over
/// candidates, scaled by `weight`. Returns the unscaled per-query loss.
fn query_backprop(
    tq: &TrainQuery,
    params: &mut ModelParams,
    cfg: &RelevanceConfig,
    weight: f64,
) -> Result<f64> {
    let (u, q_tape) = cnn_forward(&tq.q0_ids, params, &cfg.encoder, cfg.query_embed_key())?;
    let mut d_u_total = vec![0.0; cfg.encoder.output_dim];
    let mut loss = 0.0;
    for (cand, &label) in tq.candidates.iter().zip(&tq.labels) {
        let (v, a_tape) = bow_forward(&cand.tokens, params, &cfg.encoder, cfg.result_embed_key())?;
        let z = assemble_z(&u, &v, cfg.interaction);
        let (prob, head_tape) = head_forward(&z, params)?;
        loss += if label { softplus(-head_tape.logit) } else { softplus(head_tape.logit) };
        let y = if label { 1.0 } else { 0.0 };
        let d_logit = weight * (prob - y);
        let d_z = head_backward(d_logit, &head_tape, params);
        let (d_u, d_v) = split_dz(&d_z, &u, &v, cfg.interaction);
        for (acc, d) in d_u_total.iter_mut().zip(&d_u) {
            *acc += d;
        }
        bow_backward(&d_v, &a_tape, params, &cfg.encoder, cfg.result_embed_key());
    }
    cnn_backward(&d_u_total, &q_tape, params, &cfg.encoder, cfg.query_embed_key());
    Ok(loss)
}

/// Train the relevance model: Eq.-style per-candidate cross-entropy, summed
/// per query and averaged over the queries of each mini-batch.
pub fn train_aggregator(
    records: &[AgentResultRecord],
    qrels: &Qrels,
    queries: &BTreeMap<String, Vec<String>>,
    corpus: &Corpus,
    index: &InvertedIndex,
    cfg: &AggregatorTrainConfig,
) -> Result<TrainedAggregator> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidArg("train_aggregator: epochs and batch_size must be >= 1".into()));
    }
    let (train_set, skipped) = build_training_set(records, qrels, queries, corpus, index, cfg)?;
    if train_set.is_empty() {
        return Err(Error::Data("train_aggregator: no trainable queries".into()));
    }
    let mut params = init_relevance_params(&cfg.relevance, &mut seed::rng(cfg.seed, "aggregator-init"))?;
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut shuffle_rng = seed::rng(cfg.seed, "aggregator-shuffle");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            params.zero_grads();
            let weight = 1.0 / chunk.len() as f64;
            for &qi in chunk {
                epoch_loss += query_backprop(&train_set[qi], &mut params, &cfg.relevance, weight)?;
            }
            params.check_finite()?;
            optimizer.step(&mut params, cfg.learning_rate)?;
        }
        loss_curve.push(epoch_loss / train_set.len() as f64);
    }
    Ok(TrainedAggregator { params, loss_curve, skipped_queries: skipped })
}
