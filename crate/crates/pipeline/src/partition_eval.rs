//! Partitioning-strategy study: train sub-agents under each strategy, build
//! the cross-partition score matrix s_ij, and compare final task scores.

use std::collections::BTreeMap;

use rayon::prelude::*;

use requery_core::agents::{build_candidate_pool, decode, DecodeMethod, DecodeOpts};
use requery_core::metrics::PartitionMetrics;
use requery_core::partition::{
    bootstrap_partition, evaluate_partitioning, kmeans_partition, random_partition,
    train_ppmi_embeddings, KmeansOpts, Partition, PartitionStrategy,
};
use requery_core::search::Query;
use requery_core::seed;
use requery_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::train::{examples_for, train_policy, TrainedPolicy};
use crate::world::World;

/// Build a partition of the given query ids under a strategy. K-means
/// variants embed queries (Q), their relevant documents (A), or both (Q+A)
/// with corpus co-occurrence vectors.
pub fn make_partition(
    cfg: &ExperimentConfig,
    world: &World,
    ids: &[String],
    strategy: PartitionStrategy,
    seed_val: u64,
) -> Result<Partition> {
    match strategy {
        PartitionStrategy::Random => random_partition(ids, cfg.n_agents, seed_val),
        PartitionStrategy::Bagging => bootstrap_partition(ids, cfg.n_agents, seed_val),
        PartitionStrategy::KmeansQ | PartitionStrategy::KmeansA | PartitionStrategy::KmeansQa => {
            let embeddings =
                train_ppmi_embeddings(&world.env.corpus, 64, 5, seed::derive(seed_val, "ppmi"))?;
            let by_id: BTreeMap<&str, &Query> =
                world.train.iter().map(|q| (q.qid.as_str(), q)).collect();
            let features: Vec<Vec<f64>> = ids
                .iter()
                .map(|qid| -> Result<Vec<f64>> {
                    let q = by_id
                        .get(qid.as_str())
                        .ok_or_else(|| Error::Data(format!("unknown train query {qid}")))?;
                    let q_vec = embeddings.embed_tokens(&world.env.corpus, &q.tokens);
                    let a_vec = answer_embedding(world, &embeddings, qid)?;
                    Ok(match strategy {
                        PartitionStrategy::KmeansQ => q_vec,
                        PartitionStrategy::KmeansA => a_vec,
                        _ => {
                            let mut both = q_vec;
                            both.extend(a_vec);
                            both
                        }
                    })
                })
                .collect::<Result<_>>()?;
            kmeans_partition(ids, &features, cfg.n_agents, seed_val, &KmeansOpts::default(), strategy)
        }
    }
}

/// Mean co-occurrence embedding of the query's relevant documents (first 64
/// tokens each).
fn answer_embedding(
    world: &World,
    embeddings: &requery_core::partition::CooccurrenceEmbeddings,
    qid: &str,
) -> Result<Vec<f64>> {
    let relevant =
        world.qrels.get(qid).ok_or_else(|| Error::Data(format!("no qrels for {qid}")))?;
    let mut term_ids = Vec::new();
    for doc_id in relevant {
        if let Some(internal) = world.env.index.doc_id_to_internal(doc_id) {
            let doc = world.env.corpus.doc(world.env.index.corpus_index(internal));
            term_ids.extend(doc.tokens.iter().take(64).copied());
        }
    }
    Ok(embeddings.embed_term_ids(&term_ids))
}

/// One row of the strategy comparison table.
#[derive(Debug, Clone)]
pub struct StrategyReport {
    pub strategy: PartitionStrategy,
    pub metrics: PartitionMetrics,
    pub score_matrix: Vec<Vec<f64>>,
    /// Final task score (test Recall@eval_k of the full sub-agent +
    /// aggregator system trained under this partition).
    pub task_score: f64,
}

/// Greedy-decode mean Recall@K of one agent over a query set.
fn agent_recall(
    cfg: &ExperimentConfig,
    world: &World,
    agent: &TrainedPolicy,
    queries: &[Query],
) -> Result<f64> {
    if queries.is_empty() {
        return Ok(0.0);
    }
    let scores: Vec<f64> = queries
        .par_iter()
        .map(|q| -> Result<f64> {
            let relevant = world
                .qrels
                .get(&q.qid)
                .ok_or_else(|| Error::Data(format!("no qrels for {}", q.qid)))?;
            let pool = build_candidate_pool(
                &q.tokens,
                &world.env,
                cfg.subagent.k_docs,
                cfg.subagent.m_terms,
            )?;
            let q0_ids = world.env.corpus.nn_ids(&q.tokens);
            let opts = DecodeOpts {
                t_max: cfg.subagent.t_max,
                beam_width: cfg.subagent.beam_width,
                n_samples: 1,
                seed: 0,
            };
            let outs = decode(
                &agent.params,
                &agent.cfg,
                &pool,
                &q.tokens,
                &q0_ids,
                DecodeMethod::Greedy,
                &opts,
                &agent.agent_id,
            )?;
            let (_, reward) = world.env.query(&outs[0].full_query(), cfg.reward_k, relevant)?;
            Ok(reward)
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Run the partitioning study for the strategies of Table-10 shape:
/// {Q, A, Q+A, Random}. Each partition holds out 20% of its queries for the
/// cross-evaluation matrix; agents train on the remaining 80%.
pub fn partition_study(cfg: &ExperimentConfig, seed_val: u64) -> Result<Vec<StrategyReport>> {
    if cfg.n_agents < 3 {
        return Err(Error::InvalidArg(
            "partition study needs n_agents >= 3 (variance uses K-2)".into(),
        ));
    }
    let world = crate::world::build_world(cfg, seed_val)?;
    let strategies = [
        PartitionStrategy::KmeansQ,
        PartitionStrategy::KmeansA,
        PartitionStrategy::KmeansQa,
        PartitionStrategy::Random,
    ];
    let ids: Vec<String> = world.train.iter().map(|q| q.qid.clone()).collect();
    let by_id: BTreeMap<&str, &Query> = world.train.iter().map(|q| (q.qid.as_str(), q)).collect();

    let mut reports = Vec::new();
    for strategy in strategies {
        let partition = make_partition(
            cfg,
            &world,
            &ids,
            strategy,
            seed::derive(seed_val, &format!("study-{}", strategy.label())),
        )?;
        // 80/20 split inside each partition
        let mut train_groups: Vec<Vec<Query>> = Vec::new();
        let mut heldout_groups: Vec<Vec<Query>> = Vec::new();
        for (gi, group) in partition.groups.iter().enumerate() {
            let mut queries: Vec<Query> =
                group.iter().filter_map(|qid| by_id.get(qid.as_str()).map(|&q| q.clone())).collect();
            use rand::seq::SliceRandom;
            queries.shuffle(&mut seed::rng(
                seed_val,
                &format!("study-holdout-{}-{gi}", strategy.label()),
            ));
            let n_held = (queries.len() / 5).max(1).min(queries.len());
            heldout_groups.push(queries[..n_held].to_vec());
            train_groups.push(queries[n_held..].to_vec());
        }
        let agents: Vec<TrainedPolicy> = train_groups
            .par_iter()
            .enumerate()
            .map(|(i, queries)| {
                let examples = examples_for(&world, queries, &cfg.subagent)?;
                train_policy(
                    &world,
                    &examples,
                    &cfg.subagent,
                    seed::derive(seed_val, &format!("study-{}-agent-{i}", strategy.label())),
                    &format!("agent-{i}"),
                    cfg.reward_k,
                    None,
                )
            })
            .collect::<Result<_>>()?;

        let (score_matrix, metrics) = evaluate_partitioning(cfg.n_agents, |i, j| {
            agent_recall(cfg, &world, &agents[i], &heldout_groups[j])
        })?;

        // task score: aggregator over these same agents, evaluated on test
        let task_score = crate::arms::aggregator_system_recall(
            cfg,
            &world,
            &agents,
            seed::derive(seed_val, &format!("study-task-{}", strategy.label())),
        )?;
        reports.push(StrategyReport { strategy, metrics, score_matrix, task_score });
    }
    Ok(reports)
}
