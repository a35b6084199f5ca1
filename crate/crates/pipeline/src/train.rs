//! Sub-agent training loops and baseline grid search.

use rand::seq::SliceRandom;

use requery_core::agents::{
    init_policy_params, prepare_examples, reinforce_step, BaselineState, PolicyConfig,
    ReinforceExample, ReinforceOpts,
};
use requery_core::baselines::{prf_expand, rm3_expand, PrfConfig, Rm3Config};
use requery_core::nn::{ModelParams, Optimizer};
use requery_core::search::Query;
use requery_core::seed;
use requery_core::Result;

use crate::config::{BaselineGrid, SubAgentSettings};
use crate::world::World;

#[derive(Debug, Clone)]
pub struct TrainedPolicy {
    pub agent_id: String,
    pub params: ModelParams,
    pub cfg: PolicyConfig,
    /// Mean sampled reward per epoch.
    pub reward_curve: Vec<f64>,
}

/// Build REINFORCE examples (with candidate pools) for a query set.
pub fn examples_for(world: &World, queries: &[Query], settings: &SubAgentSettings) -> Result<Vec<ReinforceExample>> {
    prepare_examples(
        &world.queries_with_relevance(queries),
        &world.env,
        settings.k_docs,
        settings.m_terms,
    )
}

/// Train one policy with REINFORCE over prepared examples. `init_from`
/// supplies warm-start weights (the pretrained variant); otherwise parameters
/// initialize from the agent's seed.
pub fn train_policy(
    world: &World,
    examples: &[ReinforceExample],
    settings: &SubAgentSettings,
    seed_val: u64,
    agent_id: &str,
    reward_k: usize,
    init_from: Option<&ModelParams>,
) -> Result<TrainedPolicy> {
    let cfg = PolicyConfig {
        vocab_size: world.env.corpus.nn_vocab_size(),
        embed_dim: settings.embed_dim,
        hidden_dim: settings.hidden_dim,
    };
    let mut params = match init_from {
        Some(p) => p.clone(),
        None => init_policy_params(&cfg, &mut seed::rng(seed_val, "policy-init"))?,
    };
    let mut optimizer = Optimizer::new(settings.optimizer);
    let mut baseline = BaselineState::default();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffle_rng = seed::rng(seed_val, "policy-order");
    let mut reward_curve = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut reward_sum = 0.0;
        let mut n_samples_total = 0usize;
        for (bi, chunk) in order.chunks(settings.mini_batch_size).enumerate() {
            let batch: Vec<ReinforceExample> =
                chunk.iter().map(|&i| examples[i].clone()).collect();
            let opts = ReinforceOpts {
                n_samples: settings.n_samples,
                t_max: settings.t_max,
                reward_k,
                seed: seed::derive(seed_val, &format!("step:{epoch}:{bi}")),
            };
            let stats = reinforce_step(
                &mut params,
                &cfg,
                &batch,
                &world.env,
                &opts,
                &mut baseline,
                &mut optimizer,
                settings.learning_rate,
            )?;
            reward_sum += stats.mean_reward * (batch.len() * settings.n_samples) as f64;
            n_samples_total += batch.len() * settings.n_samples;
        }
        reward_curve.push(reward_sum / n_samples_total.max(1) as f64);
    }
    Ok(TrainedPolicy { agent_id: agent_id.to_string(), params, cfg, reward_curve })
}

/// Mean Recall@K over a query set for an arbitrary reformulation function.
pub fn mean_recall<F>(world: &World, queries: &[Query], k: usize, mut reformulate: F) -> Result<f64>
where
    F: FnMut(&Query) -> Result<Vec<String>>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for q in queries {
        let Some(relevant) = world.qrels.get(&q.qid) else { continue };
        let tokens = reformulate(q)?;
        let (_, reward) = world.env.query(&tokens, k, relevant)?;
        total += reward;
        count += 1;
    }
    Ok(total / count.max(1) as f64)
}

/// Grid-search the PRF (N, K) pair on the dev set by mean Recall@K. Ties keep
/// the earliest grid entry.
pub fn grid_search_prf(world: &World, grid: &BaselineGrid, reward_k: usize) -> Result<(PrfConfig, f64)> {
    let mut best = (PrfConfig { n_terms: 0, k_docs: 0 }, f64::NEG_INFINITY);
    for &n_terms in &grid.prf_n_terms {
        for &k_docs in &grid.prf_k_docs {
            let score = mean_recall(world, &world.dev, reward_k, |q| {
                prf_expand(&q.tokens, &world.env, n_terms, k_docs)
            })?;
            if score > best.1 {
                best = (PrfConfig { n_terms, k_docs }, score);
            }
        }
    }
    Ok(best)
}

/// Grid-search RM3 on the dev set by mean Recall@K. Queries with no feedback
/// documents fall back to the original query.
pub fn grid_search_rm3(world: &World, grid: &BaselineGrid, reward_k: usize) -> Result<(Rm3Config, f64)> {
    let mut best: Option<(Rm3Config, f64)> = None;
    for &lambda in &grid.rm3_lambda {
        for &n_terms in &grid.rm3_n_terms {
            for &feedback_depth in &grid.rm3_feedback_depth {
                for &u in &grid.rm3_u {
                    let cfg = Rm3Config { lambda, u, n_terms, feedback_depth };
                    let score = mean_recall(world, &world.dev, reward_k, |q| {
                        match rm3_expand(&q.tokens, &world.env, &cfg) {
                            Ok(expanded) => Ok(expanded),
                            Err(requery_core::Error::Data(_)) => Ok(q.tokens.clone()),
                            Err(e) => Err(e),
                        }
                    })?;
                    if best.map(|(_, s)| score > s).unwrap_or(true) {
                        best = Some((cfg, score));
                    }
                }
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}
