//! REINFORCE training of the term-appending policy with an exponential
//! moving-average reward baseline.

use std::collections::BTreeSet;

use rand::Rng;

use crate::agents::policy::{policy_backward, policy_forward, step_distribution, PolicyConfig};
use crate::agents::{build_candidate_pool, CandidatePool};
use crate::nn::{ModelParams, Optimizer};
use crate::search::SearchEnv;
use crate::seed;
use crate::{Error, Result};

/// Exponential moving average of batch rewards.
#[derive(Debug, Clone, Copy)]
pub struct BaselineState {
    pub value: f64,
    pub initialized: bool,
    pub decay: f64,
}

impl Default for BaselineState {
    fn default() -> Self {
        BaselineState { value: 0.0, initialized: false, decay: 0.99 }
    }
}

impl BaselineState {
    fn update(&mut self, batch_mean: f64) {
        if self.initialized {
            self.value = self.decay * self.value + (1.0 - self.decay) * batch_mean;
        } else {
            self.value = batch_mean;
            self.initialized = true;
        }
    }
}

/// One training query with its prepared action pool.
#[derive(Debug, Clone)]
pub struct ReinforceExample {
    pub qid: String,
    pub q0: Vec<String>,
    pub q0_ids: Vec<u32>,
    pub pool: CandidatePool,
    pub relevant: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReinforceOpts {
    pub n_samples: usize,
    pub t_max: usize,
    /// K of the Recall@K reward.
    pub reward_k: usize,
    /// Seed for this step's sampling stream.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReinforceStats {
    pub mean_reward: f64,
    pub mean_added_terms: f64,
    /// Σ −(r − b)·log p over the batch, before the update.
    pub surrogate_loss: f64,
    pub baseline: f64,
}

/// Build REINFORCE examples by pooling candidate terms for each (q0,
/// relevant) pair. Queries whose pool is empty keep an empty pool; the policy
/// then has no action but stop and effectively becomes the identity.
pub fn prepare_examples(
    queries: &[(String, Vec<String>, BTreeSet<String>)],
    env: &SearchEnv,
    k_docs: usize,
    m_terms: usize,
) -> Result<Vec<ReinforceExample>> {
    queries
        .iter()
        .map(|(qid, q0, relevant)| {
            if relevant.is_empty() {
                return Err(Error::Data(format!("query {qid}: empty relevant set")));
            }
            Ok(ReinforceExample {
                qid: qid.clone(),
                q0: q0.clone(),
                q0_ids: env.corpus.nn_ids(q0),
                pool: build_candidate_pool(q0, env, k_docs, m_terms)?,
                relevant: relevant.clone(),
            })
        })
        .collect()
}

/// One REINFORCE step over a batch: sample `n_samples` reformulations per
/// query, query the environment for Recall@K rewards, apply the gradient of
/// −(r − b)·log p summed over the batch, and advance the baseline.
pub fn reinforce_step(
    params: &mut ModelParams,
    cfg: &PolicyConfig,
    batch: &[ReinforceExample],
    env: &SearchEnv,
    opts: &ReinforceOpts,
    baseline: &mut BaselineState,
    optimizer: &mut Optimizer,
    lr: f64,
) -> Result<ReinforceStats> {
    if opts.n_samples == 0 {
        return Err(Error::InvalidArg("reinforce_step: n_samples must be >= 1".into()));
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("reinforce_step: batch"));
    }
    let mut rng = seed::rng(opts.seed, "reinforce");

    struct Sampled {
        example_idx: usize,
        steps: Vec<(Vec<usize>, Option<usize>)>, // (remaining-before, chosen pos or stop)
        reward: f64,
        log_p: f64,
        added: usize,
    }

    // sampling pass: draw episodes and observe rewards
    let mut episodes: Vec<Sampled> = Vec::new();
    let mut forwards = Vec::with_capacity(batch.len());
    for (ei, ex) in batch.iter().enumerate() {
        let fwd = if ex.pool.is_empty() { None } else { Some(policy_forward(params, cfg, &ex.pool, &ex.q0_ids)?) };
        for _ in 0..opts.n_samples {
            let mut steps = Vec::new();
            let mut chosen_terms: Vec<&str> = Vec::new();
            let mut log_p = 0.0;
            if let Some(fwd) = &fwd {
                let mut remaining: Vec<usize> = (0..ex.pool.len()).collect();
                for _ in 0..opts.t_max {
                    if remaining.is_empty() {
                        break;
                    }
                    let (probs, _) = step_distribution(fwd, &remaining);
                    let u: f64 = rng.gen::<f64>();
                    let mut acc = 0.0;
                    let mut picked = None;
                    for (pos, &p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            picked = Some(pos);
                            break;
                        }
                    }
                    steps.push((remaining.clone(), picked));
                    match picked {
                        Some(pos) => {
                            log_p += probs[pos].ln();
                            chosen_terms.push(&ex.pool.terms[remaining[pos]].term);
                            remaining.remove(pos);
                        }
                        None => {
                            let (_, stop) = step_distribution(fwd, &remaining);
                            log_p += stop.ln();
                            break;
                        }
                    }
                }
            }
            let mut full_query = ex.q0.clone();
            full_query.extend(chosen_terms.iter().map(|s| s.to_string()));
            let (_, reward) = env.query(&full_query, opts.reward_k, &ex.relevant)?;
            episodes.push(Sampled {
                example_idx: ei,
                added: chosen_terms.len(),
                steps,
                reward,
                log_p,
            });
        }
        forwards.push(fwd);
    }

    let mean_reward =
        episodes.iter().map(|e| e.reward).sum::<f64>() / episodes.len() as f64;
    if !baseline.initialized {
        baseline.update(mean_reward);
    }
    let b = baseline.value;

    // gradient pass: dL/dlogit_k accumulates advantage·(p_k − 1{k = chosen})
    // per step, over the active actions of that step
    let mut surrogate = 0.0;
    params.zero_grads();
    for (ei, ex) in batch.iter().enumerate() {
        let Some(fwd) = &forwards[ei] else { continue };
        let mut d_logits = vec![0.0; ex.pool.len()];
        let mut d_stop = 0.0;
        for ep in episodes.iter().filter(|e| e.example_idx == ei) {
            let advantage = ep.reward - b;
            surrogate += -advantage * ep.log_p;
            if advantage == 0.0 {
                continue;
            }
            for (remaining, picked) in &ep.steps {
                let (probs, stop_p) = step_distribution(fwd, remaining);
                for (pos, &r) in remaining.iter().enumerate() {
                    let indicator = if *picked == Some(pos) { 1.0 } else { 0.0 };
                    d_logits[r] += advantage * (probs[pos] - indicator);
                }
                let stop_ind = if picked.is_none() { 1.0 } else { 0.0 };
                d_stop += advantage * (stop_p - stop_ind);
            }
        }
        policy_backward(&d_logits, d_stop, fwd, params, cfg);
    }
    params.check_finite()?;
    optimizer.step(params, lr)?;

    if baseline.initialized {
        baseline.update(mean_reward);
    }
    let mean_added =
        episodes.iter().map(|e| e.added as f64).sum::<f64>() / episodes.len() as f64;
    Ok(ReinforceStats {
        mean_reward,
        mean_added_terms: mean_added,
        surrogate_loss: surrogate,
        baseline: b,
    })
}
