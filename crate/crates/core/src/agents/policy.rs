//! The term-selection policy: a small MLP scoring each pool term from its
//! features, its embedding, and the mean query embedding, plus a stop head.
//!
//! Logits are a function of (q0, pool) only, so one forward pass serves a
//! whole decoding episode; selection without replacement renormalizes the
//! softmax over the remaining actions at every step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::CandidatePool;
use crate::nn::layers::{embedding_init, log_sum_exp, relu, xavier};
use crate::nn::{ModelParams, Tensor};
use crate::{Error, Result};

/// Number of scalar selection features per pool term.
pub const FEATURE_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Embedding vocabulary (corpus vocabulary + 1; id 0 is the unknown slot).
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl PolicyConfig {
    pub fn desk(vocab_size: usize) -> PolicyConfig {
        PolicyConfig { vocab_size, embed_dim: 16, hidden_dim: 32 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArg("policy dims must be >= 1".into()));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        FEATURE_DIM + 2 * self.embed_dim
    }
}

/// Initialize policy parameters: Xavier matrices, zero biases, N(0, 0.1)
/// embeddings.
pub fn init_policy_params<R: Rng>(cfg: &PolicyConfig, rng: &mut R) -> Result<ModelParams> {
    cfg.validate()?;
    let mut params = ModelParams::new();
    params.insert("embed", embedding_init(rng, cfg.vocab_size, cfg.embed_dim));
    params.insert("term.w1", xavier(rng, cfg.hidden_dim, cfg.input_dim()));
    params.insert("term.b1", Tensor::zeros(&[cfg.hidden_dim]));
    params.insert("term.w2", xavier(rng, 1, cfg.hidden_dim));
    params.insert("term.b2", Tensor::zeros(&[1]));
    params.insert("stop.w", xavier(rng, 1, cfg.embed_dim));
    params.insert("stop.b", Tensor::zeros(&[1]));
    Ok(params)
}

pub(crate) struct PolicyForward {
    pub q_ids: Vec<u32>,
    pub qbar: Vec<f64>,
    /// Per-term input vectors [features; term embedding; qbar].
    pub inputs: Vec<Vec<f64>>,
    /// Per-term hidden pre-activations.
    pub h_pres: Vec<Vec<f64>>,
    pub term_ids: Vec<u32>,
    pub logits: Vec<f64>,
    pub stop_logit: f64,
}

pub(crate) fn policy_forward(
    params: &ModelParams,
    cfg: &PolicyConfig,
    pool: &CandidatePool,
    q0_ids: &[u32],
) -> Result<PolicyForward> {
    if q0_ids.is_empty() {
        return Err(Error::EmptyInput("policy_forward: q0"));
    }
    let table = params.value("embed");
    for &id in q0_ids.iter().chain(pool.terms.iter().map(|t| &t.nn_id)) {
        if id as usize >= cfg.vocab_size {
            return Err(Error::OutOfVocab { id, vocab_size: cfg.vocab_size });
        }
    }
    let e = cfg.embed_dim;
    let mut qbar = vec![0.0; e];
    for &id in q0_ids {
        for (a, b) in qbar.iter_mut().zip(table.row(id as usize)) {
            *a += b;
        }
    }
    for a in qbar.iter_mut() {
        *a /= q0_ids.len() as f64;
    }

    let w1 = params.value("term.w1");
    let b1 = params.value("term.b1");
    let w2 = params.value("term.w2");
    let b2 = params.value("term.b2").data()[0];
    let mut inputs = Vec::with_capacity(pool.len());
    let mut h_pres = Vec::with_capacity(pool.len());
    let mut logits = Vec::with_capacity(pool.len());
    let mut term_ids = Vec::with_capacity(pool.len());
    for t in &pool.terms {
        let mut x = Vec::with_capacity(cfg.input_dim());
        x.extend_from_slice(&t.features);
        x.extend_from_slice(table.row(t.nn_id as usize));
        x.extend_from_slice(&qbar);
        let mut h_pre = b1.data().to_vec();
        w1.matvec_acc(&x, &mut h_pre);
        let h: Vec<f64> = h_pre.iter().map(|&v| relu(v)).collect();
        let mut logit = vec![b2];
        w2.matvec_acc(&h, &mut logit);
        logits.push(logit[0]);
        inputs.push(x);
        h_pres.push(h_pre);
        term_ids.push(t.nn_id);
    }
    let stop_w = params.value("stop.w");
    let mut stop_logit = vec![params.value("stop.b").data()[0]];
    stop_w.matvec_acc(&qbar, &mut stop_logit);
    Ok(PolicyForward {
        q_ids: q0_ids.to_vec(),
        qbar,
        inputs,
        h_pres,
        term_ids,
        logits,
        stop_logit: stop_logit[0],
    })
}

/// Accumulate gradients for dL/dlogit over pool terms plus the stop action.
pub(crate) fn policy_backward(
    d_logits: &[f64],
    d_stop: f64,
    fwd: &PolicyForward,
    params: &mut ModelParams,
    cfg: &PolicyConfig,
) {
    let e = cfg.embed_dim;
    let mut d_qbar = vec![0.0; e];

    if d_stop != 0.0 {
        params.grad_mut("stop.w").outer_acc(&[d_stop], &fwd.qbar, 1.0);
        params.grad_mut("stop.b").data_mut()[0] += d_stop;
        params.value("stop.w").matvec_t_acc(&[d_stop], &mut d_qbar);
    }

    for (j, &d) in d_logits.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let h: Vec<f64> = fwd.h_pres[j].iter().map(|&v| relu(v)).collect();
        params.grad_mut("term.w2").outer_acc(&[d], &h, 1.0);
        params.grad_mut("term.b2").data_mut()[0] += d;
        let mut d_h = vec![0.0; h.len()];
        params.value("term.w2").matvec_t_acc(&[d], &mut d_h);
        for (dh, pre) in d_h.iter_mut().zip(&fwd.h_pres[j]) {
            if *pre <= 0.0 {
                *dh = 0.0;
            }
        }
        params.grad_mut("term.w1").outer_acc(&d_h, &fwd.inputs[j], 1.0);
        {
            let gb = params.grad_mut("term.b1");
            for (g, dh) in gb.data_mut().iter_mut().zip(&d_h) {
                *g += dh;
            }
        }
        let mut d_x = vec![0.0; cfg.input_dim()];
        params.value("term.w1").matvec_t_acc(&d_h, &mut d_x);
        // input layout: [features; term embedding; qbar]
        let ge = params.grad_mut("embed");
        let row = ge.row_mut(fwd.term_ids[j] as usize);
        for (g, dx) in row.iter_mut().zip(&d_x[FEATURE_DIM..FEATURE_DIM + e]) {
            *g += dx;
        }
        for (dq, dx) in d_qbar.iter_mut().zip(&d_x[FEATURE_DIM + e..]) {
            *dq += dx;
        }
    }

    let inv = 1.0 / fwd.q_ids.len() as f64;
    let ge = params.grad_mut("embed");
    for &id in &fwd.q_ids {
        let row = ge.row_mut(id as usize);
        for (g, dq) in row.iter_mut().zip(&d_qbar) {
            *g += dq * inv;
        }
    }
}

/// Softmax over `remaining` pool indices plus the stop action; returns the
/// per-remaining-term probabilities followed by the stop probability.
pub(crate) fn step_distribution(fwd: &PolicyForward, remaining: &[usize]) -> (Vec<f64>, f64) {
    let mut logits: Vec<f64> = remaining.iter().map(|&r| fwd.logits[r]).collect();
    logits.push(fwd.stop_logit);
    let lse = log_sum_exp(&logits);
    let probs: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    let stop = probs[probs.len() - 1];
    (probs[..probs.len() - 1].to_vec(), stop)
}

/// First-step action distribution of the policy on (q0, pool): the
/// probability of picking each pool term and of stopping immediately.
pub fn action_distribution(
    params: &ModelParams,
    cfg: &PolicyConfig,
    pool: &CandidatePool,
    q0_ids: &[u32],
) -> Result<(Vec<f64>, f64)> {
    let fwd = policy_forward(params, cfg, pool, q0_ids)?;
    let remaining: Vec<usize> = (0..pool.len()).collect();
    Ok(step_distribution(&fwd, &remaining))
}

/// Exact log-probability of a given action sequence (pool indices in
/// selection order) under the policy, with episodes capped at `t_max` picks.
pub fn sequence_log_prob(
    params: &ModelParams,
    cfg: &PolicyConfig,
    pool: &CandidatePool,
    q0_ids: &[u32],
    chosen: &[usize],
    t_max: usize,
) -> Result<f64> {
    if chosen.len() > t_max {
        return Err(Error::InvalidArg("sequence longer than t_max".into()));
    }
    let fwd = policy_forward(params, cfg, pool, q0_ids)?;
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut log_p = 0.0;
    for &pick in chosen {
        let (probs, _) = step_distribution(&fwd, &remaining);
        let pos = remaining
            .iter()
            .position(|&r| r == pick)
            .ok_or_else(|| Error::InvalidArg(format!("action {pick} not available")))?;
        log_p += probs[pos].ln();
        remaining.remove(pos);
    }
    if chosen.len() < t_max && !remaining.is_empty() {
        let (_, stop) = step_distribution(&fwd, &remaining);
        log_p += stop.ln();
    }
    Ok(log_p)
}
