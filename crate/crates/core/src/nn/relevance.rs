//! The relevance comparator network: CNN-encoded query vs bag-of-words
//! encoded result, combined through an interaction feature vector and scored
//! by the sigmoid head. Training minimizes binary cross-entropy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::encoder::{bow_backward, bow_forward, cnn_backward, cnn_forward, BowCache, CnnCache};
use crate::nn::head::{head_backward, head_forward, HeadCache};
use crate::nn::layers::{embedding_init, softplus, xavier};
use crate::nn::{EncoderConfig, ModelParams, Tensor};
use crate::{Error, Result};

/// How the query vector u and result vector v are combined into z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionMode {
    /// z = [u; v; u − v; u ⊙ v], length 4D.
    Full,
    /// z = [u; v], length 2D (ablation).
    ConcatOnly,
}

impl InteractionMode {
    pub fn z_dim(&self, d: usize) -> usize {
        match self {
            InteractionMode::Full => 4 * d,
            InteractionMode::ConcatOnly => 2 * d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceConfig {
    pub encoder: EncoderConfig,
    pub interaction: InteractionMode,
    /// One embedding table for both encoders (default) or separate tables.
    pub shared_embedding: bool,
}

impl RelevanceConfig {
    pub fn new(encoder: EncoderConfig) -> RelevanceConfig {
        RelevanceConfig { encoder, interaction: InteractionMode::Full, shared_embedding: true }
    }

    pub fn query_embed_key(&self) -> &'static str {
        if self.shared_embedding {
            "embed"
        } else {
            "embed.q"
        }
    }

    pub fn result_embed_key(&self) -> &'static str {
        if self.shared_embedding {
            "embed"
        } else {
            "embed.a"
        }
    }
}

/// Allocate and initialize all parameters of the relevance network:
/// Xavier-uniform matrices, zero biases, N(0, 0.1) embeddings.
pub fn init_relevance_params<R: Rng>(cfg: &RelevanceConfig, rng: &mut R) -> Result<ModelParams> {
    cfg.encoder.validate()?;
    let enc = &cfg.encoder;
    let mut params = ModelParams::new();
    if cfg.shared_embedding {
        params.insert("embed", embedding_init(rng, enc.vocab_size, enc.embed_dim));
    } else {
        params.insert("embed.q", embedding_init(rng, enc.vocab_size, enc.embed_dim));
        params.insert("embed.a", embedding_init(rng, enc.vocab_size, enc.embed_dim));
    }
    let mut c_in = enc.embed_dim;
    for (li, layer) in enc.cnn_layers.iter().enumerate() {
        params.insert(&format!("cnn.{li}.w"), xavier(rng, layer.kernels, layer.width * c_in));
        params.insert(&format!("cnn.{li}.b"), Tensor::zeros(&[layer.kernels]));
        c_in = layer.kernels;
    }
    params.insert("cnn_proj.w", xavier(rng, enc.output_dim, enc.last_kernels()));
    params.insert("cnn_proj.b", Tensor::zeros(&[enc.output_dim]));
    params.insert("bow_proj.w", xavier(rng, enc.output_dim, enc.embed_dim));
    params.insert("bow_proj.b", Tensor::zeros(&[enc.output_dim]));
    let z_dim = cfg.interaction.z_dim(enc.output_dim);
    params.insert("head.w1", xavier(rng, enc.output_dim, z_dim));
    params.insert("head.b1", Tensor::zeros(&[enc.output_dim]));
    params.insert("head.w2", xavier(rng, 1, enc.output_dim));
    params.insert("head.b2", Tensor::zeros(&[1]));
    Ok(params)
}

pub(crate) struct RelevanceTape {
    q_cache: CnnCache,
    a_cache: BowCache,
    head: HeadCache,
    u: Vec<f64>,
    v: Vec<f64>,
}

pub(crate) fn assemble_z(u: &[f64], v: &[f64], mode: InteractionMode) -> Vec<f64> {
    match mode {
        InteractionMode::Full => {
            let mut z = Vec::with_capacity(4 * u.len());
            z.extend_from_slice(u);
            z.extend_from_slice(v);
            z.extend(u.iter().zip(v).map(|(a, b)| a - b));
            z.extend(u.iter().zip(v).map(|(a, b)| a * b));
            z
        }
        InteractionMode::ConcatOnly => {
            let mut z = Vec::with_capacity(2 * u.len());
            z.extend_from_slice(u);
            z.extend_from_slice(v);
            z
        }
    }
}

/// Forward pass: probability that `result` is relevant to `query`.
pub(crate) fn relevance_forward(
    query: &[u32],
    result: &[u32],
    params: &ModelParams,
    cfg: &RelevanceConfig,
) -> Result<(f64, RelevanceTape)> {
    let (u, q_cache) = cnn_forward(query, params, &cfg.encoder, cfg.query_embed_key())?;
    let (v, a_cache) = bow_forward(result, params, &cfg.encoder, cfg.result_embed_key())?;
    let z = assemble_z(&u, &v, cfg.interaction);
    let (prob, head) = head_forward(&z, params)?;
    Ok((prob, RelevanceTape { q_cache, a_cache, head, u, v }))
}

/// Convenience wrapper that discards the tape.
pub fn relevance_prob(
    query: &[u32],
    result: &[u32],
    params: &ModelParams,
    cfg: &RelevanceConfig,
) -> Result<f64> {
    relevance_forward(query, result, params, cfg).map(|(p, _)| p)
}

/// Split dL/dz into the query-vector and result-vector gradients.
pub(crate) fn split_dz(d_z: &[f64], u: &[f64], v: &[f64], mode: InteractionMode) -> (Vec<f64>, Vec<f64>) {
    let d = u.len();
    let mut d_u = vec![0.0; d];
    let mut d_v = vec![0.0; d];
    match mode {
        InteractionMode::Full => {
            for i in 0..d {
                d_u[i] = d_z[i] + d_z[2 * d + i] + d_z[3 * d + i] * v[i];
                d_v[i] = d_z[d + i] - d_z[2 * d + i] + d_z[3 * d + i] * u[i];
            }
        }
        InteractionMode::ConcatOnly => {
            d_u.copy_from_slice(&d_z[..d]);
            d_v.copy_from_slice(&d_z[d..2 * d]);
        }
    }
    (d_u, d_v)
}

/// Backward pass from dL/dlogit; accumulates into gradient buffers.
pub(crate) fn relevance_backward(
    d_logit: f64,
    tape: &RelevanceTape,
    params: &mut ModelParams,
    cfg: &RelevanceConfig,
) {
    let d_z = head_backward(d_logit, &tape.head, params);
    let (d_u, d_v) = split_dz(&d_z, &tape.u, &tape.v, cfg.interaction);
    cnn_backward(&d_u, &tape.q_cache, params, &cfg.encoder, cfg.query_embed_key());
    bow_backward(&d_v, &tape.a_cache, params, &cfg.encoder, cfg.result_embed_key());
}

/// Loss attached to the network output during [`backprop`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossHead {
    /// Binary cross-entropy on the sigmoid output.
    SigmoidBce,
}

/// One training example for the relevance network.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub query: Vec<u32>,
    pub result: Vec<u32>,
    pub label: bool,
}

/// Run forward and analytic backward over a batch, overwriting the gradient
/// buffers. Returns the summed loss. Cross-entropy is evaluated in its
/// softplus form so extreme logits cannot produce log(0).
pub fn backprop(
    head: LossHead,
    batch: &[LabeledPair],
    params: &mut ModelParams,
    cfg: &RelevanceConfig,
) -> Result<f64> {
    let LossHead::SigmoidBce = head;
    params.zero_grads();
    let mut loss = 0.0;
    for pair in batch {
        let (prob, tape) = relevance_forward(&pair.query, &pair.result, params, cfg)?;
        let y = if pair.label { 1.0 } else { 0.0 };
        // -log σ(x) = softplus(-x); -log(1-σ(x)) = softplus(x)
        loss += if pair.label { softplus(-tape.head.logit) } else { softplus(tape.head.logit) };
        let d_logit = prob - y;
        relevance_backward(d_logit, &tape, params, cfg);
    }
    if !loss.is_finite() {
        let name = params.first_non_finite().unwrap_or_else(|| "loss".to_string());
        return Err(Error::NonFinite(name));
    }
    params.check_finite()?;
    Ok(loss)
}
