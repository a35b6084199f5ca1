//! Query/result encoders: a 1-D CNN with average pooling and a bag-of-words
//! encoder. Both end with a learned linear projection to a common output
//! dimension so the downstream feature vector is well-typed.

use serde::{Deserialize, Serialize};

use crate::nn::layers::{conv1d_backward, conv1d_forward, relu};
use crate::nn::{ModelParams, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub width: usize,
    pub kernels: usize,
}

/// Shape of the encoders. `output_dim` is the common dimension D that both the
/// CNN and the bag-of-words encoder project into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub cnn_layers: Vec<ConvLayerSpec>,
    pub output_dim: usize,
}

impl EncoderConfig {
    /// Full-size preset: two conv layers with filter widths 9 and 3, 128 and
    /// 256 kernels, D = 512.
    pub fn paper(vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            embed_dim: 128,
            cnn_layers: vec![
                ConvLayerSpec { width: 9, kernels: 128 },
                ConvLayerSpec { width: 3, kernels: 256 },
            ],
            output_dim: 512,
        }
    }

    /// Desk-scale preset: same layer structure, narrow channels, D = 64.
    pub fn desk(vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            vocab_size,
            embed_dim: 16,
            cnn_layers: vec![
                ConvLayerSpec { width: 9, kernels: 16 },
                ConvLayerSpec { width: 3, kernels: 32 },
            ],
            output_dim: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidArg("encoder dims must be >= 1".into()));
        }
        if self.cnn_layers.is_empty() {
            return Err(Error::InvalidArg("at least one conv layer required".into()));
        }
        if self.cnn_layers.iter().any(|l| l.width == 0 || l.kernels == 0) {
            return Err(Error::InvalidArg("conv widths and kernel counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn last_kernels(&self) -> usize {
        self.cnn_layers.last().map(|l| l.kernels).unwrap_or(self.embed_dim)
    }
}

fn check_ids(ids: &[u32], vocab_size: usize, what: &'static str) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    for &id in ids {
        if id as usize >= vocab_size {
            return Err(Error::OutOfVocab { id, vocab_size });
        }
    }
    Ok(())
}

fn embed_rows(ids: &[u32], table: &Tensor) -> Vec<f64> {
    let dim = table.cols();
    let mut out = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        out.extend_from_slice(table.row(id as usize));
    }
    out
}

pub(crate) struct CnnCache {
    ids: Vec<u32>,
    /// Input matrix of every conv layer; `layer_inputs[0]` is the embedding.
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-ReLU activations per conv layer.
    preacts: Vec<Vec<f64>>,
    pooled: Vec<f64>,
}

/// CNN encoder forward pass, keeping the activations needed for backprop.
pub(crate) fn cnn_forward(
    ids: &[u32],
    params: &ModelParams,
    cfg: &EncoderConfig,
    embed_key: &str,
) -> Result<(Vec<f64>, CnnCache)> {
    check_ids(ids, cfg.vocab_size, "cnn_encode")?;
    let len = ids.len();
    let table = params.value(embed_key);
    let mut layer_inputs = vec![embed_rows(ids, table)];
    let mut preacts = Vec::with_capacity(cfg.cnn_layers.len());
    let mut c_in = cfg.embed_dim;
    for (li, layer) in cfg.cnn_layers.iter().enumerate() {
        let w = params.value(&format!("cnn.{li}.w"));
        let b = params.value(&format!("cnn.{li}.b"));
        let pre = conv1d_forward(layer_inputs.last().unwrap(), len, c_in, w, b);
        let act: Vec<f64> = pre.iter().map(|&x| relu(x)).collect();
        preacts.push(pre);
        layer_inputs.push(act);
        c_in = layer.kernels;
    }
    let c_last = cfg.last_kernels();
    let mut pooled = vec![0.0; c_last];
    let last = layer_inputs.last().unwrap();
    for i in 0..len {
        for (p, v) in pooled.iter_mut().zip(&last[i * c_last..(i + 1) * c_last]) {
            *p += v;
        }
    }
    for p in pooled.iter_mut() {
        *p /= len as f64;
    }
    let proj_w = params.value("cnn_proj.w");
    let proj_b = params.value("cnn_proj.b");
    let mut out = proj_b.data().to_vec();
    proj_w.matvec_acc(&pooled, &mut out);
    let cache = CnnCache { ids: ids.to_vec(), layer_inputs, preacts, pooled };
    Ok((out, cache))
}

/// Backward pass of [`cnn_forward`]; accumulates into gradient buffers.
pub(crate) fn cnn_backward(
    d_out: &[f64],
    cache: &CnnCache,
    params: &mut ModelParams,
    cfg: &EncoderConfig,
    embed_key: &str,
) {
    let len = cache.ids.len();
    let c_last = cfg.last_kernels();

    // projection
    params.grad_mut("cnn_proj.w").outer_acc(d_out, &cache.pooled, 1.0);
    {
        let gb = params.grad_mut("cnn_proj.b");
        for (g, d) in gb.data_mut().iter_mut().zip(d_out) {
            *g += d;
        }
    }
    let mut d_pooled = vec![0.0; c_last];
    params.value("cnn_proj.w").matvec_t_acc(d_out, &mut d_pooled);

    // average pool
    let inv_len = 1.0 / len as f64;
    let mut d_act: Vec<f64> = vec![0.0; len * c_last];
    for i in 0..len {
        for (da, dp) in d_act[i * c_last..(i + 1) * c_last].iter_mut().zip(&d_pooled) {
            *da = dp * inv_len;
        }
    }

    // conv stack, last layer first
    let mut c_ins = Vec::with_capacity(cfg.cnn_layers.len());
    let mut c_in = cfg.embed_dim;
    for layer in &cfg.cnn_layers {
        c_ins.push(c_in);
        c_in = layer.kernels;
    }
    for li in (0..cfg.cnn_layers.len()).rev() {
        let c_out = cfg.cnn_layers[li].kernels;
        let pre = &cache.preacts[li];
        let mut d_pre = d_act;
        for (d, p) in d_pre.iter_mut().zip(pre) {
            if *p <= 0.0 {
                *d = 0.0;
            }
        }
        debug_assert_eq!(d_pre.len(), len * c_out);
        let input = &cache.layer_inputs[li];
        let wkey = format!("cnn.{li}.w");
        let bkey = format!("cnn.{li}.b");
        // borrow the weight by value-clone of the handle is avoided: split calls
        let d_input = {
            let w = params.value(&wkey).clone();
            let mut gw = std::mem::replace(params.grad_mut(&wkey), Tensor::zeros(&[0]));
            let mut gb = std::mem::replace(params.grad_mut(&bkey), Tensor::zeros(&[0]));
            let d_input = conv1d_backward(input, len, c_ins[li], &w, &d_pre, &mut gw, &mut gb);
            *params.grad_mut(&wkey) = gw;
            *params.grad_mut(&bkey) = gb;
            d_input
        };
        d_act = d_input;
    }

    // embedding rows
    let dim = cfg.embed_dim;
    let ge = params.grad_mut(embed_key);
    for (pos, &id) in cache.ids.iter().enumerate() {
        let grow = ge.row_mut(id as usize);
        for (g, d) in grow.iter_mut().zip(&d_act[pos * dim..(pos + 1) * dim]) {
            *g += d;
        }
    }
}

pub(crate) struct BowCache {
    ids: Vec<u32>,
    mean_embed: Vec<f64>,
}

/// Bag-of-words forward: mean of embedding rows, then linear projection.
pub(crate) fn bow_forward(
    ids: &[u32],
    params: &ModelParams,
    cfg: &EncoderConfig,
    embed_key: &str,
) -> Result<(Vec<f64>, BowCache)> {
    check_ids(ids, cfg.vocab_size, "bow_encode")?;
    let table = params.value(embed_key);
    let dim = cfg.embed_dim;
    let mut mean = vec![0.0; dim];
    for &id in ids {
        for (m, v) in mean.iter_mut().zip(table.row(id as usize)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= ids.len() as f64;
    }
    let w = params.value("bow_proj.w");
    let b = params.value("bow_proj.b");
    let mut out = b.data().to_vec();
    w.matvec_acc(&mean, &mut out);
    Ok((out, BowCache { ids: ids.to_vec(), mean_embed: mean }))
}

pub(crate) fn bow_backward(
    d_out: &[f64],
    cache: &BowCache,
    params: &mut ModelParams,
    cfg: &EncoderConfig,
    embed_key: &str,
) {
    params.grad_mut("bow_proj.w").outer_acc(d_out, &cache.mean_embed, 1.0);
    {
        let gb = params.grad_mut("bow_proj.b");
        for (g, d) in gb.data_mut().iter_mut().zip(d_out) {
            *g += d;
        }
    }
    let mut d_mean = vec![0.0; cfg.embed_dim];
    params.value("bow_proj.w").matvec_t_acc(d_out, &mut d_mean);
    let inv = 1.0 / cache.ids.len() as f64;
    let ge = params.grad_mut(embed_key);
    for &id in &cache.ids {
        let grow = ge.row_mut(id as usize);
        for (g, d) in grow.iter_mut().zip(&d_mean) {
            *g += d * inv;
        }
    }
}

/// Encode a token sequence with the CNN encoder: embed, per-layer (1-D conv,
/// ReLU), average-pool over positions, project to D.
pub fn cnn_encode(tokens: &[u32], params: &ModelParams, cfg: &EncoderConfig) -> Result<Vec<f64>> {
    cnn_forward(tokens, params, cfg, "embed").map(|(out, _)| out)
}

/// Encode a token sequence as the mean of its embeddings projected to D.
pub fn bow_encode(tokens: &[u32], params: &ModelParams, cfg: &EncoderConfig) -> Result<Vec<f64>> {
    bow_forward(tokens, params, cfg, "embed").map(|(out, _)| out)
}
