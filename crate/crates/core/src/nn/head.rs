//! Two-layer scoring head: σ(W2·ReLU(W1·z + b1) + b2).

use crate::nn::layers::{relu, sigmoid};
use crate::nn::ModelParams;
use crate::{Error, Result};

pub(crate) struct HeadCache {
    pub z: Vec<f64>,
    pub h_pre: Vec<f64>,
    pub h: Vec<f64>,
    pub logit: f64,
}

pub(crate) fn head_forward(z: &[f64], params: &ModelParams) -> Result<(f64, HeadCache)> {
    let w1 = params.value("head.w1");
    let b1 = params.value("head.b1");
    let w2 = params.value("head.w2");
    let b2 = params.value("head.b2");
    if z.len() != w1.cols() {
        return Err(Error::DimensionMismatch {
            context: "mlp_sigmoid_head",
            expected: w1.cols(),
            actual: z.len(),
        });
    }
    let mut h_pre = b1.data().to_vec();
    w1.matvec_acc(z, &mut h_pre);
    let h: Vec<f64> = h_pre.iter().map(|&x| relu(x)).collect();
    let mut logit = vec![b2.data()[0]];
    w2.matvec_acc(&h, &mut logit);
    let logit = logit[0];
    Ok((sigmoid(logit), HeadCache { z: z.to_vec(), h_pre, h, logit }))
}

/// Backward from the pre-sigmoid logit; returns dL/dz.
pub(crate) fn head_backward(d_logit: f64, cache: &HeadCache, params: &mut ModelParams) -> Vec<f64> {
    params.grad_mut("head.w2").outer_acc(&[d_logit], &cache.h, 1.0);
    params.grad_mut("head.b2").data_mut()[0] += d_logit;
    let mut d_h = vec![0.0; cache.h.len()];
    params.value("head.w2").matvec_t_acc(&[d_logit], &mut d_h);
    for (d, p) in d_h.iter_mut().zip(&cache.h_pre) {
        if *p <= 0.0 {
            *d = 0.0;
        }
    }
    params.grad_mut("head.w1").outer_acc(&d_h, &cache.z, 1.0);
    {
        let gb = params.grad_mut("head.b1");
        for (g, d) in gb.data_mut().iter_mut().zip(&d_h) {
            *g += d;
        }
    }
    let mut d_z = vec![0.0; cache.z.len()];
    params.value("head.w1").matvec_t_acc(&d_h, &mut d_z);
    d_z
}

/// Score a feature vector with the two-layer sigmoid head. The result is a
/// probability strictly inside (0, 1).
pub fn mlp_sigmoid_head(z: &[f64], params: &ModelParams) -> Result<f64> {
    head_forward(z, params).map(|(p, _)| p)
}
