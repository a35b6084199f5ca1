//! Layer primitives with explicit forward caches and analytic backward passes.

use rand::Rng;

use crate::nn::Tensor;

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Sigmoid clamped into the open interval (0, 1) so downstream code can rely
/// on strict bounds even for extreme logits.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(1e-300, 1.0 - f64::EPSILON / 2.0)
}

/// ln(1 + e^x), overflow-safe.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// log Σ exp(xs), overflow-safe; -inf for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// In-place softmax.
pub fn softmax(xs: &mut [f64]) {
    let lse = log_sum_exp(xs);
    for x in xs.iter_mut() {
        *x = (*x - lse).exp();
    }
}

/// Xavier/Glorot uniform init for a (rows × cols) weight matrix.
pub fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(&[rows, cols], data).unwrap()
}

/// N(0, 0.1) init for an embedding table.
pub fn embedding_init<R: Rng>(rng: &mut R, vocab: usize, dim: usize) -> Tensor {
    let normal = rand::distributions::Uniform::new(0.0f64, 1.0f64);
    // Box-Muller on uniform draws keeps us independent of distribution crates.
    let mut data = Vec::with_capacity(vocab * dim);
    while data.len() < vocab * dim {
        let u1: f64 = rng.sample(normal).max(1e-12);
        let u2: f64 = rng.sample(normal);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        data.push(0.1 * r * theta.cos());
        if data.len() < vocab * dim {
            data.push(0.1 * r * theta.sin());
        }
    }
    Tensor::from_vec(&[vocab, dim], data).unwrap()
}

/// 1-D convolution over a (len × c_in) sequence with zero "same" padding.
///
/// `weight` has shape (c_out, width·c_in); tap `dw` of channel pair (o, c)
/// lives at `weight[o][dw·c_in + c]`. Returns the pre-activation (len × c_out).
pub fn conv1d_forward(input: &[f64], len: usize, c_in: usize, weight: &Tensor, bias: &Tensor) -> Vec<f64> {
    let c_out = weight.rows();
    let width = weight.cols() / c_in;
    let pad = (width - 1) / 2;
    let mut out = vec![0.0; len * c_out];
    for i in 0..len {
        let lo = i.saturating_sub(pad);
        let hi = (i + width - pad).min(len);
        for o in 0..c_out {
            let wrow = weight.row(o);
            let mut acc = bias.data()[o];
            for j in lo..hi {
                let dw = j + pad - i;
                let wseg = &wrow[dw * c_in..(dw + 1) * c_in];
                let xseg = &input[j * c_in..(j + 1) * c_in];
                for (w, x) in wseg.iter().zip(xseg) {
                    acc += w * x;
                }
            }
            out[i * c_out + o] = acc;
        }
    }
    out
}

/// Backward pass of [`conv1d_forward`]: accumulates weight/bias gradients and
/// returns the gradient with respect to the input sequence.
pub fn conv1d_backward(
    input: &[f64],
    len: usize,
    c_in: usize,
    weight: &Tensor,
    d_pre: &[f64],
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Vec<f64> {
    let c_out = weight.rows();
    let width = weight.cols() / c_in;
    let pad = (width - 1) / 2;
    let mut d_input = vec![0.0; len * c_in];
    for i in 0..len {
        let lo = i.saturating_sub(pad);
        let hi = (i + width - pad).min(len);
        for o in 0..c_out {
            let d = d_pre[i * c_out + o];
            if d == 0.0 {
                continue;
            }
            grad_b.data_mut()[o] += d;
            let wrow = weight.row(o);
            let grow = grad_w.row_mut(o);
            for j in lo..hi {
                let dw = j + pad - i;
                let xseg = &input[j * c_in..(j + 1) * c_in];
                let wseg = &wrow[dw * c_in..(dw + 1) * c_in];
                let gseg = &mut grow[dw * c_in..(dw + 1) * c_in];
                let dseg = &mut d_input[j * c_in..(j + 1) * c_in];
                for c in 0..c_in {
                    gseg[c] += d * xseg[c];
                    dseg[c] += d * wseg[c];
                }
            }
        }
    }
    d_input
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_stays_in_open_interval() {
        assert!(sigmoid(1e6) < 1.0);
        assert!(sigmoid(-1e6) > 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softplus_matches_naive_form_in_safe_range() {
        for &x in &[-20.0, -1.0, 0.0, 0.5, 20.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12);
        }
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn conv1d_single_tap_is_linear_map() {
        // width 1 conv == per-position linear layer
        let w = Tensor::from_vec(&[1, 2], vec![2.0, -1.0]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.5]).unwrap();
        let input = vec![1.0, 2.0, 3.0, 4.0]; // len 2, c_in 2
        let out = conv1d_forward(&input, 2, 2, &w, &b);
        assert_eq!(out, vec![0.5, 2.5]);
    }

    #[test]
    fn conv1d_same_padding_hand_case() {
        // len 3, c_in 1, width 3, single kernel [1, 10, 100], zero bias
        let w = Tensor::from_vec(&[1, 3], vec![1.0, 10.0, 100.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let out = conv1d_forward(&[1.0, 2.0, 3.0], 3, 1, &w, &b);
        // position 0: pad·1 + 1·10 + 2·100 = 210
        // position 1: 1·1 + 2·10 + 3·100 = 321
        // position 2: 2·1 + 3·10 + pad·100 = 32
        assert_eq!(out, vec![210.0, 321.0, 32.0]);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert!((log_sum_exp(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-9);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
