//! SGD and Adam over a [`ModelParams`] store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::nn::{ModelParams, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer with per-parameter state for Adam (β1 = 0.9, β2 = 0.999,
/// ε = 1e-8). `step` consumes the gradient buffers and clears them.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Optimizer {
        Optimizer {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn sgd() -> Optimizer {
        Optimizer::new(OptimizerKind::Sgd)
    }

    pub fn adam() -> Optimizer {
        Optimizer::new(OptimizerKind::Adam)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Apply one update from the populated gradient buffers, then zero them.
    pub fn step(&mut self, params: &mut ModelParams, lr: f64) -> Result<()> {
        if lr <= 0.0 || !lr.is_finite() {
            return Err(Error::InvalidArg(format!("learning rate must be > 0, got {lr}")));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (_, value, grad) in params.iter_pairs_mut() {
                    value.add_scaled(grad, -lr);
                    grad.fill(0.0);
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - self.beta1.powi(self.t as i32);
                let bc2 = 1.0 - self.beta2.powi(self.t as i32);
                for (name, value, grad) in params.iter_pairs_mut() {
                    let m = self
                        .m
                        .entry(name.to_string())
                        .or_insert_with(|| Tensor::zeros(value.shape()));
                    let v = self
                        .v
                        .entry(name.to_string())
                        .or_insert_with(|| Tensor::zeros(value.shape()));
                    let (pd, gd) = (value.data_mut(), grad.data_mut());
                    let (md, vd) = (m.data_mut(), v.data_mut());
                    for i in 0..pd.len() {
                        md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gd[i];
                        vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gd[i] * gd[i];
                        let m_hat = md[i] / bc1;
                        let v_hat = vd[i] / bc2;
                        pd[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
                        gd[i] = 0.0;
                    }
                }
            }
        }
        params.check_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64, g: f64) -> ModelParams {
        let mut p = ModelParams::new();
        p.insert("w", Tensor::from_vec(&[1], vec![v]).unwrap());
        p.grad_mut("w").data_mut()[0] = g;
        p
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        for mut opt in [Optimizer::sgd(), Optimizer::adam()] {
            let mut p = one_param(2.5, 0.0);
            opt.step(&mut p, 0.1).unwrap();
            assert_eq!(p.value("w").data()[0], 2.5);
        }
    }

    #[test]
    fn sgd_applies_definition() {
        let mut p = one_param(1.0, 0.25);
        Optimizer::sgd().step(&mut p, 0.5).unwrap();
        assert_eq!(p.value("w").data()[0], 1.0 - 0.5 * 0.25);
        assert_eq!(p.grad("w").data()[0], 0.0);
    }

    #[test]
    fn adam_first_step_matches_hand_trace() {
        // m = 0.1 g, v = 0.001 g²; m̂ = g, v̂ = g²
        // update = -lr · g / (|g| + ε)
        let g = -3.0f64;
        let mut p = one_param(0.0, g);
        let mut opt = Optimizer::adam();
        opt.step(&mut p, 0.01).unwrap();
        let expected = -0.01 * g / (g.abs() + 1e-8);
        assert!((p.value("w").data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_positive_learning_rate_is_rejected() {
        let mut p = one_param(1.0, 1.0);
        assert!(Optimizer::sgd().step(&mut p, 0.0).is_err());
        assert!(Optimizer::adam().step(&mut p, -1.0).is_err());
    }
}
