//! Minimal neural toolkit: embeddings, a 1-D convolutional encoder with
//! average pooling, a bag-of-words encoder, a two-layer sigmoid scoring head,
//! analytic backpropagation, and SGD/Adam optimizers.
//!
//! There is no autodiff graph; each network keeps a forward tape and derives
//! its gradients by hand. Determinism is strict: parameter stores iterate in
//! name order and all randomness comes from caller-supplied RNGs.

pub mod checkpoint;
mod encoder;
mod head;
pub mod layers;
mod optim;
mod params;
mod relevance;
mod tensor;

pub use encoder::{bow_encode, cnn_encode, ConvLayerSpec, EncoderConfig};
pub(crate) use encoder::{bow_backward, bow_forward, cnn_backward, cnn_forward};
pub use head::mlp_sigmoid_head;
pub(crate) use head::{head_backward, head_forward};
pub use optim::{Optimizer, OptimizerKind};
pub use params::ModelParams;
pub use relevance::{
    backprop, init_relevance_params, relevance_prob, InteractionMode, LabeledPair, LossHead,
    RelevanceConfig,
};
pub(crate) use relevance::{assemble_z, split_dz};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn tiny_config() -> RelevanceConfig {
        RelevanceConfig::new(EncoderConfig {
            vocab_size: 12,
            embed_dim: 3,
            cnn_layers: vec![ConvLayerSpec { width: 3, kernels: 4 }],
            output_dim: 2,
        })
    }

    #[test]
    fn zero_params_give_zero_cnn_encoding() {
        let cfg = tiny_config();
        let mut params = init_relevance_params(&cfg, &mut seed::rng(0, "zero")).unwrap();
        for name in params.names().map(String::from).collect::<Vec<_>>() {
            params.value_mut(&name).fill(0.0);
        }
        let out = cnn_encode(&[1, 2, 3], &params, &cfg.encoder).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_token_equals_its_own_pooled_activation() {
        // with one position, average pooling is the identity, so a repeated
        // token sequence of length k collapses to the single-token encoding
        let cfg = tiny_config();
        let params = init_relevance_params(&cfg, &mut seed::rng(1, "single")).unwrap();
        let one = cnn_encode(&[5], &params, &cfg.encoder).unwrap();
        // conv over [5,5,5] sees the same window everywhere only at the middle
        // position; equality is asserted for the length-1 case vs itself and
        // for bow, where pooling is exactly the mean.
        let bow_one = bow_encode(&[5], &params, &cfg.encoder).unwrap();
        let bow_rep = bow_encode(&[5, 5, 5, 5], &params, &cfg.encoder).unwrap();
        for (a, b) in bow_one.iter().zip(&bow_rep) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(one.len(), cfg.encoder.output_dim);
    }

    #[test]
    fn empty_and_out_of_vocab_inputs_error() {
        let cfg = tiny_config();
        let params = init_relevance_params(&cfg, &mut seed::rng(2, "err")).unwrap();
        assert!(matches!(
            cnn_encode(&[], &params, &cfg.encoder),
            Err(crate::Error::EmptyInput(_))
        ));
        assert!(matches!(
            bow_encode(&[], &params, &cfg.encoder),
            Err(crate::Error::EmptyInput(_))
        ));
        assert!(matches!(
            cnn_encode(&[99], &params, &cfg.encoder),
            Err(crate::Error::OutOfVocab { .. })
        ));
    }

    #[test]
    fn bow_is_permutation_invariant_cnn_is_not() {
        let cfg = tiny_config();
        let params = init_relevance_params(&cfg, &mut seed::rng(3, "perm")).unwrap();
        let a = [1u32, 2, 3, 4, 5];
        let b = [5u32, 3, 1, 4, 2];
        let bow_a = bow_encode(&a, &params, &cfg.encoder).unwrap();
        let bow_b = bow_encode(&b, &params, &cfg.encoder).unwrap();
        for (x, y) in bow_a.iter().zip(&bow_b) {
            assert!((x - y).abs() < 1e-12);
        }
        let cnn_a = cnn_encode(&a, &params, &cfg.encoder).unwrap();
        let cnn_b = cnn_encode(&b, &params, &cfg.encoder).unwrap();
        let diff: f64 = cnn_a.iter().zip(&cnn_b).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-9, "cnn encoding should depend on token order");
    }

    #[test]
    fn bow_mean_is_idempotent_over_repeats() {
        let cfg = tiny_config();
        let params = init_relevance_params(&cfg, &mut seed::rng(4, "rep")).unwrap();
        let single = bow_encode(&[7], &params, &cfg.encoder).unwrap();
        let repeated = bow_encode(&[7; 6], &params, &cfg.encoder).unwrap();
        for (a, b) in single.iter().zip(&repeated) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_params_head_outputs_half() {
        let cfg = tiny_config();
        let mut params = init_relevance_params(&cfg, &mut seed::rng(5, "half")).unwrap();
        for name in params.names().map(String::from).collect::<Vec<_>>() {
            params.value_mut(&name).fill(0.0);
        }
        let z = vec![0.3; cfg.interaction.z_dim(cfg.encoder.output_dim)];
        assert_eq!(mlp_sigmoid_head(&z, &params).unwrap(), 0.5);
    }

    #[test]
    fn head_rejects_wrong_z_length() {
        let cfg = tiny_config();
        let params = init_relevance_params(&cfg, &mut seed::rng(6, "dim")).unwrap();
        assert!(matches!(
            mlp_sigmoid_head(&[0.0; 3], &params),
            Err(crate::Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn head_output_strictly_between_zero_and_one() {
        let cfg = tiny_config();
        let mut params = init_relevance_params(&cfg, &mut seed::rng(7, "rng")).unwrap();
        // push weights to the 1e3 bound to stress the sigmoid clamp
        for name in params.names().map(String::from).collect::<Vec<_>>() {
            let t = params.value_mut(&name);
            for v in t.data_mut() {
                *v = v.signum() * 1e3;
            }
        }
        let z = vec![1e3; cfg.interaction.z_dim(cfg.encoder.output_dim)];
        let p = mlp_sigmoid_head(&z, &params).unwrap();
        assert!(p > 0.0 && p < 1.0 && p.is_finite());
    }

    #[test]
    fn backprop_zero_network_matches_hand_bias_gradient() {
        // all-zero weights: s = 0.5 for every pair, loss = n·ln2; the head
        // output bias b2 receives Σ (s - y) = (#neg - #pos)/2, and with ReLU
        // dead at exactly 0 every other gradient stays 0.
        let cfg = tiny_config();
        let mut params = init_relevance_params(&cfg, &mut seed::rng(8, "bias")).unwrap();
        for name in params.names().map(String::from).collect::<Vec<_>>() {
            params.value_mut(&name).fill(0.0);
        }
        let batch = vec![
            LabeledPair { query: vec![1, 2], result: vec![3], label: true },
            LabeledPair { query: vec![4], result: vec![5, 6], label: false },
        ];
        let loss = backprop(LossHead::SigmoidBce, &batch, &mut params, &cfg).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((params.grad("head.b2").data()[0] - 0.0).abs() < 1e-12);
        // one positive, one negative with s = 0.5 → contributions cancel
    }

    #[test]
    fn backprop_duplicated_batch_doubles_loss_and_gradients() {
        let cfg = tiny_config();
        let mut params = init_relevance_params(&cfg, &mut seed::rng(9, "dup")).unwrap();
        let batch = vec![
            LabeledPair { query: vec![1, 2, 3], result: vec![4, 5], label: true },
            LabeledPair { query: vec![6], result: vec![7, 8], label: false },
        ];
        let loss1 = backprop(LossHead::SigmoidBce, &batch, &mut params, &cfg).unwrap();
        let grads1 = params.flatten_grads();
        let mut doubled = batch.clone();
        doubled.extend(batch.clone());
        let loss2 = backprop(LossHead::SigmoidBce, &doubled, &mut params, &cfg).unwrap();
        let grads2 = params.flatten_grads();
        assert!((loss2 - 2.0 * loss1).abs() < 1e-9);
        for (g1, g2) in grads1.iter().zip(&grads2) {
            assert!((g2 - 2.0 * g1).abs() < 1e-9);
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let cfg = tiny_config();
        let run = || {
            let mut params = init_relevance_params(&cfg, &mut seed::rng(10, "det")).unwrap();
            let mut opt = Optimizer::adam();
            let batch = vec![
                LabeledPair { query: vec![1, 2], result: vec![3, 4], label: true },
                LabeledPair { query: vec![5, 6], result: vec![7], label: false },
            ];
            for _ in 0..5 {
                backprop(LossHead::SigmoidBce, &batch, &mut params, &cfg).unwrap();
                opt.step(&mut params, 0.01).unwrap();
            }
            params.flatten_values()
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn forward_outputs_finite_with_bounded_params() {
        let cfg = tiny_config();
        let mut params = init_relevance_params(&cfg, &mut seed::rng(11, "fin")).unwrap();
        for name in params.names().map(String::from).collect::<Vec<_>>() {
            for v in params.value_mut(&name).data_mut() {
                *v = (*v * 1e4).clamp(-1e3, 1e3);
            }
        }
        let u = cnn_encode(&[1, 2, 3, 4], &params, &cfg.encoder).unwrap();
        let v = bow_encode(&[5, 6], &params, &cfg.encoder).unwrap();
        assert!(u.iter().chain(&v).all(|x| x.is_finite()));
        let p = relevance_prob(&[1, 2, 3], &[4, 5], &params, &cfg).unwrap();
        assert!(p.is_finite() && p > 0.0 && p < 1.0);
    }
}
