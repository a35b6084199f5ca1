//! Experiment configuration. The JSON schema mirrors the hyperparameter
//! names used throughout: sub-agents carry `mini_batch_size`, `optimizer`,
//! and `learning_rate`; the aggregator encoder carries `filter_sizes`,
//! `kernels`, and `d`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use requery_core::aggregator::ScoreVariant;
use requery_core::nn::{ConvLayerSpec, EncoderConfig, InteractionMode, OptimizerKind, RelevanceConfig};
use requery_core::partition::PartitionStrategy;
use requery_core::{Error, Result};

use crate::synth::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    /// Generate a synthetic benchmark.
    Synthetic(SyntheticSpec),
    /// Load corpus/queries/qrels files (JSON-lines corpus, TSV queries/qrels).
    Files { corpus: PathBuf, queries: PathBuf, qrels: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { n_train: 500, n_dev: 100, n_test: 100 }
    }
}

/// Sub-agent (policy) training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAgentSettings {
    pub mini_batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub n_samples: usize,
    pub t_max: usize,
    /// Candidate pool: top-M tf-idf terms from each of the top-K documents.
    pub k_docs: usize,
    pub m_terms: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub beam_width: usize,
}

impl Default for SubAgentSettings {
    fn default() -> Self {
        SubAgentSettings {
            mini_batch_size: 32,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.02,
            epochs: 4,
            n_samples: 8,
            t_max: 5,
            k_docs: 10,
            m_terms: 10,
            embed_dim: 16,
            hidden_dim: 32,
            beam_width: 20,
        }
    }
}

impl SubAgentSettings {
    /// Full-size preset: mini-batches of 256, Adam, learning rate 1e-4.
    pub fn paper() -> SubAgentSettings {
        SubAgentSettings {
            mini_batch_size: 256,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            epochs: 20,
            n_samples: 8,
            t_max: 10,
            k_docs: 10,
            m_terms: 20,
            embed_dim: 64,
            hidden_dim: 128,
            beam_width: 20,
        }
    }
}

/// Aggregator settings: encoder shape plus training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorSettings {
    /// CNN filter widths per layer.
    pub filter_sizes: Vec<usize>,
    /// CNN kernel counts per layer.
    pub kernels: Vec<usize>,
    /// Common encoder output dimension D.
    pub d: usize,
    pub embed_dim: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub mini_batch_size: usize,
    pub epochs: usize,
    pub result_text_len: usize,
    pub negative_cap: Option<usize>,
    pub score_variant: ScoreVariant,
    pub shared_embedding: bool,
}

impl Default for AggregatorSettings {
    fn default() -> Self {
        AggregatorSettings {
            filter_sizes: vec![9, 3],
            kernels: vec![16, 32],
            d: 32,
            embed_dim: 16,
            optimizer: OptimizerKind::Adam,
            learning_rate: 3e-3,
            mini_batch_size: 64,
            epochs: 20,
            result_text_len: 64,
            negative_cap: None,
            score_variant: ScoreVariant::Product,
            shared_embedding: true,
        }
    }
}

impl AggregatorSettings {
    /// Full-size preset: filters (9, 3), kernels (128, 256), D = 512, Adam at
    /// 1e-4, mini-batches of 64, 100 epochs.
    pub fn paper() -> AggregatorSettings {
        AggregatorSettings {
            filter_sizes: vec![9, 3],
            kernels: vec![128, 256],
            d: 512,
            embed_dim: 128,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            mini_batch_size: 64,
            epochs: 100,
            result_text_len: 64,
            negative_cap: Some(32),
            score_variant: ScoreVariant::Product,
            shared_embedding: true,
        }
    }

    pub fn relevance_config(&self, nn_vocab: usize) -> RelevanceConfig {
        RelevanceConfig {
            encoder: EncoderConfig {
                vocab_size: nn_vocab,
                embed_dim: self.embed_dim,
                cnn_layers: self
                    .filter_sizes
                    .iter()
                    .zip(&self.kernels)
                    .map(|(&width, &kernels)| ConvLayerSpec { width, kernels })
                    .collect(),
                output_dim: self.d,
            },
            interaction: match self.score_variant {
                ScoreVariant::ConcatFeatures => InteractionMode::ConcatOnly,
                _ => InteractionMode::Full,
            },
            shared_embedding: self.shared_embedding,
        }
    }
}

/// Grid-search space for the PRF and RM3 baselines (evaluated on dev by the
/// reward metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineGrid {
    pub prf_n_terms: Vec<usize>,
    pub prf_k_docs: Vec<usize>,
    pub rm3_lambda: Vec<f64>,
    pub rm3_n_terms: Vec<usize>,
    pub rm3_feedback_depth: Vec<usize>,
    pub rm3_u: Vec<f64>,
}

impl Default for BaselineGrid {
    fn default() -> Self {
        BaselineGrid {
            prf_n_terms: vec![0, 1, 2, 3],
            prf_k_docs: vec![1, 3, 5],
            rm3_lambda: vec![0.3, 0.65, 0.9],
            rm3_n_terms: vec![8, 12, 16],
            rm3_feedback_depth: vec![5, 10],
            rm3_u: vec![10.0, 100.0, 1500.0],
        }
    }
}

/// The experiment arms of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Bm25,
    Prf,
    Rm3,
    /// Single policy trained on the full set, greedy decode, no aggregator.
    RlRnn,
    /// N full-data policies, probability-averaged ensemble decoding.
    RlNEnsemble,
    /// N full-data policies + aggregator.
    RlNFull,
    /// N bootstrap-sampled policies + aggregator.
    RlNBagging,
    /// N partition-trained policies + aggregator.
    RlNSub,
    /// Like RlNSub, but initialized from a full-data checkpoint.
    RlNSubPretrained,
    /// One policy, greedy reformulation + aggregator.
    RlRnnGreedyAgg,
    /// One policy, `beam_width` sampled reformulations + aggregator.
    RlRnnSampledAgg,
    /// One policy, `beam_width` beam reformulations + aggregator.
    RlRnnBeamAgg,
}

impl Arm {
    pub const ALL: [Arm; 12] = [
        Arm::Bm25,
        Arm::Prf,
        Arm::Rm3,
        Arm::RlRnn,
        Arm::RlNEnsemble,
        Arm::RlNFull,
        Arm::RlNBagging,
        Arm::RlNSub,
        Arm::RlNSubPretrained,
        Arm::RlRnnGreedyAgg,
        Arm::RlRnnSampledAgg,
        Arm::RlRnnBeamAgg,
    ];

    pub fn label(&self, n_agents: usize) -> String {
        match self {
            Arm::Bm25 => "BM25".to_string(),
            Arm::Prf => "PRF".to_string(),
            Arm::Rm3 => "RM3".to_string(),
            Arm::RlRnn => "RL-RNN".to_string(),
            Arm::RlNEnsemble => format!("RL-{n_agents}-Ensemble"),
            Arm::RlNFull => format!("RL-{n_agents}-Full"),
            Arm::RlNBagging => format!("RL-{n_agents}-Bagging"),
            Arm::RlNSub => format!("RL-{n_agents}-Sub"),
            Arm::RlNSubPretrained => format!("RL-{n_agents}-Sub (Pretrained)"),
            Arm::RlRnnGreedyAgg => "RL-RNN Greedy + Aggregator".to_string(),
            Arm::RlRnnSampledAgg => "RL-RNN Sampled + Aggregator".to_string(),
            Arm::RlRnnBeamAgg => "RL-RNN Beam + Aggregator".to_string(),
        }
    }

    /// Directory-safe identifier.
    pub fn slug(&self) -> &'static str {
        match self {
            Arm::Bm25 => "bm25",
            Arm::Prf => "prf",
            Arm::Rm3 => "rm3",
            Arm::RlRnn => "rl-rnn",
            Arm::RlNEnsemble => "rl-n-ensemble",
            Arm::RlNFull => "rl-n-full",
            Arm::RlNBagging => "rl-n-bagging",
            Arm::RlNSub => "rl-n-sub",
            Arm::RlNSubPretrained => "rl-n-sub-pretrained",
            Arm::RlRnnGreedyAgg => "rl-rnn-greedy-agg",
            Arm::RlRnnSampledAgg => "rl-rnn-sampled-agg",
            Arm::RlRnnBeamAgg => "rl-rnn-beam-agg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub split: SplitSpec,
    pub n_agents: usize,
    pub partition_strategy: PartitionStrategy,
    /// K of the training reward Recall@K.
    pub reward_k: usize,
    /// K of the reported metrics and final rankings.
    pub eval_k: usize,
    pub arms: Vec<Arm>,
    pub seeds: Vec<u64>,
    pub subagent: SubAgentSettings,
    pub aggregator: AggregatorSettings,
    pub baseline_grid: BaselineGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusSource::Synthetic(SyntheticSpec::default()),
            split: SplitSpec::default(),
            n_agents: 4,
            partition_strategy: PartitionStrategy::Random,
            reward_k: 10,
            eval_k: 10,
            arms: vec![Arm::Bm25, Arm::Prf, Arm::Rm3, Arm::RlRnn, Arm::RlNFull, Arm::RlNSub],
            seeds: vec![0, 1, 2, 3, 4],
            subagent: SubAgentSettings::default(),
            aggregator: AggregatorSettings::default(),
            baseline_grid: BaselineGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::InvalidArg("n_agents must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArg("seeds must be non-empty".into()));
        }
        if self.reward_k == 0 || self.eval_k == 0 {
            return Err(Error::InvalidArg("reward_k and eval_k must be >= 1".into()));
        }
        if self.split.n_train == 0 || self.split.n_test == 0 {
            return Err(Error::InvalidArg("split needs train and test queries".into()));
        }
        match &self.corpus {
            CorpusSource::Synthetic(spec) => spec.validate()?,
            CorpusSource::Files { corpus, queries, qrels } => {
                for path in [corpus, queries, qrels] {
                    if !path.exists() {
                        return Err(Error::InvalidArg(format!("missing path {}", path.display())));
                    }
                }
            }
        }
        if self.aggregator.filter_sizes.len() != self.aggregator.kernels.len() {
            return Err(Error::InvalidArg("filter_sizes and kernels must align".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArg(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let json = cfg.to_json_string().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_agents = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.corpus = CorpusSource::Files {
            corpus: "/nonexistent/corpus.jsonl".into(),
            queries: "/nonexistent/queries.tsv".into(),
            qrels: "/nonexistent/qrels.tsv".into(),
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn paper_presets_carry_reference_values() {
        let agg = AggregatorSettings::paper();
        assert_eq!(agg.filter_sizes, vec![9, 3]);
        assert_eq!(agg.kernels, vec![128, 256]);
        assert_eq!(agg.d, 512);
        assert_eq!(agg.epochs, 100);
        assert_eq!(agg.mini_batch_size, 64);
        let sub = SubAgentSettings::paper();
        assert_eq!(sub.mini_batch_size, 256);
        assert!((sub.learning_rate - 1e-4).abs() < 1e-12);
    }
}
