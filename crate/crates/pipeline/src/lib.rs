//! Experiment pipeline: synthetic benchmark generation, arm execution
//! (baselines, single-agent, multi-agent variants), aggregator training, and
//! deterministic report emission.

pub mod arms;
pub mod config;
pub mod experiment;
pub mod partition_eval;
pub mod report;
pub mod stability;
pub mod synth;
pub mod train;
pub mod world;

pub use config::{Arm, ExperimentConfig};
pub use experiment::{run_experiment, run_experiment_seed, ExperimentOutput};
pub use synth::{synth_corpus, SyntheticSpec};
pub use world::{build_world, World};
