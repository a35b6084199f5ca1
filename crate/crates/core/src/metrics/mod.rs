//! Evaluation metrics: binary-relevance retrieval metrics, token-level F1,
//! oracle scores, reformulation diversity metrics, and partition-quality
//! metrics, plus TSV/JSON report emission and the run-file format.

mod diversity;
mod ir;
mod partition;
mod report;

pub use diversity::{length_std, pbleu, pcos, pinc, ReformulationSet};
pub use ir::{
    map, mrr, ndcg, oracle_score, r_precision, recall_at_k, token_f1,
};
pub use partition::{partition_metrics, PartitionMetrics};
pub use report::{
    load_run_tsv, save_run_tsv, EvalResult, RunEntry, STANDARD_METRICS,
};
