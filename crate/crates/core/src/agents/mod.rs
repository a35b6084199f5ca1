//! Reformulation sub-agents: a term-appending policy over a pool of terms
//! harvested from the documents retrieved by the original query, trained with
//! REINFORCE against the search environment's recall reward.
//!
//! Distinct sub-agents share nothing mutable; the only data they hand to the
//! aggregator are (q0, reformulation, ranked results, reward) records.

mod decode;
mod external;
mod log;
mod policy;
mod pool;
mod reinforce;

pub use decode::{decode, ensemble_decode, identity_agent, DecodeMethod, DecodeOpts};
pub use external::ExternalReformulator;
pub use log::{load_agent_results_jsonl, save_agent_results_jsonl, AgentResultRecord};
pub use policy::{
    action_distribution, init_policy_params, sequence_log_prob, PolicyConfig, FEATURE_DIM,
};
pub use pool::{build_candidate_pool, CandidatePool, PoolTerm};
pub use reinforce::{prepare_examples, reinforce_step, BaselineState, ReinforceExample, ReinforceOpts, ReinforceStats};

use serde::{Deserialize, Serialize};

use crate::search::RankedList;

/// A reformulated query: the original tokens plus appended terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reformulation {
    pub q0: Vec<String>,
    pub added: Vec<String>,
    pub agent_id: String,
    pub method: DecodeMethod,
    /// Sum of per-step log-softmax terms; 0 for the identity agent.
    pub log_prob: f64,
}

impl Reformulation {
    /// q0 ++ added.
    pub fn full_query(&self) -> Vec<String> {
        let mut q = self.q0.clone();
        q.extend(self.added.iter().cloned());
        q
    }

    pub fn full_query_string(&self) -> String {
        self.full_query().join(" ")
    }
}

/// The record exchanged between a sub-agent and the aggregator: the
/// reformulation, the environment's ranked list, and the reward.
#[derive(Debug, Clone)]
pub struct AgentResult {
    pub reformulation: Reformulation,
    pub ranked: RankedList,
    pub reward: f64,
}
