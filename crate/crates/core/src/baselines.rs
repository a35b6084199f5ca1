//! Non-learned reformulators: PRF term expansion and the RM3 relevance model.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::search::{dirichlet_prob, SearchEnv};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfConfig {
    /// Terms taken from each feedback document.
    pub n_terms: usize,
    /// Feedback documents.
    pub k_docs: usize,
}

impl Default for PrfConfig {
    fn default() -> Self {
        PrfConfig { n_terms: 5, k_docs: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rm3Config {
    /// Interpolation weight λ of the feedback model.
    pub lambda: f64,
    /// Dirichlet smoothing pseudo-count u.
    pub u: f64,
    /// Size of the expanded query: the N highest-posterior terms.
    pub n_terms: usize,
    /// Feedback depth |D0|.
    pub feedback_depth: usize,
}

impl Default for Rm3Config {
    fn default() -> Self {
        Rm3Config { lambda: 0.65, u: 1500.0, n_terms: 100, feedback_depth: 10 }
    }
}

impl Rm3Config {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArg(format!("rm3 lambda must be in [0,1], got {}", self.lambda)));
        }
        if self.u < 0.0 {
            return Err(Error::InvalidArg(format!("rm3 u must be >= 0, got {}", self.u)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub prf: PrfConfig,
    pub rm3: Rm3Config,
}

/// Expand a query with the top-N tf-idf terms from each of the top-K
/// documents retrieved by the original query. Expansion terms are
/// de-duplicated among themselves (a term picked from two documents is added
/// once) but may repeat terms of q0.
pub fn prf_expand(q0: &[String], env: &SearchEnv, n_terms: usize, k_docs: usize) -> Result<Vec<String>> {
    let mut expanded: Vec<String> = q0.to_vec();
    if n_terms == 0 || k_docs == 0 {
        return Ok(expanded);
    }
    let hits = env.search(q0, k_docs)?;
    let mut added: BTreeSet<u32> = BTreeSet::new();
    for hit in &hits {
        // ranked lists carry doc ids; recover the internal index
        let internal = env
            .index
            .doc_id_to_internal(&hit.doc_id)
            .expect("ranked doc must exist in index");
        for (term, _) in env.top_tfidf_terms(internal, n_terms) {
            if added.insert(term) {
                expanded.push(env.corpus.term(term).to_string());
            }
        }
    }
    Ok(expanded)
}

/// Full RM3 posterior P(t|q0) over the vocabulary (plus any out-of-vocabulary
/// q0 terms, which carry original-query mass only), sorted by descending
/// probability with ties broken by term string.
///
/// The feedback component is normalized over D0 so the posterior is a proper
/// distribution: P(d)·P(q0|d) is divided by Σ_{d'} P(d')·P(q0|d'). Query
/// likelihoods are computed in log space; a q0 term with zero corpus
/// probability zeroes P(q0|d) for every d, in which case the feedback weights
/// fall back to uniform over D0.
pub fn rm3_posterior(q0: &[String], env: &SearchEnv, cfg: &Rm3Config) -> Result<Vec<(String, f64)>> {
    cfg.validate()?;
    if q0.is_empty() {
        return Err(Error::EmptyInput("rm3: query"));
    }
    let hits = env.search(q0, cfg.feedback_depth.max(1))?;
    if hits.is_empty() {
        return Err(Error::Data("rm3: no feedback documents".into()));
    }
    let internals: Vec<u32> = hits
        .iter()
        .map(|h| env.index.doc_id_to_internal(&h.doc_id).expect("ranked doc must exist"))
        .collect();

    // log P(q0|d) with Dirichlet-smoothed term probabilities
    let mut log_lik = Vec::with_capacity(internals.len());
    for &internal in &internals {
        let doc = env.corpus.doc(env.index.corpus_index(internal));
        let mut ll = 0.0f64;
        for t in q0 {
            let p = dirichlet_prob(t, doc, cfg.u, &env.corpus)?;
            if p == 0.0 {
                ll = f64::NEG_INFINITY;
                break;
            }
            ll += p.ln();
        }
        log_lik.push(ll);
    }
    // P(d) uniform; normalize P(d)·P(q0|d) over D0 (log-space for stability)
    let max_ll = log_lik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = if max_ll == f64::NEG_INFINITY {
        vec![1.0 / internals.len() as f64; internals.len()]
    } else {
        let unnorm: Vec<f64> = log_lik.iter().map(|ll| (ll - max_ll).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        unnorm.into_iter().map(|w| w / total).collect()
    };

    let mut posterior: HashMap<String, f64> = HashMap::new();

    // original-query component P'(t|q0) = tf(t ∈ q0)/|q0|
    let p_prime = (1.0 - cfg.lambda) / q0.len() as f64;
    for t in q0 {
        *posterior.entry(t.clone()).or_insert(0.0) += p_prime;
    }

    // feedback component: sparse tf part plus the smoothing mass, which is
    // u·P(t|C)·Σ_d ŵ_d/(|d|+u) for every vocabulary term
    let mut smooth_coeff = 0.0;
    for (&internal, &w) in internals.iter().zip(&weights) {
        let dl = env.index.doc_len(internal) as f64;
        let denom = dl + cfg.u;
        if denom == 0.0 {
            return Err(Error::InvalidArg("rm3: |d| + u = 0".into()));
        }
        smooth_coeff += w / denom;
        for (term, tf) in env.doc_term_counts(internal) {
            let contribution = cfg.lambda * w * tf as f64 / denom;
            *posterior.entry(env.corpus.term(term).to_string()).or_insert(0.0) += contribution;
        }
    }
    if cfg.u > 0.0 {
        let total_tokens = env.corpus.total_tokens() as f64;
        for id in 0..env.corpus.vocab_len() as u32 {
            let p_c = env.corpus.collection_count(id) as f64 / total_tokens;
            if p_c > 0.0 {
                *posterior.entry(env.corpus.term(id).to_string()).or_insert(0.0) +=
                    cfg.lambda * cfg.u * p_c * smooth_coeff;
            }
        }
    }

    let mut ranked: Vec<(String, f64)> = posterior.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// RM3 expansion: the N terms with the highest P(t|q0) form the expanded
/// query. Original-query terms appear only if they rank in the top N.
pub fn rm3_expand(q0: &[String], env: &SearchEnv, cfg: &Rm3Config) -> Result<Vec<String>> {
    let posterior = rm3_posterior(q0, env, cfg)?;
    Ok(posterior.into_iter().take(cfg.n_terms).map(|(t, _)| t).collect())
}
