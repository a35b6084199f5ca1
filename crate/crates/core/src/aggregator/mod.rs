//! The meta-agent: deduplicate results across reformulations, compute the
//! accumulated rank score s^A and the learned relevance score s^R, and rank
//! by s = s^A·s^R (with the ablation variants of the scoring rule).

mod train;

pub use train::{train_aggregator, AggregatorTrainConfig, TrainedAggregator};

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::agents::AgentResult;
use crate::nn::{relevance_prob, ModelParams, RelevanceConfig};
use crate::search::{Corpus, RankedList, ScoredDoc};
use crate::{Error, Result};

/// A deduplicated retrieval result with its per-reformulation ranks and
/// aggregation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub doc_id: String,
    /// Result text as neural token ids (empty until attached).
    pub tokens: Vec<u32>,
    /// (reformulation index, 1-based rank) for every reformulation that
    /// retrieved this result.
    pub ranks: Vec<(usize, usize)>,
    /// Σ_i 1/rank_{i,j}; reformulations that did not retrieve the result
    /// contribute 0.
    pub s_accum: f64,
    /// Number of reformulations that retrieved the result.
    pub retrieved_count: usize,
    /// Learned probability that the result answers q0; 0.5 until scored.
    pub s_relevance: f64,
}

/// q0 plus the per-reformulation results handed over by the sub-agents.
#[derive(Debug, Clone)]
pub struct AggregatorInput {
    pub q0: Vec<String>,
    pub results: Vec<AgentResult>,
}

/// Scoring rule of the final ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreVariant {
    /// s = s^A·s^R with s^A = Σ 1/rank (default).
    Product,
    /// s = s^A.
    RankOnly,
    /// s = s^R.
    RelevanceOnly,
    /// s = s^A·s^R with s^A = Σ 1{retrieved}.
    CountRank,
    /// s = s^A·s^R, but s^R comes from a model with z = [f_CNN(q0); f_BOW(a)].
    ConcatFeatures,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 5] = [
        ScoreVariant::Product,
        ScoreVariant::RankOnly,
        ScoreVariant::RelevanceOnly,
        ScoreVariant::CountRank,
        ScoreVariant::ConcatFeatures,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ScoreVariant::Product => "product",
            ScoreVariant::RankOnly => "rank-only",
            ScoreVariant::RelevanceOnly => "relevance-only",
            ScoreVariant::CountRank => "count-rank",
            ScoreVariant::ConcatFeatures => "concat-features",
        }
    }

    fn score(&self, c: &CandidateResult) -> f64 {
        match self {
            ScoreVariant::Product | ScoreVariant::ConcatFeatures => c.s_accum * c.s_relevance,
            ScoreVariant::RankOnly => c.s_accum,
            ScoreVariant::RelevanceOnly => c.s_relevance,
            ScoreVariant::CountRank => c.retrieved_count as f64 * c.s_relevance,
        }
    }
}

/// Compute the set of unique results over all reformulations with their
/// accumulated rank scores. Candidates come back in ascending doc id order.
pub fn dedupe_and_rank_score(input: &AggregatorInput) -> Vec<CandidateResult> {
    dedupe_ranked_lists(input.results.iter().map(|r| &r.ranked))
}

/// Same as [`dedupe_and_rank_score`] but over bare ranked doc-id lists.
pub fn dedupe_doc_id_lists<'a, I, S>(lists: I) -> Vec<CandidateResult>
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let mut by_id: BTreeMap<String, CandidateResult> = BTreeMap::new();
    for (i, list) in lists.into_iter().enumerate() {
        for (rank0, doc_id) in list.iter().enumerate() {
            let entry = by_id.entry(doc_id.as_ref().to_string()).or_insert_with(|| CandidateResult {
                doc_id: doc_id.as_ref().to_string(),
                tokens: Vec::new(),
                ranks: Vec::new(),
                s_accum: 0.0,
                retrieved_count: 0,
                s_relevance: 0.5,
            });
            entry.ranks.push((i, rank0 + 1));
            entry.s_accum += 1.0 / (rank0 + 1) as f64;
            entry.retrieved_count += 1;
        }
    }
    by_id.into_values().collect()
}

fn dedupe_ranked_lists<'a, I>(lists: I) -> Vec<CandidateResult>
where
    I: IntoIterator<Item = &'a RankedList>,
{
    let owned: Vec<Vec<String>> =
        lists.into_iter().map(|l| l.iter().map(|d| d.doc_id.clone()).collect()).collect();
    dedupe_doc_id_lists(owned.iter().map(|v| v.as_slice()))
}

/// Attach result text to candidates: the first `max_tokens` body tokens of
/// each document, as neural ids.
pub fn attach_result_text(
    candidates: &mut [CandidateResult],
    corpus: &Corpus,
    index: &crate::search::InvertedIndex,
    max_tokens: usize,
) -> Result<()> {
    for c in candidates.iter_mut() {
        let internal = index
            .doc_id_to_internal(&c.doc_id)
            .ok_or_else(|| Error::Data(format!("candidate {} not in index", c.doc_id)))?;
        let doc = corpus.doc(index.corpus_index(internal));
        c.tokens = doc.tokens.iter().take(max_tokens).map(|&t| t + 1).collect();
        if c.tokens.is_empty() {
            // empty documents cannot be encoded; give them the unknown token
            c.tokens.push(0);
        }
    }
    Ok(())
}

/// s^R for one candidate: the relevance network's probability that the result
/// answers q0.
pub fn relevance_score(
    q0_ids: &[u32],
    candidate: &CandidateResult,
    params: &ModelParams,
    cfg: &RelevanceConfig,
) -> Result<f64> {
    if candidate.tokens.is_empty() {
        return Err(Error::EmptyInput("relevance_score: candidate tokens"));
    }
    relevance_prob(q0_ids, &candidate.tokens, params, cfg)
}

/// Score every candidate in place with the relevance model.
pub fn score_candidates(
    candidates: &mut [CandidateResult],
    q0_ids: &[u32],
    params: &ModelParams,
    cfg: &RelevanceConfig,
) -> Result<()> {
    for c in candidates.iter_mut() {
        c.s_relevance = relevance_score(q0_ids, c, params, cfg)?;
    }
    Ok(())
}

/// Rank candidates by the variant score (descending, doc id ascending on
/// ties) and keep the top K.
pub fn final_ranking(candidates: &[CandidateResult], variant: ScoreVariant, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidArg("final_ranking: K must be >= 1".into()));
    }
    let mut scored: Vec<(f64, &CandidateResult)> =
        candidates.iter().map(|c| (variant.score(c), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.doc_id.cmp(&b.1.doc_id)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(score, c)| ScoredDoc { doc_id: c.doc_id.clone(), score })
        .collect())
}

/// Replace s^R by the mean of per-model relevance scores, then rank.
pub fn ensemble_aggregators(
    models: &[&ModelParams],
    cfg: &RelevanceConfig,
    q0_ids: &[u32],
    candidates: &mut [CandidateResult],
    variant: ScoreVariant,
    k: usize,
) -> Result<RankedList> {
    if models.is_empty() {
        return Err(Error::EmptyInput("ensemble_aggregators: models"));
    }
    for c in candidates.iter_mut() {
        let mut total = 0.0;
        for m in models {
            total += relevance_score(q0_ids, c, m, cfg)?;
        }
        c.s_relevance = total / models.len() as f64;
    }
    final_ranking(candidates, variant, k)
}

/// Recall@K of a perfect aggregator, which puts every relevant candidate
/// ahead of every non-relevant one: min(K, |relevant ∩ candidates|) / |D*|.
pub fn oracle_recall(
    candidates: &[CandidateResult],
    relevant: &BTreeSet<String>,
    k: usize,
) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Data("oracle_recall: empty relevant set".into()));
    }
    let present = candidates.iter().filter(|c| relevant.contains(&c.doc_id)).count();
    Ok(present.min(k) as f64 / relevant.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_relevance_params, ConvLayerSpec, EncoderConfig, InteractionMode};
    use crate::seed;

    fn lists(lists: &[&[&str]]) -> Vec<Vec<String>> {
        lists.iter().map(|l| l.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn dedupe(ls: &[&[&str]]) -> Vec<CandidateResult> {
        let owned = lists(ls);
        dedupe_doc_id_lists(owned.iter().map(|v| v.as_slice()))
    }

    #[test]
    fn single_agent_rank_one_gives_unit_score() {
        let cands = dedupe(&[&["d1", "d2"]]);
        let d1 = cands.iter().find(|c| c.doc_id == "d1").unwrap();
        assert_eq!(d1.s_accum, 1.0);
        assert_eq!(d1.retrieved_count, 1);
    }

    #[test]
    fn n_agents_all_rank_first_sum_to_n() {
        let cands = dedupe(&[&["d"], &["d"], &["d"]]);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].s_accum, 3.0);
        assert_eq!(cands[0].retrieved_count, 3);
    }

    #[test]
    fn ranks_one_two_four_accumulate() {
        let cands = dedupe(&[&["d", "x1"], &["x2", "d"], &["y1", "y2", "y3", "d"]]);
        let d = cands.iter().find(|c| c.doc_id == "d").unwrap();
        assert!((d.s_accum - (1.0 + 0.5 + 0.25)).abs() < 1e-12);
        assert_eq!(d.ranks, vec![(0, 1), (1, 2), (2, 4)]);
    }

    #[test]
    fn empty_retrieval_changes_no_scores() {
        let with = dedupe(&[&["a", "b"], &[]]);
        let without = dedupe(&[&["a", "b"]]);
        for (x, y) in with.iter().zip(&without) {
            assert_eq!(x.s_accum, y.s_accum);
            assert_eq!(x.retrieved_count, y.retrieved_count);
        }
    }

    fn toy_candidates(specs: &[(&str, f64, usize, f64)]) -> Vec<CandidateResult> {
        specs
            .iter()
            .map(|&(id, s_accum, count, s_rel)| CandidateResult {
                doc_id: id.to_string(),
                tokens: vec![1],
                ranks: vec![],
                s_accum,
                retrieved_count: count,
                s_relevance: s_rel,
            })
            .collect()
    }

    #[test]
    fn product_vs_rank_only_orderings() {
        // s_A = (2, 1), s_R = (0.4, 0.9) → product (0.8, 0.9): b first;
        // rank-only ignores s_R: a first
        let cands = toy_candidates(&[("a", 2.0, 2, 0.4), ("b", 1.0, 1, 0.9)]);
        let product = final_ranking(&cands, ScoreVariant::Product, 2).unwrap();
        assert_eq!(product[0].doc_id, "b");
        let rank_only = final_ranking(&cands, ScoreVariant::RankOnly, 2).unwrap();
        assert_eq!(rank_only[0].doc_id, "a");
        let single = final_ranking(&cands[..1], ScoreVariant::RelevanceOnly, 5).unwrap();
        assert_eq!(single[0].doc_id, "a");
    }

    #[test]
    fn positive_scaling_of_s_accum_preserves_order() {
        let mut cands = toy_candidates(&[("a", 2.0, 2, 0.3), ("b", 1.5, 1, 0.5), ("c", 0.5, 1, 0.9)]);
        let before: Vec<String> = final_ranking(&cands, ScoreVariant::Product, 3)
            .unwrap()
            .into_iter()
            .map(|d| d.doc_id)
            .collect();
        for c in cands.iter_mut() {
            c.s_accum *= 37.5;
        }
        let after: Vec<String> = final_ranking(&cands, ScoreVariant::Product, 3)
            .unwrap()
            .into_iter()
            .map(|d| d.doc_id)
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn double_max_candidate_ranks_first_under_product() {
        let cands = toy_candidates(&[("a", 3.0, 2, 0.9), ("b", 2.0, 1, 0.8), ("c", 1.0, 1, 0.1)]);
        let ranked = final_ranking(&cands, ScoreVariant::Product, 3).unwrap();
        assert_eq!(ranked[0].doc_id, "a");
    }

    #[test]
    fn oracle_dominates_any_ranking() {
        let cands = toy_candidates(&[("a", 1.0, 1, 0.2), ("b", 0.5, 1, 0.9), ("c", 0.3, 1, 0.1)]);
        let relevant: BTreeSet<String> = ["a".to_string(), "z".to_string()].into();
        let oracle = oracle_recall(&cands, &relevant, 2).unwrap();
        for variant in ScoreVariant::ALL {
            let ranked = final_ranking(&cands, variant, 2).unwrap();
            let hits = ranked.iter().filter(|d| relevant.contains(&d.doc_id)).count();
            let score = hits as f64 / relevant.len() as f64;
            assert!(oracle >= score);
        }
    }

    fn tiny_relevance() -> (RelevanceConfig, ModelParams) {
        let cfg = RelevanceConfig::new(EncoderConfig {
            vocab_size: 32,
            embed_dim: 3,
            cnn_layers: vec![ConvLayerSpec { width: 3, kernels: 4 }],
            output_dim: 2,
        });
        let params = init_relevance_params(&cfg, &mut seed::rng(0, "agg")).unwrap();
        (cfg, params)
    }

    #[test]
    fn zero_model_scores_half_everywhere() {
        let (cfg, mut params) = tiny_relevance();
        for name in params.names().map(String::from).collect::<Vec<_>>() {
            params.value_mut(&name).fill(0.0);
        }
        let mut cands = toy_candidates(&[("a", 1.0, 1, 0.0), ("b", 0.5, 1, 0.0)]);
        cands[0].tokens = vec![3, 4];
        cands[1].tokens = vec![5];
        score_candidates(&mut cands, &[1, 2], &params, &cfg).unwrap();
        assert!(cands.iter().all(|c| c.s_relevance == 0.5));
    }

    #[test]
    fn ensemble_of_identical_models_matches_single() {
        let (cfg, params) = tiny_relevance();
        let mut cands = toy_candidates(&[("a", 1.0, 1, 0.0), ("b", 2.0, 1, 0.0)]);
        cands[0].tokens = vec![3, 4];
        cands[1].tokens = vec![5, 6, 7];
        let mut single = cands.clone();
        score_candidates(&mut single, &[1, 2], &params, &cfg).unwrap();
        let single_ranked = final_ranking(&single, ScoreVariant::Product, 2).unwrap();
        let ens = ensemble_aggregators(
            &[&params, &params],
            &cfg,
            &[1, 2],
            &mut cands,
            ScoreVariant::Product,
            2,
        )
        .unwrap();
        assert_eq!(single_ranked, ens);
    }

    #[test]
    fn hand_mean_of_two_model_scores() {
        // two candidates, model A scores them (0.2, x), model B (0.8, y);
        // verify the ensemble s_R is the mean by checking against direct math
        let (cfg, params_a) = tiny_relevance();
        let params_b = init_relevance_params(&cfg, &mut seed::rng(9, "agg2")).unwrap();
        let mut cands = toy_candidates(&[("a", 1.0, 1, 0.0)]);
        cands[0].tokens = vec![3, 4];
        let sa = relevance_score(&[1], &cands[0], &params_a, &cfg).unwrap();
        let sb = relevance_score(&[1], &cands[0], &params_b, &cfg).unwrap();
        ensemble_aggregators(&[&params_a, &params_b], &cfg, &[1], &mut cands, ScoreVariant::RelevanceOnly, 1)
            .unwrap();
        assert!((cands[0].s_relevance - (sa + sb) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn concat_variant_uses_its_own_shape() {
        let enc = EncoderConfig {
            vocab_size: 32,
            embed_dim: 3,
            cnn_layers: vec![ConvLayerSpec { width: 3, kernels: 4 }],
            output_dim: 2,
        };
        let cfg = RelevanceConfig {
            encoder: enc,
            interaction: InteractionMode::ConcatOnly,
            shared_embedding: true,
        };
        let params = init_relevance_params(&cfg, &mut seed::rng(1, "cc")).unwrap();
        assert_eq!(params.value("head.w1").cols(), 2 * cfg.encoder.output_dim);
        let mut cands = toy_candidates(&[("a", 1.0, 1, 0.0)]);
        cands[0].tokens = vec![2];
        score_candidates(&mut cands, &[1], &params, &cfg).unwrap();
        assert!(cands[0].s_relevance > 0.0 && cands[0].s_relevance < 1.0);
    }
}
