//! Arm execution for one seed: trains whatever agents and aggregators the arm
//! needs, then produces dev/test runs, metrics, diversity inputs, and oracle
//! scores.

use std::collections::BTreeMap;

use rayon::prelude::*;

use requery_core::agents::{
    build_candidate_pool, decode, ensemble_decode, identity_agent, AgentResultRecord, DecodeMethod,
    DecodeOpts, Reformulation,
};
use requery_core::aggregator::{
    attach_result_text, dedupe_doc_id_lists, final_ranking, oracle_recall, score_candidates,
    train_aggregator, AggregatorTrainConfig, CandidateResult, ScoreVariant, TrainedAggregator,
};
use requery_core::baselines::{prf_expand, rm3_expand};
use requery_core::metrics::{EvalResult, ReformulationSet};
use requery_core::nn::ModelParams;
use requery_core::partition::{bootstrap_partition, Partition};
use requery_core::search::{Query, RankedList};
use requery_core::seed;
use requery_core::{Error, Result};

use crate::config::{Arm, ExperimentConfig};
use crate::train::{examples_for, grid_search_prf, grid_search_rm3, train_policy, TrainedPolicy};
use crate::world::World;

/// Everything one arm produces for one seed.
#[derive(Debug, Clone)]
pub struct ArmOutput {
    pub arm: Arm,
    pub label: String,
    pub test_run: BTreeMap<String, RankedList>,
    pub dev_run: BTreeMap<String, RankedList>,
    pub test_metrics: EvalResult,
    pub dev_metrics: EvalResult,
    /// Per-test-query reformulation sets (agent outputs, identity excluded);
    /// empty for arms that produce at most one reformulation per query.
    pub diversity_sets: Vec<ReformulationSet>,
    /// Aggregator arms only: per-query oracle recall and system recall at
    /// eval K on the test set.
    pub per_query_oracle: BTreeMap<String, f64>,
    pub per_query_recall: BTreeMap<String, f64>,
    /// Aggregator arms only: the precomputed test and dev logs.
    pub test_log: Vec<AgentResultRecord>,
    pub dev_log: Vec<AgentResultRecord>,
    /// Grid-search choices (baseline arms).
    pub notes: BTreeMap<String, String>,
}

impl ArmOutput {
    fn new(arm: Arm, n_agents: usize) -> ArmOutput {
        ArmOutput {
            arm,
            label: arm.label(n_agents),
            test_run: BTreeMap::new(),
            dev_run: BTreeMap::new(),
            test_metrics: EvalResult::default(),
            dev_metrics: EvalResult::default(),
            diversity_sets: Vec::new(),
            per_query_oracle: BTreeMap::new(),
            per_query_recall: BTreeMap::new(),
            test_log: Vec::new(),
            dev_log: Vec::new(),
            notes: BTreeMap::new(),
        }
    }
}

/// Per-seed execution context with lazily trained, shareable model caches.
pub struct SeedContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub world: World,
    full_agents: Option<Vec<TrainedPolicy>>,
    sub_agents: Option<Vec<TrainedPolicy>>,
    sub_partition: Option<Partition>,
    bagging_agents: Option<Vec<TrainedPolicy>>,
    pretrained_sub_agents: Option<Vec<TrainedPolicy>>,
    /// The trained aggregator of the last aggregator arm run, for reuse in
    /// ablation/sweep reporting.
    pub aggregators: BTreeMap<Arm, TrainedAggregator>,
    pub train_logs: BTreeMap<Arm, Vec<AgentResultRecord>>,
}

impl<'a> SeedContext<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64, world: World) -> SeedContext<'a> {
        SeedContext {
            cfg,
            seed,
            world,
            full_agents: None,
            sub_agents: None,
            sub_partition: None,
            bagging_agents: None,
            pretrained_sub_agents: None,
            aggregators: BTreeMap::new(),
            train_logs: BTreeMap::new(),
        }
    }

    fn train_agents_on_groups(&self, groups: &[Vec<Query>], tag: &str, init: Option<&ModelParams>) -> Result<Vec<TrainedPolicy>> {
        let settings = &self.cfg.subagent;
        groups
            .par_iter()
            .enumerate()
            .map(|(i, queries)| {
                let examples = examples_for(&self.world, queries, settings)?;
                train_policy(
                    &self.world,
                    &examples,
                    settings,
                    seed::derive(self.seed, &format!("{tag}-agent-{i}")),
                    &format!("agent-{i}"),
                    self.cfg.reward_k,
                    init,
                )
            })
            .collect()
    }

    /// N policies trained on the full training set with different seeds.
    pub fn full_agents(&mut self) -> Result<&[TrainedPolicy]> {
        if self.full_agents.is_none() {
            let groups: Vec<Vec<Query>> =
                (0..self.cfg.n_agents).map(|_| self.world.train.clone()).collect();
            self.full_agents = Some(self.train_agents_on_groups(&groups, "full", None)?);
        }
        Ok(self.full_agents.as_ref().unwrap())
    }

    fn partition_groups(&self, partition: &Partition) -> Vec<Vec<Query>> {
        let by_id: BTreeMap<&str, &Query> =
            self.world.train.iter().map(|q| (q.qid.as_str(), q)).collect();
        partition
            .groups
            .iter()
            .map(|g| g.iter().filter_map(|qid| by_id.get(qid.as_str()).map(|&q| q.clone())).collect())
            .collect()
    }

    /// The partition used by the Sub arm (strategy from the config).
    pub fn sub_partition(&mut self) -> Result<&Partition> {
        if self.sub_partition.is_none() {
            let ids: Vec<String> = self.world.train.iter().map(|q| q.qid.clone()).collect();
            let partition = crate::partition_eval::make_partition(
                self.cfg,
                &self.world,
                &ids,
                self.cfg.partition_strategy,
                seed::derive(self.seed, "sub-partition"),
            )?;
            self.sub_partition = Some(partition);
        }
        Ok(self.sub_partition.as_ref().unwrap())
    }

    pub fn sub_agents(&mut self) -> Result<&[TrainedPolicy]> {
        if self.sub_agents.is_none() {
            let partition = self.sub_partition()?.clone();
            let groups = self.partition_groups(&partition);
            self.sub_agents = Some(self.train_agents_on_groups(&groups, "sub", None)?);
        }
        Ok(self.sub_agents.as_ref().unwrap())
    }

    pub fn bagging_agents(&mut self) -> Result<&[TrainedPolicy]> {
        if self.bagging_agents.is_none() {
            let ids: Vec<String> = self.world.train.iter().map(|q| q.qid.clone()).collect();
            let partition =
                bootstrap_partition(&ids, self.cfg.n_agents, seed::derive(self.seed, "bagging"))?;
            let groups = self.partition_groups(&partition);
            self.bagging_agents = Some(self.train_agents_on_groups(&groups, "bagging", None)?);
        }
        Ok(self.bagging_agents.as_ref().unwrap())
    }

    pub fn pretrained_sub_agents(&mut self) -> Result<&[TrainedPolicy]> {
        if self.pretrained_sub_agents.is_none() {
            let base = self.full_agents()?[0].params.clone();
            let partition = self.sub_partition()?.clone();
            let groups = self.partition_groups(&partition);
            self.pretrained_sub_agents =
                Some(self.train_agents_on_groups(&groups, "presub", Some(&base))?);
        }
        Ok(self.pretrained_sub_agents.as_ref().unwrap())
    }
}

fn decode_opts(cfg: &ExperimentConfig, seed_val: u64) -> DecodeOpts {
    DecodeOpts {
        t_max: cfg.subagent.t_max,
        beam_width: cfg.subagent.beam_width,
        n_samples: cfg.subagent.beam_width,
        seed: seed_val,
    }
}

/// Produce the AgentResult log for a set of agents over a query set: each
/// agent's reformulations plus the identity agent, each retrieved at eval K.
pub fn log_results(
    ctx_cfg: &ExperimentConfig,
    world: &World,
    agents: &[TrainedPolicy],
    queries: &[Query],
    mode: DecodeMethod,
    seed_val: u64,
) -> Result<Vec<AgentResultRecord>> {
    let k = ctx_cfg.eval_k;
    let per_query: Vec<Vec<AgentResultRecord>> = queries
        .par_iter()
        .map(|q| -> Result<Vec<AgentResultRecord>> {
            let relevant = world
                .qrels
                .get(&q.qid)
                .ok_or_else(|| Error::Data(format!("no qrels for {}", q.qid)))?;
            let pool = build_candidate_pool(
                &q.tokens,
                &world.env,
                ctx_cfg.subagent.k_docs,
                ctx_cfg.subagent.m_terms,
            )?;
            let q0_ids = world.env.corpus.nn_ids(&q.tokens);
            let mut reformulations: Vec<Reformulation> = vec![identity_agent(&q.tokens)];
            for agent in agents {
                let opts = decode_opts(ctx_cfg, seed::derive(seed_val, &format!("{}:{}", q.qid, agent.agent_id)));
                let mut outs = decode(
                    &agent.params,
                    &agent.cfg,
                    &pool,
                    &q.tokens,
                    &q0_ids,
                    mode,
                    &opts,
                    &agent.agent_id,
                )?;
                reformulations.append(&mut outs);
            }
            let mut records = Vec::with_capacity(reformulations.len());
            for r in reformulations {
                let full = r.full_query();
                let (ranked, reward) = world.env.query(&full, k, relevant)?;
                records.push(AgentResultRecord {
                    qid: q.qid.clone(),
                    agent_id: r.agent_id.clone(),
                    reformulation: full.join(" "),
                    ranked_doc_ids: ranked.into_iter().map(|d| d.doc_id).collect(),
                    reward,
                });
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;
    Ok(per_query.into_iter().flatten().collect())
}

/// Candidate sets per query from a log, with result text attached.
pub fn candidates_from_log(
    world: &World,
    records: &[AgentResultRecord],
    result_text_len: usize,
) -> Result<BTreeMap<String, Vec<CandidateResult>>> {
    let mut by_qid: BTreeMap<&str, Vec<&AgentResultRecord>> = BTreeMap::new();
    for rec in records {
        by_qid.entry(rec.qid.as_str()).or_default().push(rec);
    }
    let mut out = BTreeMap::new();
    for (qid, recs) in by_qid {
        let lists: Vec<&[String]> = recs.iter().map(|r| r.ranked_doc_ids.as_slice()).collect();
        let mut candidates = dedupe_doc_id_lists(lists);
        attach_result_text(&mut candidates, &world.env.corpus, &world.env.index, result_text_len)?;
        out.insert(qid.to_string(), candidates);
    }
    Ok(out)
}

/// Score candidates with a trained relevance model and rank them.
pub fn aggregate_run(
    world: &World,
    queries: &[Query],
    candidates: &mut BTreeMap<String, Vec<CandidateResult>>,
    params: &ModelParams,
    relevance: &requery_core::nn::RelevanceConfig,
    variant: ScoreVariant,
    k: usize,
) -> Result<BTreeMap<String, RankedList>> {
    let mut run = BTreeMap::new();
    for q in queries {
        let Some(cands) = candidates.get_mut(&q.qid) else {
            run.insert(q.qid.clone(), RankedList::new());
            continue;
        };
        let q0_ids = world.env.corpus.nn_ids(&q.tokens);
        score_candidates(cands, &q0_ids, params, relevance)?;
        run.insert(q.qid.clone(), final_ranking(cands, variant, k)?);
    }
    Ok(run)
}

fn eval_run(
    world: &World,
    run: &BTreeMap<String, RankedList>,
    queries: &[Query],
    k: usize,
) -> Result<EvalResult> {
    let qrels: requery_core::search::Qrels = queries
        .iter()
        .filter_map(|q| world.qrels.get(&q.qid).map(|r| (q.qid.clone(), r.clone())))
        .collect();
    EvalResult::compute(run, &qrels, k)
}

fn simple_run<F>(world: &World, queries: &[Query], k: usize, reformulate: F) -> Result<BTreeMap<String, RankedList>>
where
    F: Fn(&Query) -> Result<Vec<String>> + Sync,
{
    let entries: Vec<(String, RankedList)> = queries
        .par_iter()
        .map(|q| -> Result<(String, RankedList)> {
            let tokens = reformulate(q)?;
            Ok((q.qid.clone(), world.env.search(&tokens, k)?))
        })
        .collect::<Result<_>>()?;
    Ok(entries.into_iter().collect())
}

/// Diversity inputs: per query, the set of reformulations the agents decoded
/// (identity excluded). Queries with fewer than two reformulations are
/// skipped.
fn diversity_sets_from_log(records: &[AgentResultRecord]) -> Vec<ReformulationSet> {
    let mut by_qid: BTreeMap<&str, ReformulationSet> = BTreeMap::new();
    for rec in records {
        if rec.agent_id == "identity" {
            continue;
        }
        by_qid.entry(rec.qid.as_str()).or_default().push(rec.reformulation_tokens());
    }
    by_qid.into_values().filter(|set| set.len() >= 2).collect()
}

pub fn run_arm(ctx: &mut SeedContext, arm: Arm) -> Result<ArmOutput> {
    let cfg = ctx.cfg;
    let k = cfg.eval_k;
    let mut out = ArmOutput::new(arm, cfg.n_agents);
    match arm {
        Arm::Bm25 => {
            out.test_run = simple_run(&ctx.world, &ctx.world.test, k, |q| Ok(q.tokens.clone()))?;
            out.dev_run = simple_run(&ctx.world, &ctx.world.dev, k, |q| Ok(q.tokens.clone()))?;
        }
        Arm::Prf => {
            let (best, dev_score) = grid_search_prf(&ctx.world, &cfg.baseline_grid, cfg.reward_k)?;
            out.notes.insert("prf_n_terms".into(), best.n_terms.to_string());
            out.notes.insert("prf_k_docs".into(), best.k_docs.to_string());
            out.notes.insert("dev_reward".into(), format!("{dev_score:.6}"));
            let expand = |q: &Query| prf_expand(&q.tokens, &ctx.world.env, best.n_terms, best.k_docs);
            out.test_run = simple_run(&ctx.world, &ctx.world.test, k, expand)?;
            out.dev_run = simple_run(&ctx.world, &ctx.world.dev, k, expand)?;
        }
        Arm::Rm3 => {
            let (best, dev_score) = grid_search_rm3(&ctx.world, &cfg.baseline_grid, cfg.reward_k)?;
            out.notes.insert("rm3_lambda".into(), format!("{}", best.lambda));
            out.notes.insert("rm3_n_terms".into(), best.n_terms.to_string());
            out.notes.insert("rm3_feedback_depth".into(), best.feedback_depth.to_string());
            out.notes.insert("rm3_u".into(), format!("{}", best.u));
            out.notes.insert("dev_reward".into(), format!("{dev_score:.6}"));
            let expand = |q: &Query| match rm3_expand(&q.tokens, &ctx.world.env, &best) {
                Ok(tokens) => Ok(tokens),
                Err(Error::Data(_)) => Ok(q.tokens.clone()),
                Err(e) => Err(e),
            };
            out.test_run = simple_run(&ctx.world, &ctx.world.test, k, expand)?;
            out.dev_run = simple_run(&ctx.world, &ctx.world.dev, k, expand)?;
        }
        Arm::RlRnn => {
            let agent = ctx.full_agents()?[0].clone();
            let world = &ctx.world;
            let greedy = |q: &Query| -> Result<Vec<String>> {
                let pool =
                    build_candidate_pool(&q.tokens, &world.env, cfg.subagent.k_docs, cfg.subagent.m_terms)?;
                let q0_ids = world.env.corpus.nn_ids(&q.tokens);
                let opts = decode_opts(cfg, 0);
                let outs = decode(
                    &agent.params,
                    &agent.cfg,
                    &pool,
                    &q.tokens,
                    &q0_ids,
                    DecodeMethod::Greedy,
                    &opts,
                    &agent.agent_id,
                )?;
                Ok(outs[0].full_query())
            };
            out.test_run = simple_run(world, &world.test, k, greedy)?;
            out.dev_run = simple_run(world, &world.dev, k, greedy)?;
            // diversity context: the beam reformulations of the single agent
            let opts = decode_opts(cfg, seed::derive(ctx.seed, "rl-rnn-beam"));
            let mut sets = Vec::new();
            for q in &world.test {
                let pool = build_candidate_pool(
                    &q.tokens,
                    &world.env,
                    cfg.subagent.k_docs,
                    cfg.subagent.m_terms,
                )?;
                let q0_ids = world.env.corpus.nn_ids(&q.tokens);
                let outs = decode(
                    &agent.params,
                    &agent.cfg,
                    &pool,
                    &q.tokens,
                    &q0_ids,
                    DecodeMethod::Beam,
                    &opts,
                    &agent.agent_id,
                )?;
                let set: ReformulationSet = outs.iter().map(|r| r.full_query()).collect();
                if set.len() >= 2 {
                    sets.push(set);
                }
            }
            out.diversity_sets = sets;
        }
        Arm::RlNEnsemble => {
            let agents = ctx.full_agents()?.to_vec();
            let world = &ctx.world;
            let ensemble = |q: &Query| -> Result<Vec<String>> {
                let pool =
                    build_candidate_pool(&q.tokens, &world.env, cfg.subagent.k_docs, cfg.subagent.m_terms)?;
                let q0_ids = world.env.corpus.nn_ids(&q.tokens);
                let params: Vec<&ModelParams> = agents.iter().map(|a| &a.params).collect();
                let r = ensemble_decode(&params, &agents[0].cfg, &pool, &q.tokens, &q0_ids, cfg.subagent.t_max)?;
                Ok(r.full_query())
            };
            out.test_run = simple_run(world, &world.test, k, ensemble)?;
            out.dev_run = simple_run(world, &world.dev, k, ensemble)?;
        }
        Arm::RlNFull
        | Arm::RlNBagging
        | Arm::RlNSub
        | Arm::RlNSubPretrained
        | Arm::RlRnnGreedyAgg
        | Arm::RlRnnSampledAgg
        | Arm::RlRnnBeamAgg => {
            run_aggregator_arm(ctx, arm, &mut out)?;
        }
    }
    out.test_metrics = eval_run(&ctx.world, &out.test_run, &ctx.world.test, k)?;
    out.dev_metrics = eval_run(&ctx.world, &out.dev_run, &ctx.world.dev, k)?;
    Ok(out)
}

/// Train an aggregator over the agents' train-set logs and return the test
/// macro Recall@eval_k of the aggregated system. Used by the partitioning
/// study, which brings its own agents.
pub fn aggregator_system_recall(
    cfg: &ExperimentConfig,
    world: &World,
    agents: &[TrainedPolicy],
    seed_val: u64,
) -> Result<f64> {
    let train_log =
        log_results(cfg, world, agents, &world.train, DecodeMethod::Greedy, seed::derive(seed_val, "tl"))?;
    let test_log =
        log_results(cfg, world, agents, &world.test, DecodeMethod::Greedy, seed::derive(seed_val, "el"))?;
    let relevance = cfg.aggregator.relevance_config(world.env.corpus.nn_vocab_size());
    let train_cfg = AggregatorTrainConfig {
        relevance: relevance.clone(),
        epochs: cfg.aggregator.epochs,
        batch_size: cfg.aggregator.mini_batch_size,
        learning_rate: cfg.aggregator.learning_rate,
        optimizer: cfg.aggregator.optimizer,
        seed: seed::derive(seed_val, "agg"),
        result_text_len: cfg.aggregator.result_text_len,
        negative_cap: cfg.aggregator.negative_cap,
    };
    let queries_map: BTreeMap<String, Vec<String>> =
        world.train.iter().map(|q| (q.qid.clone(), q.tokens.clone())).collect();
    let trained = train_aggregator(
        &train_log,
        &world.qrels,
        &queries_map,
        &world.env.corpus,
        &world.env.index,
        &train_cfg,
    )?;
    let mut candidates = candidates_from_log(world, &test_log, cfg.aggregator.result_text_len)?;
    let run = aggregate_run(
        world,
        &world.test,
        &mut candidates,
        &trained.params,
        &relevance,
        cfg.aggregator.score_variant,
        cfg.eval_k,
    )?;
    let qrels: requery_core::search::Qrels = world
        .test
        .iter()
        .filter_map(|q| world.qrels.get(&q.qid).map(|r| (q.qid.clone(), r.clone())))
        .collect();
    Ok(EvalResult::compute(&run, &qrels, cfg.eval_k)?.macro_avg["recall"])
}

fn run_aggregator_arm(ctx: &mut SeedContext, arm: Arm, out: &mut ArmOutput) -> Result<()> {
    let (agents, mode): (Vec<TrainedPolicy>, DecodeMethod) = match arm {
        Arm::RlNFull => (ctx.full_agents()?.to_vec(), DecodeMethod::Greedy),
        Arm::RlNBagging => (ctx.bagging_agents()?.to_vec(), DecodeMethod::Greedy),
        Arm::RlNSub => (ctx.sub_agents()?.to_vec(), DecodeMethod::Greedy),
        Arm::RlNSubPretrained => (ctx.pretrained_sub_agents()?.to_vec(), DecodeMethod::Greedy),
        Arm::RlRnnGreedyAgg => (vec![ctx.full_agents()?[0].clone()], DecodeMethod::Greedy),
        Arm::RlRnnSampledAgg => (vec![ctx.full_agents()?[0].clone()], DecodeMethod::Sample),
        Arm::RlRnnBeamAgg => (vec![ctx.full_agents()?[0].clone()], DecodeMethod::Beam),
        _ => unreachable!("not an aggregator arm"),
    };
    let cfg = ctx.cfg;
    let world = &ctx.world;
    let arm_seed = seed::derive(ctx.seed, arm.slug());

    let train_log = log_results(cfg, world, &agents, &world.train, mode, seed::derive(arm_seed, "train-log"))?;
    let dev_log = log_results(cfg, world, &agents, &world.dev, mode, seed::derive(arm_seed, "dev-log"))?;
    let test_log = log_results(cfg, world, &agents, &world.test, mode, seed::derive(arm_seed, "test-log"))?;

    let relevance = cfg.aggregator.relevance_config(world.env.corpus.nn_vocab_size());
    let train_cfg = AggregatorTrainConfig {
        relevance: relevance.clone(),
        epochs: cfg.aggregator.epochs,
        batch_size: cfg.aggregator.mini_batch_size,
        learning_rate: cfg.aggregator.learning_rate,
        optimizer: cfg.aggregator.optimizer,
        seed: seed::derive(arm_seed, "aggregator"),
        result_text_len: cfg.aggregator.result_text_len,
        negative_cap: cfg.aggregator.negative_cap,
    };
    let queries_map: BTreeMap<String, Vec<String>> =
        world.train.iter().map(|q| (q.qid.clone(), q.tokens.clone())).collect();
    let trained = train_aggregator(
        &train_log,
        &world.qrels,
        &queries_map,
        &world.env.corpus,
        &world.env.index,
        &train_cfg,
    )?;

    let mut test_candidates = candidates_from_log(world, &test_log, cfg.aggregator.result_text_len)?;
    let mut dev_candidates = candidates_from_log(world, &dev_log, cfg.aggregator.result_text_len)?;
    out.test_run = aggregate_run(
        world,
        &world.test,
        &mut test_candidates,
        &trained.params,
        &relevance,
        cfg.aggregator.score_variant,
        cfg.eval_k,
    )?;
    out.dev_run = aggregate_run(
        world,
        &world.dev,
        &mut dev_candidates,
        &trained.params,
        &relevance,
        cfg.aggregator.score_variant,
        cfg.eval_k,
    )?;

    for q in &world.test {
        let relevant = world.qrels.get(&q.qid).expect("test queries have qrels");
        let cands = test_candidates.get(&q.qid).map(|c| c.as_slice()).unwrap_or(&[]);
        out.per_query_oracle
            .insert(q.qid.clone(), oracle_recall(cands, relevant, cfg.eval_k)?);
        let recall = requery_core::metrics::recall_at_k(&out.test_run[&q.qid], relevant, cfg.eval_k)?;
        out.per_query_recall.insert(q.qid.clone(), recall);
    }
    out.diversity_sets = diversity_sets_from_log(&test_log);
    out.test_log = test_log;
    out.dev_log = dev_log;
    ctx.aggregators.insert(arm, trained);
    ctx.train_logs.insert(arm, train_log);
    Ok(())
}
