//! Experiment orchestration: run the configured arms for every seed, derive
//! the sweep/ablation/diversity reports, and emit the report bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use requery_core::agents::save_agent_results_jsonl;
use requery_core::aggregator::{
    dedupe_doc_id_lists, final_ranking, oracle_recall, score_candidates, train_aggregator,
    AggregatorTrainConfig, ScoreVariant,
};
use requery_core::metrics::{length_std, pbleu, pcos, pinc, recall_at_k, save_run_tsv, EvalResult};
use requery_core::partition::save_partition_tsv;
use requery_core::search::{save_corpus_jsonl, Query};
use requery_core::seed;
use requery_core::{Error, Result};

use crate::arms::{run_arm, ArmOutput, SeedContext};
use crate::config::{Arm, ExperimentConfig};
use crate::report::{fmt, metrics_tsv, write_atomic, write_json, TsvTable};
use crate::world::{build_world, World};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub n_agents: usize,
    pub oracle: f64,
    pub system_recall: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AblationRow {
    pub variant: ScoreVariant,
    pub dev_recall: f64,
    pub dev_map: f64,
}

#[derive(Debug)]
pub struct SeedOutputs {
    pub seed: u64,
    pub arms: BTreeMap<Arm, ArmOutput>,
    pub failed: BTreeMap<Arm, String>,
    pub sweep: Vec<SweepPoint>,
    pub ablation: Vec<AblationRow>,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub seeds: Vec<SeedOutputs>,
}

/// Diversity metrics of one arm's reformulation sets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiversityScores {
    pub pcos: f64,
    pub pbleu: f64,
    pub pinc: f64,
    pub length_std: f64,
}

pub fn diversity_of(out: &ArmOutput) -> Option<DiversityScores> {
    if out.diversity_sets.len() < 2 {
        return None;
    }
    Some(DiversityScores {
        pcos: pcos(&out.diversity_sets).ok()?,
        pbleu: pbleu(&out.diversity_sets).ok()?,
        pinc: pinc(&out.diversity_sets).ok()?,
        length_std: length_std(&out.diversity_sets).ok()?,
    })
}

/// Reference diversity anchors printed alongside the measured rows for
/// side-by-side context (reported values of an external reference system; no
/// tolerance is asserted against them).
pub const DIVERSITY_REFERENCE_ROWS: &[(&str, f64, f64, f64, f64)] = &[
    ("AQA (reference)", 66.4, 45.7, 58.7, 3.8),
    ("AQA-10-Full (reference)", 29.5, 26.6, 79.5, 9.2),
    ("AQA-10-Sub (reference)", 14.2, 12.8, 94.5, 11.7),
];

/// The N-agent sweep: oracle and aggregated recall when only the first n
/// agents (plus identity) contribute candidates. Agent prefixes make the
/// n+1 pool a superset of the n pool by construction.
fn agent_sweep(
    cfg: &ExperimentConfig,
    world: &World,
    sub_out: &ArmOutput,
    sub_aggregator: &requery_core::nn::ModelParams,
) -> Result<Vec<SweepPoint>> {
    let relevance = cfg.aggregator.relevance_config(world.env.corpus.nn_vocab_size());
    let mut points = Vec::new();
    for n in 1..=cfg.n_agents {
        let allowed: BTreeSet<String> = std::iter::once("identity".to_string())
            .chain((0..n).map(|i| format!("agent-{i}")))
            .collect();
        let mut oracle_sum = 0.0;
        let mut recall_sum = 0.0;
        let mut count = 0usize;
        for q in &world.test {
            let lists: Vec<&[String]> = sub_out
                .test_log
                .iter()
                .filter(|r| r.qid == q.qid && allowed.contains(&r.agent_id))
                .map(|r| r.ranked_doc_ids.as_slice())
                .collect();
            let mut candidates = dedupe_doc_id_lists(lists);
            requery_core::aggregator::attach_result_text(
                &mut candidates,
                &world.env.corpus,
                &world.env.index,
                cfg.aggregator.result_text_len,
            )?;
            let relevant = world.qrels.get(&q.qid).expect("test query has qrels");
            oracle_sum += oracle_recall(&candidates, relevant, cfg.eval_k)?;
            let q0_ids = world.env.corpus.nn_ids(&q.tokens);
            score_candidates(&mut candidates, &q0_ids, sub_aggregator, &relevance)?;
            let ranked = final_ranking(&candidates, cfg.aggregator.score_variant, cfg.eval_k)?;
            recall_sum += recall_at_k(&ranked, relevant, cfg.eval_k)?;
            count += 1;
        }
        points.push(SweepPoint {
            n_agents: n,
            oracle: oracle_sum / count.max(1) as f64,
            system_recall: recall_sum / count.max(1) as f64,
        });
    }
    Ok(points)
}

/// Emit all scoring-rule variants from one trained model plus one pass over
/// the dev log. The concat-features variant carries its own encoder shape and
/// therefore its own model, trained on the same log.
fn ablation_rows(ctx: &SeedContext, sub_out: &ArmOutput) -> Result<Vec<AblationRow>> {
    let cfg = ctx.cfg;
    let world = &ctx.world;
    let default_model = &ctx
        .aggregators
        .get(&Arm::RlNSub)
        .ok_or_else(|| Error::Data("ablation requires the sub arm".into()))?
        .params;
    let train_log = ctx.train_logs.get(&Arm::RlNSub).expect("sub arm trained");

    let mut concat_settings = cfg.aggregator.clone();
    concat_settings.score_variant = ScoreVariant::ConcatFeatures;
    let concat_relevance = concat_settings.relevance_config(world.env.corpus.nn_vocab_size());
    let queries_map: BTreeMap<String, Vec<String>> =
        world.train.iter().map(|q| (q.qid.clone(), q.tokens.clone())).collect();
    let concat_model = train_aggregator(
        train_log,
        &world.qrels,
        &queries_map,
        &world.env.corpus,
        &world.env.index,
        &AggregatorTrainConfig {
            relevance: concat_relevance.clone(),
            epochs: cfg.aggregator.epochs,
            batch_size: cfg.aggregator.mini_batch_size,
            learning_rate: cfg.aggregator.learning_rate,
            optimizer: cfg.aggregator.optimizer,
            seed: seed::derive(ctx.seed, "rl-n-sub-aggregator-concat"),
            result_text_len: cfg.aggregator.result_text_len,
            negative_cap: cfg.aggregator.negative_cap,
        },
    )?
    .params;

    let relevance = cfg.aggregator.relevance_config(world.env.corpus.nn_vocab_size());
    let mut candidates = crate::arms::candidates_from_log(
        world,
        &sub_out.dev_log,
        cfg.aggregator.result_text_len,
    )?;
    let dev_queries: Vec<Query> = world.dev.clone();
    let mut runs: BTreeMap<ScoreVariant, BTreeMap<String, requery_core::search::RankedList>> =
        ScoreVariant::ALL.iter().map(|v| (*v, BTreeMap::new())).collect();
    for q in &dev_queries {
        let Some(cands) = candidates.get_mut(&q.qid) else { continue };
        let q0_ids = world.env.corpus.nn_ids(&q.tokens);
        score_candidates(cands, &q0_ids, default_model, &relevance)?;
        for variant in [
            ScoreVariant::Product,
            ScoreVariant::RankOnly,
            ScoreVariant::RelevanceOnly,
            ScoreVariant::CountRank,
        ] {
            runs.get_mut(&variant)
                .unwrap()
                .insert(q.qid.clone(), final_ranking(cands, variant, cfg.eval_k)?);
        }
        score_candidates(cands, &q0_ids, &concat_model, &concat_relevance)?;
        runs.get_mut(&ScoreVariant::ConcatFeatures)
            .unwrap()
            .insert(q.qid.clone(), final_ranking(cands, ScoreVariant::ConcatFeatures, cfg.eval_k)?);
    }
    let qrels: requery_core::search::Qrels = dev_queries
        .iter()
        .filter_map(|q| world.qrels.get(&q.qid).map(|r| (q.qid.clone(), r.clone())))
        .collect();
    ScoreVariant::ALL
        .iter()
        .map(|&variant| {
            let eval = EvalResult::compute(&runs[&variant], &qrels, cfg.eval_k)?;
            Ok(AblationRow {
                variant,
                dev_recall: eval.macro_avg["recall"],
                dev_map: eval.macro_avg["map"],
            })
        })
        .collect()
}

fn write_seed_data(dir: &Path, world: &World) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_corpus_jsonl(&dir.join("corpus.jsonl"), &world.documents)?;
    let mut queries_tsv = String::new();
    let mut split_json: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (name, queries) in
        [("train", &world.train), ("dev", &world.dev), ("test", &world.test)]
    {
        split_json.insert(name, queries.iter().map(|q| q.qid.as_str()).collect());
    }
    let mut all: Vec<&Query> = world.train.iter().chain(&world.dev).chain(&world.test).collect();
    all.sort_by(|a, b| a.qid.cmp(&b.qid));
    for q in &all {
        queries_tsv.push_str(&format!("{}\t{}\n", q.qid, q.tokens.join(" ")));
    }
    write_atomic(&dir.join("queries.tsv"), queries_tsv.as_bytes())?;
    let mut qrels_tsv = String::new();
    for q in &all {
        if let Some(relevant) = world.qrels.get(&q.qid) {
            for doc_id in relevant {
                qrels_tsv.push_str(&format!("{}\t{}\n", q.qid, doc_id));
            }
        }
    }
    write_atomic(&dir.join("qrels.tsv"), qrels_tsv.as_bytes())?;
    if !world.synonyms.is_empty() {
        let mut synonyms_tsv = String::new();
        for (a, b) in &world.synonyms {
            synonyms_tsv.push_str(&format!("{a}\t{b}\n"));
        }
        write_atomic(&dir.join("synonyms.tsv"), synonyms_tsv.as_bytes())?;
    }
    write_json(&dir.join("split.json"), &split_json)?;
    Ok(())
}

fn write_arm_outputs(dir: &Path, out: &ArmOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_run_tsv(&dir.join("run_test.tsv"), &out.test_run)?;
    save_run_tsv(&dir.join("run_dev.tsv"), &out.dev_run)?;
    write_atomic(&dir.join("metrics_test.tsv"), metrics_tsv(&out.test_metrics.macro_avg).as_bytes())?;
    write_atomic(&dir.join("metrics_dev.tsv"), metrics_tsv(&out.dev_metrics.macro_avg).as_bytes())?;
    #[derive(Serialize)]
    struct ArmJson<'a> {
        label: &'a str,
        test: &'a BTreeMap<String, f64>,
        dev: &'a BTreeMap<String, f64>,
        notes: &'a BTreeMap<String, String>,
    }
    write_json(
        &dir.join("metrics.json"),
        &ArmJson {
            label: &out.label,
            test: &out.test_metrics.macro_avg,
            dev: &out.dev_metrics.macro_avg,
            notes: &out.notes,
        },
    )?;
    if !out.test_log.is_empty() {
        save_agent_results_jsonl(&dir.join("reformulations_test.jsonl"), &out.test_log)?;
    }
    Ok(())
}

fn arm_table(arms: &BTreeMap<Arm, ArmOutput>, order: &[Arm]) -> TsvTable {
    let mut table = TsvTable::new(vec!["arm", "recall", "map", "r_prec", "mrr", "ndcg"]);
    for arm in order {
        if let Some(out) = arms.get(arm) {
            table.row(vec![
                out.label.clone(),
                fmt(out.test_metrics.macro_avg["recall"]),
                fmt(out.test_metrics.macro_avg["map"]),
                fmt(out.test_metrics.macro_avg["r_prec"]),
                fmt(out.test_metrics.macro_avg["mrr"]),
                fmt(out.test_metrics.macro_avg["ndcg"]),
            ]);
        }
    }
    table
}

fn diversity_table(arms: &BTreeMap<Arm, ArmOutput>, order: &[Arm]) -> TsvTable {
    let mut table =
        TsvTable::new(vec!["arm", "pcos", "pbleu", "pinc", "length_std", "recall", "oracle"]);
    for arm in order {
        let Some(out) = arms.get(arm) else { continue };
        let Some(d) = diversity_of(out) else { continue };
        let oracle = if out.per_query_oracle.is_empty() {
            "-".to_string()
        } else {
            fmt(out.per_query_oracle.values().sum::<f64>() / out.per_query_oracle.len() as f64)
        };
        table.row(vec![
            out.label.clone(),
            fmt(d.pcos),
            fmt(d.pbleu),
            fmt(d.pinc),
            fmt(d.length_std),
            fmt(out.test_metrics.macro_avg["recall"]),
            oracle,
        ]);
    }
    for (label, pcos_v, pbleu_v, pinc_v, len_v) in DIVERSITY_REFERENCE_ROWS {
        table.row(vec![
            label.to_string(),
            fmt(*pcos_v),
            fmt(*pbleu_v),
            fmt(*pinc_v),
            fmt(*len_v),
            "-".to_string(),
            "-".to_string(),
        ]);
    }
    table
}

/// Run every configured arm for one seed.
pub fn run_experiment_seed(
    cfg: &ExperimentConfig,
    seed_val: u64,
    out_dir: Option<&Path>,
) -> Result<SeedOutputs> {
    let world = build_world(cfg, seed_val)?;
    if let Some(dir) = out_dir {
        write_seed_data(&dir.join("data"), &world)?;
    }
    let mut ctx = SeedContext::new(cfg, seed_val, world);
    let mut arms: BTreeMap<Arm, ArmOutput> = BTreeMap::new();
    let mut failed: BTreeMap<Arm, String> = BTreeMap::new();
    for &arm in &cfg.arms {
        match run_arm(&mut ctx, arm) {
            Ok(out) => {
                arms.insert(arm, out);
            }
            Err(e) => {
                failed.insert(arm, e.to_string());
            }
        }
    }

    let mut sweep = Vec::new();
    let mut ablation = Vec::new();
    if let Some(sub_out) = arms.get(&Arm::RlNSub) {
        if let Some(trained) = ctx.aggregators.get(&Arm::RlNSub) {
            sweep = agent_sweep(cfg, &ctx.world, sub_out, &trained.params)?;
            ablation = ablation_rows(&ctx, sub_out)?;
        }
    }

    if let Some(dir) = out_dir {
        if let Some(partition) = arms.contains_key(&Arm::RlNSub).then(|| ctx.sub_partition()).transpose()? {
            save_partition_tsv(&dir.join("partition.tsv"), partition)?;
        }
        for (arm, out) in &arms {
            write_arm_outputs(&dir.join("arms").join(arm.slug()), out)?;
        }
        arm_table(&arms, &cfg.arms).save(&dir.join("table_arms.tsv"))?;
        diversity_table(&arms, &cfg.arms).save(&dir.join("table_diversity.tsv"))?;
        if !sweep.is_empty() {
            let mut t = TsvTable::new(vec!["n_agents", "oracle", "system_recall"]);
            for p in &sweep {
                t.row(vec![p.n_agents.to_string(), fmt(p.oracle), fmt(p.system_recall)]);
            }
            t.save(&dir.join("sweep.tsv"))?;
        }
        if !ablation.is_empty() {
            let mut t = TsvTable::new(vec!["variant", "dev_recall", "dev_map"]);
            for row in &ablation {
                t.row(vec![row.variant.label().to_string(), fmt(row.dev_recall), fmt(row.dev_map)]);
            }
            t.save(&dir.join("table_ablation.tsv"))?;
        }
        if !failed.is_empty() {
            let mut t = TsvTable::new(vec!["arm", "error"]);
            for (arm, err) in &failed {
                t.row(vec![arm.slug().to_string(), err.clone()]);
            }
            t.save(&dir.join("failed_arms.tsv"))?;
        }
    }
    Ok(SeedOutputs { seed: seed_val, arms, failed, sweep, ablation })
}

/// Run the whole experiment: every seed, then the cross-seed summary tables.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("config.json"), cfg.to_json_string()?.as_bytes())?;
    }
    let mut seeds = Vec::new();
    for &seed_val in &cfg.seeds {
        let seed_dir = out_dir.map(|d| d.join(format!("seed-{seed_val}")));
        seeds.push(run_experiment_seed(cfg, seed_val, seed_dir.as_deref())?);
    }

    if let Some(dir) = out_dir {
        // cross-seed mean table
        let mut table = TsvTable::new(vec!["arm", "recall", "map", "r_prec", "mrr", "ndcg"]);
        for &arm in &cfg.arms {
            let rows: Vec<&ArmOutput> =
                seeds.iter().filter_map(|s| s.arms.get(&arm)).collect();
            if rows.is_empty() {
                continue;
            }
            let mean = |metric: &str| -> f64 {
                rows.iter().map(|o| o.test_metrics.macro_avg[metric]).sum::<f64>() / rows.len() as f64
            };
            table.row(vec![
                arm.label(cfg.n_agents),
                fmt(mean("recall")),
                fmt(mean("map")),
                fmt(mean("r_prec")),
                fmt(mean("mrr")),
                fmt(mean("ndcg")),
            ]);
        }
        table.save(&dir.join("table_arms_mean.tsv"))?;

        if seeds.iter().any(|s| !s.sweep.is_empty()) {
            let mut series = String::from("# n_agents oracle system_recall (mean over seeds)\n");
            for n in 1..=cfg.n_agents {
                let pts: Vec<&SweepPoint> = seeds
                    .iter()
                    .flat_map(|s| s.sweep.iter())
                    .filter(|p| p.n_agents == n)
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                let oracle = pts.iter().map(|p| p.oracle).sum::<f64>() / pts.len() as f64;
                let system = pts.iter().map(|p| p.system_recall).sum::<f64>() / pts.len() as f64;
                series.push_str(&format!("{n} {} {}\n", fmt(oracle), fmt(system)));
            }
            write_atomic(&dir.join("sweep.dat"), series.as_bytes())?;
        }

        #[derive(Serialize)]
        struct SummaryArm {
            label: String,
            per_seed_recall: Vec<f64>,
            mean_recall: f64,
        }
        #[derive(Serialize)]
        struct Summary {
            seeds: Vec<u64>,
            arms: BTreeMap<String, SummaryArm>,
            failed: BTreeMap<String, Vec<String>>,
        }
        let mut summary = Summary { seeds: cfg.seeds.clone(), arms: BTreeMap::new(), failed: BTreeMap::new() };
        for &arm in &cfg.arms {
            let per_seed: Vec<f64> = seeds
                .iter()
                .filter_map(|s| s.arms.get(&arm).map(|o| o.test_metrics.macro_avg["recall"]))
                .collect();
            if per_seed.is_empty() {
                continue;
            }
            let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            summary.arms.insert(
                arm.slug().to_string(),
                SummaryArm { label: arm.label(cfg.n_agents), per_seed_recall: per_seed, mean_recall: mean },
            );
        }
        for s in &seeds {
            for (arm, err) in &s.failed {
                summary
                    .failed
                    .entry(arm.slug().to_string())
                    .or_default()
                    .push(format!("seed {}: {err}", s.seed));
            }
        }
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(ExperimentOutput { seeds })
}
