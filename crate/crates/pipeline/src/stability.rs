//! Training-stability comparison: variance of the multi-agent system's test
//! score across seeds vs the single agent's.

use std::path::Path;

use serde::Serialize;

use requery_core::{Error, Result};

use crate::arms::{run_arm, SeedContext};
use crate::config::{Arm, ExperimentConfig};
use crate::report::{fmt, write_json, TsvTable};
use crate::world::build_world;

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub seeds: Vec<u64>,
    /// Test Recall@eval_k ×100 per seed.
    pub single_scores: Vec<f64>,
    pub multi_scores: Vec<f64>,
    /// Sample variance across seeds.
    pub single_variance: f64,
    pub multi_variance: f64,
    /// multi / single; below 1 means the multi-agent system is steadier.
    pub variance_ratio: f64,
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Train the single-agent and multi-agent arms once per seed and compare the
/// across-seed variances of their test scores.
pub fn stability_report(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<StabilityReport> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArg("stability_report: need at least 2 seeds".into()));
    }
    let mut single_scores = Vec::with_capacity(seeds.len());
    let mut multi_scores = Vec::with_capacity(seeds.len());
    for &seed_val in seeds {
        let world = build_world(cfg, seed_val)?;
        let mut ctx = SeedContext::new(cfg, seed_val, world);
        let single = run_arm(&mut ctx, Arm::RlRnn)?;
        let multi = run_arm(&mut ctx, Arm::RlNSub)?;
        single_scores.push(100.0 * single.test_metrics.macro_avg["recall"]);
        multi_scores.push(100.0 * multi.test_metrics.macro_avg["recall"]);
    }
    let single_variance = sample_variance(&single_scores);
    let multi_variance = sample_variance(&multi_scores);
    Ok(StabilityReport {
        seeds: seeds.to_vec(),
        single_scores,
        multi_scores,
        single_variance,
        multi_variance,
        variance_ratio: if single_variance > 0.0 { multi_variance / single_variance } else { f64::INFINITY },
    })
}

pub fn write_stability_report(dir: &Path, report: &StabilityReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut t = TsvTable::new(vec!["seed", "single_recall_x100", "multi_recall_x100"]);
    for ((seed, s), m) in report.seeds.iter().zip(&report.single_scores).zip(&report.multi_scores) {
        t.row(vec![seed.to_string(), fmt(*s), fmt(*m)]);
    }
    t.row(vec!["variance".into(), fmt(report.single_variance), fmt(report.multi_variance)]);
    t.row(vec!["ratio_multi_over_single".into(), "-".into(), fmt(report.variance_ratio)]);
    t.save(&dir.join("stability.tsv"))?;
    write_json(&dir.join("stability.json"), report)
}
