//! Metric report containers and the run-file format (qid, doc_id, rank,
//! score), compatible with trec_eval-style tooling.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{map, mrr, ndcg, r_precision, recall_at_k};
use crate::search::{Qrels, RankedList, ScoredDoc};
use crate::{Error, Result};

/// The metric column set reported in the experiment tables.
pub const STANDARD_METRICS: &[&str] = &["recall", "map", "r_prec", "mrr", "ndcg"];

/// Per-query metric values plus corpus-level macro averages.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvalResult {
    /// qid → (metric name → value)
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    /// metric name → macro average
    pub macro_avg: BTreeMap<String, f64>,
}

impl EvalResult {
    /// Evaluate one run (qid → ranked list) against qrels. Queries missing
    /// from the qrels are an error; queries missing from the run score 0.
    pub fn compute(
        run: &BTreeMap<String, RankedList>,
        qrels: &Qrels,
        recall_k: usize,
    ) -> Result<EvalResult> {
        if qrels.is_empty() {
            return Err(Error::Data("evaluate: empty qrels".into()));
        }
        let empty: RankedList = Vec::new();
        let mut result = EvalResult::default();
        for (qid, relevant) in qrels {
            let ranked = run.get(qid).unwrap_or(&empty);
            let mut row = BTreeMap::new();
            row.insert("recall".to_string(), recall_at_k(ranked, relevant, recall_k)?);
            row.insert("map".to_string(), map(ranked, relevant)?);
            row.insert("r_prec".to_string(), r_precision(ranked, relevant)?);
            row.insert("mrr".to_string(), mrr(ranked, relevant)?);
            row.insert("ndcg".to_string(), ndcg(ranked, relevant)?);
            result.per_query.insert(qid.clone(), row);
        }
        let n = result.per_query.len() as f64;
        for name in STANDARD_METRICS {
            let sum: f64 = result.per_query.values().map(|row| row[*name]).sum();
            result.macro_avg.insert(name.to_string(), sum / n);
        }
        Ok(result)
    }

    /// Emit `metric<TAB>value` lines in a fixed order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for name in STANDARD_METRICS {
            if let Some(v) = self.macro_avg.get(*name) {
                out.push_str(&format!("{name}\t{v:.6}\n"));
            }
        }
        out
    }
}

/// One run-file line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// Write a run as TSV: `qid<TAB>doc_id<TAB>rank<TAB>score`. Queries are
/// emitted in ascending qid order, documents by rank.
pub fn save_run_tsv(path: &Path, run: &BTreeMap<String, RankedList>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for (qid, ranked) in run {
        for (i, doc) in ranked.iter().enumerate() {
            writeln!(w, "{qid}\t{}\t{}\t{:.6}", doc.doc_id, i + 1, doc.score)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a run file back into qid → ranked list, restoring rank order and
/// rejecting duplicate (qid, doc_id) pairs.
pub fn load_run_tsv(path: &Path) -> Result<BTreeMap<String, RankedList>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut entries: Vec<RunEntry> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(Error::Data(format!(
                "{}:{}: expected qid\\tdoc_id\\trank\\tscore",
                path.display(),
                lineno + 1
            )));
        }
        let rank: usize = parts[2]
            .parse()
            .map_err(|e| Error::Data(format!("{}:{}: bad rank: {e}", path.display(), lineno + 1)))?;
        let score: f64 = parts[3]
            .parse()
            .map_err(|e| Error::Data(format!("{}:{}: bad score: {e}", path.display(), lineno + 1)))?;
        entries.push(RunEntry {
            qid: parts[0].to_string(),
            doc_id: parts[1].to_string(),
            rank,
            score,
        });
    }
    entries.sort_by(|a, b| a.qid.cmp(&b.qid).then(a.rank.cmp(&b.rank)));
    let mut run: BTreeMap<String, RankedList> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for e in entries {
        if !seen.insert((e.qid.clone(), e.doc_id.clone())) {
            return Err(Error::Data(format!("duplicate (qid, doc_id) = ({}, {})", e.qid, e.doc_id)));
        }
        run.entry(e.qid).or_default().push(ScoredDoc { doc_id: e.doc_id, score: e.score });
    }
    Ok(run)
}
