//! AgentResult logs: JSON-lines records of precomputed (q0, reformulation,
//! ranked results, reward) tuples. This file is the input contract of the
//! aggregator trainer; once written, neither the agents nor the environment
//! are needed again.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResultRecord {
    pub qid: String,
    pub agent_id: String,
    /// Full reformulated query as a space-joined string.
    pub reformulation: String,
    /// Retrieved doc ids in rank order.
    pub ranked_doc_ids: Vec<String>,
    pub reward: f64,
}

impl AgentResultRecord {
    pub fn reformulation_tokens(&self) -> Vec<String> {
        self.reformulation.split_whitespace().map(str::to_string).collect()
    }
}

pub fn save_agent_results_jsonl(path: &Path, records: &[AgentResultRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for rec in records {
        writeln!(w, "{}", serde_json::to_string(rec)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_agent_results_jsonl(path: &Path) -> Result<Vec<AgentResultRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![
            AgentResultRecord {
                qid: "q1".into(),
                agent_id: "agent-0".into(),
                reformulation: "solar panel grid".into(),
                ranked_doc_ids: vec!["d2".into(), "d1".into()],
                reward: 0.5,
            },
            AgentResultRecord {
                qid: "q1".into(),
                agent_id: "identity".into(),
                reformulation: "solar panel".into(),
                ranked_doc_ids: vec![],
                reward: 0.0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        save_agent_results_jsonl(&path, &recs).unwrap();
        let loaded = load_agent_results_jsonl(&path).unwrap();
        assert_eq!(loaded, recs);
        assert_eq!(loaded[0].reformulation_tokens().len(), 3);
    }
}
