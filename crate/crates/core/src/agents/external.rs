//! Hook for plugging in an external reformulator executable, so heterogeneous
//! sub-agents (any program that maps a query string to reformulation strings)
//! can join the pool.

use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::agents::{DecodeMethod, Reformulation};
use crate::search::tokenize;
use crate::{Error, Result};

/// An external reformulator: the query is written to the process' stdin as a
/// single line; every non-empty stdout line is one reformulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalReformulator {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub agent_id: String,
}

impl ExternalReformulator {
    pub fn reformulate(&self, q0: &[String]) -> Result<Vec<Reformulation>> {
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Data(format!("spawn {}: {e}", self.command)))?;
        {
            let stdin = child.stdin.as_mut().expect("stdin piped");
            writeln!(stdin, "{}", q0.join(" "))?;
        }
        let output = child
            .wait_with_output()
            .map_err(|e| Error::Data(format!("wait {}: {e}", self.command)))?;
        if !output.status.success() {
            return Err(Error::Data(format!("{} exited with {}", self.command, output.status)));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let reformulations: Vec<Reformulation> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let tokens = tokenize(line);
                // a full query must begin with q0: outputs that extend q0 keep
                // only their tail as `added`, anything else is appended whole
                let added = if tokens.len() >= q0.len() && tokens[..q0.len()] == *q0 {
                    tokens[q0.len()..].to_vec()
                } else {
                    tokens
                };
                Reformulation {
                    q0: q0.to_vec(),
                    added,
                    agent_id: self.agent_id.clone(),
                    method: DecodeMethod::Greedy,
                    log_prob: 0.0,
                }
            })
            .collect();
        if reformulations.is_empty() {
            return Err(Error::Data(format!("{} produced no reformulations", self.command)));
        }
        Ok(reformulations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_behaves_as_identity_reformulator() {
        let agent = ExternalReformulator {
            command: "cat".into(),
            args: vec![],
            agent_id: "ext".into(),
        };
        let q0 = vec!["solar".to_string(), "panel".to_string()];
        let out = agent.reformulate(&q0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].full_query(), q0);
        assert_eq!(out[0].agent_id, "ext");
    }

    #[test]
    fn missing_executable_is_a_data_error() {
        let agent = ExternalReformulator {
            command: "/nonexistent/reformulator".into(),
            args: vec![],
            agent_id: "ext".into(),
        };
        assert!(agent.reformulate(&["x".to_string()]).is_err());
    }
}
