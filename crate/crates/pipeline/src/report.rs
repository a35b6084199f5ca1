//! Deterministic report emission: TSV tables, JSON summaries, and
//! gnuplot-ready series. All floats print with six decimals so byte-identical
//! reruns are byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use requery_core::Result;

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp: PathBuf = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        path.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// A simple TSV table with a header row.
pub struct TsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl TsvTable {
    pub fn new<S: Into<String>>(header: Vec<S>) -> TsvTable {
        TsvTable { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
        self
    }

    pub fn to_string(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_string().as_bytes())
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// `metric<TAB>value` lines in a fixed metric order.
pub fn metrics_tsv(macro_avg: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    for name in requery_core::metrics::STANDARD_METRICS {
        if let Some(v) = macro_avg.get(*name) {
            out.push_str(&format!("{name}\t{}\n", fmt(*v)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        write_atomic(&path, b"one\n").unwrap();
        write_atomic(&path, b"two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two\n");
    }

    #[test]
    fn table_renders_deterministically() {
        let mut t = TsvTable::new(vec!["arm", "recall"]);
        t.row(vec!["BM25".into(), fmt(0.25)]);
        assert_eq!(t.to_string(), "arm\trecall\nBM25\t0.250000\n");
    }
}
