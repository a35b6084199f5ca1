//! Corpus co-occurrence embeddings for the k-means partitioning features:
//! a windowed PPMI matrix factorized by randomized truncated SVD. These stand
//! in for externally pretrained word vectors, which keeps the partitioner a
//! pure function of the training corpus.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::search::Corpus;
use crate::seed;
use crate::{Error, Result};

/// Dense per-term embedding rows (vocab × dim).
#[derive(Debug, Clone)]
pub struct CooccurrenceEmbeddings {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl CooccurrenceEmbeddings {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, term_id: u32) -> &[f64] {
        &self.rows[term_id as usize]
    }

    /// Mean embedding of the in-vocabulary tokens; zero vector when none are.
    pub fn embed_tokens(&self, corpus: &Corpus, tokens: &[String]) -> Vec<f64> {
        let ids: Vec<u32> = tokens.iter().filter_map(|t| corpus.term_id(t)).collect();
        self.embed_term_ids(&ids)
    }

    pub fn embed_term_ids(&self, ids: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if ids.is_empty() {
            return out;
        }
        for &id in ids {
            for (o, v) in out.iter_mut().zip(&self.rows[id as usize]) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= ids.len() as f64);
        out
    }
}

/// Symmetric windowed co-occurrence counts as sparse rows sorted by column,
/// so every later floating-point reduction runs in a fixed order.
fn cooccurrence(corpus: &Corpus, window: usize) -> Vec<Vec<(u32, f64)>> {
    let v = corpus.vocab_len();
    let mut counts: Vec<HashMap<u32, f64>> = vec![HashMap::new(); v];
    for doc in corpus.documents() {
        let tokens = &doc.tokens;
        for (i, &a) in tokens.iter().enumerate() {
            let hi = (i + window + 1).min(tokens.len());
            for &b in &tokens[i + 1..hi] {
                *counts[a as usize].entry(b).or_insert(0.0) += 1.0;
                *counts[b as usize].entry(a).or_insert(0.0) += 1.0;
            }
        }
    }
    counts
        .into_iter()
        .map(|row| {
            let mut sorted: Vec<(u32, f64)> = row.into_iter().collect();
            sorted.sort_unstable_by_key(|&(j, _)| j);
            sorted
        })
        .collect()
}

fn ppmi(rows: &mut Vec<Vec<(u32, f64)>>) {
    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().map(|&(_, v)| v).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    if total == 0.0 {
        return;
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row.retain_mut(|(j, v)| {
            let pmi = ((*v * total) / (row_sums[i] * row_sums[*j as usize])).ln();
            if pmi > 0.0 {
                *v = pmi;
                true
            } else {
                false
            }
        });
    }
}

/// y = A·x for the sparse symmetric matrix.
fn spmv(rows: &[Vec<(u32, f64)>], x: &[f64], y: &mut [f64]) {
    for (i, row) in rows.iter().enumerate() {
        let mut acc = 0.0;
        for &(j, v) in row {
            acc += v * x[j as usize];
        }
        y[i] = acc;
    }
}

/// Train rank-`dim` embeddings from the PPMI matrix via a randomized range
/// finder with two power iterations and an exact SVD of the projected matrix.
pub fn train_ppmi_embeddings(
    corpus: &Corpus,
    dim: usize,
    window: usize,
    seed_val: u64,
) -> Result<CooccurrenceEmbeddings> {
    let v = corpus.vocab_len();
    if v == 0 {
        return Err(Error::EmptyInput("train_ppmi_embeddings: empty vocabulary"));
    }
    let dim = dim.min(v).max(1);
    let mut counts = cooccurrence(corpus, window);
    ppmi(&mut counts);

    let mut rng = seed::rng(seed_val, "ppmi-svd");
    // gaussian sketch via Box-Muller
    let mut gauss = || {
        let u1: f64 = rng.gen::<f64>().max(1e-12);
        let u2: f64 = rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let oversample = (dim + 8).min(v);
    let mut y: Vec<Vec<f64>> = (0..oversample)
        .map(|_| {
            let omega: Vec<f64> = (0..v).map(|_| gauss()).collect();
            let mut col = vec![0.0; v];
            spmv(&counts, &omega, &mut col);
            col
        })
        .collect();
    // two power iterations sharpen the subspace (A is symmetric)
    for _ in 0..2 {
        for col in y.iter_mut() {
            let mut t = vec![0.0; v];
            spmv(&counts, col, &mut t);
            *col = t;
        }
    }
    // modified Gram-Schmidt orthonormalization of the sketch
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(oversample);
    for mut col in y {
        for basis in &q {
            let dot: f64 = basis.iter().zip(&col).map(|(b, c)| b * c).sum();
            for (c, b) in col.iter_mut().zip(basis) {
                *c -= dot * b;
            }
        }
        let norm: f64 = col.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-10 {
            col.iter_mut().for_each(|c| *c /= norm);
            q.push(col);
        }
    }
    if q.is_empty() {
        // degenerate corpus (no co-occurrence signal): zero embeddings
        return Ok(CooccurrenceEmbeddings { dim, rows: vec![vec![0.0; dim]; v] });
    }
    let r = q.len();
    // B = Qᵀ·A (r × v); with A symmetric this is (A·q_i)ᵀ stacked
    let mut b = DMatrix::<f64>::zeros(r, v);
    for (i, basis) in q.iter().enumerate() {
        let mut row = vec![0.0; v];
        spmv(&counts, basis, &mut row);
        for (j, val) in row.into_iter().enumerate() {
            b[(i, j)] = val;
        }
    }
    let svd = b.svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let singular = &svd.singular_values;
    let keep = dim.min(r);
    // embedding = (Q·U_keep)·Σ^{1/2}
    let mut rows = vec![vec![0.0; dim]; v];
    for term in 0..v {
        for c in 0..keep {
            let mut acc = 0.0;
            for (i, basis) in q.iter().enumerate() {
                acc += basis[term] * u[(i, c)];
            }
            rows[term][c] = acc * singular[c].max(0.0).sqrt();
        }
    }
    Ok(CooccurrenceEmbeddings { dim, rows })
}

const MATRIX_MAGIC: &[u8; 4] = b"RQFM";

/// Write a dense feature matrix with a (rows, dim) header.
pub fn save_feature_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let dim = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArg("save_feature_matrix: ragged rows".into()));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    w.write_all(&(dim as u64).to_le_bytes())?;
    for row in rows {
        for &v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_feature_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Checkpoint(format!("bad feature matrix magic {magic:?}")));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    if u32::from_le_bytes(buf4) != 1 {
        return Err(Error::Checkpoint("unsupported feature matrix version".into()));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    r.read_exact(&mut buf8)?;
    let dim = u64::from_le_bytes(buf8) as usize;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut buf8)?;
            row.push(f64::from_le_bytes(buf8));
        }
        rows.push(row);
    }
    Ok(rows)
}
