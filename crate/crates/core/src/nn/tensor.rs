//! Dense row-major f64 tensor.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A dense tensor with a dimension list and row-major 64-bit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch {
                context: "Tensor::from_vec",
                expected: n,
                actual: data.len(),
            });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Number of rows of a 2-d tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-d tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    /// Row `i` of a 2-d tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// y += W·x for a 2-d weight tensor (rows × cols).
    pub fn matvec_acc(&self, x: &[f64], y: &mut [f64]) {
        let (r, c) = (self.rows(), self.cols());
        debug_assert_eq!(x.len(), c);
        debug_assert_eq!(y.len(), r);
        for i in 0..r {
            let row = &self.data[i * c..(i + 1) * c];
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            y[i] += acc;
        }
    }

    /// y += Wᵀ·d for a 2-d weight tensor; used to push gradients back.
    pub fn matvec_t_acc(&self, d: &[f64], y: &mut [f64]) {
        let (r, c) = (self.rows(), self.cols());
        debug_assert_eq!(d.len(), r);
        debug_assert_eq!(y.len(), c);
        for i in 0..r {
            let di = d[i];
            if di == 0.0 {
                continue;
            }
            let row = &self.data[i * c..(i + 1) * c];
            for (yj, w) in y.iter_mut().zip(row) {
                *yj += w * di;
            }
        }
    }

    /// self += scale · d ⊗ x (outer product) for a 2-d tensor.
    pub fn outer_acc(&mut self, d: &[f64], x: &[f64], scale: f64) {
        let (r, c) = (self.rows(), self.cols());
        debug_assert_eq!(d.len(), r);
        debug_assert_eq!(x.len(), c);
        for i in 0..r {
            let di = d[i] * scale;
            if di == 0.0 {
                continue;
            }
            let row = &mut self.data[i * c..(i + 1) * c];
            for (w, xj) in row.iter_mut().zip(x) {
                *w += di * xj;
            }
        }
    }

    /// self += scale · other, elementwise.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }
}
