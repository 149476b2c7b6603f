//! Dense row-major f64 matrices with the handful of products the
//! training code needs. Matrix products parallelize over row chunks;
//! every output element is written by exactly one thread, so results
//! are bit-identical regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DiffError;

/// Row-major 2-D tensor of f64 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DiffError> {
        if data.len() != rows * cols {
            return Err(DiffError::ShapeMismatch {
                context: "Tensor2::from_vec",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * rhs^T`: (m x k) * (n x k)^T -> (m x n).
    ///
    /// This is the layout used by batched layer application, where `rhs`
    /// is a weight matrix stored (out x in) and `self` is (batch x in).
    pub fn matmul_bt(&self, rhs: &Tensor2) -> Result<Tensor2, DiffError> {
        if self.cols != rhs.cols {
            return Err(DiffError::ShapeMismatch {
                context: "matmul_bt",
                expected: (self.cols, self.cols),
                got: (rhs.cols, rhs.rows),
            });
        }
        let (m, n, _k) = (self.rows, rhs.rows, self.cols);
        let mut out = Tensor2::zeros(m, n);
        out.data
            .par_chunks_mut(n.max(1))
            .zip(self.data.par_chunks(self.cols.max(1)))
            .for_each(|(orow, arow)| {
                for (j, o) in orow.iter_mut().enumerate() {
                    *o = dot(arow, rhs.row(j));
                }
            });
        Ok(out)
    }

    /// `self^T * rhs`: (k x m)^T * (k x n) -> (m x n).
    ///
    /// Used for weight gradients: dW = d_pre^T * input with both stored
    /// batch-major.
    pub fn matmul_at(&self, rhs: &Tensor2) -> Result<Tensor2, DiffError> {
        if self.rows != rhs.rows {
            return Err(DiffError::ShapeMismatch {
                context: "matmul_at",
                expected: (self.rows, self.rows),
                got: (rhs.rows, rhs.cols),
            });
        }
        let (m, n, k) = (self.cols, rhs.cols, self.rows);
        let mut out = Tensor2::zeros(m, n);
        out.data
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, orow)| {
                for t in 0..k {
                    let a = self.data[t * m + i];
                    if a != 0.0 {
                        let rrow = &rhs.data[t * n..(t + 1) * n];
                        for (o, r) in orow.iter_mut().zip(rrow) {
                            *o += a * r;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// Plain `self * rhs`: (m x k) * (k x n) -> (m x n).
    pub fn matmul(&self, rhs: &Tensor2) -> Result<Tensor2, DiffError> {
        if self.cols != rhs.rows {
            return Err(DiffError::ShapeMismatch {
                context: "matmul",
                expected: (self.cols, self.cols),
                got: (rhs.rows, rhs.cols),
            });
        }
        let (m, n, k) = (self.rows, rhs.cols, self.cols);
        let mut out = Tensor2::zeros(m, n);
        out.data
            .par_chunks_mut(n.max(1))
            .zip(self.data.par_chunks(k.max(1)))
            .for_each(|(orow, arow)| {
                for (t, &a) in arow.iter().enumerate() {
                    if a != 0.0 {
                        let rrow = &rhs.data[t * n..(t + 1) * n];
                        for (o, r) in orow.iter_mut().zip(rrow) {
                            *o += a * r;
                        }
                    }
                }
            });
        Ok(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four partial sums so LLVM can keep independent accumulator chains.
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let j = i * 4;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..n {
        tail += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3) + tail
}
