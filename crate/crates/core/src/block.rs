//! Row-compressed nonnegative blocks with virtual uniform rows.
//!
//! A dangling node's row of `P` is `1/n` in every column. Restricted to a
//! block it is still constant across the block's columns, so it is kept as a
//! single per-row scalar instead of `n_cols` explicit entries.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Value added to every column of the row; zero for ordinary rows.
    uniform: Vec<f64>,
}

impl SparseBlock {
    /// Builds a block from per-row explicit entries and per-row uniform values.
    /// Entries within a row are sorted by column; repeated columns are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>, uniform: Vec<f64>) -> Result<Self> {
        let n_rows = rows.len();
        if uniform.len() != n_rows {
            return Err(Error::DomainMismatch { left: n_rows, right: uniform.len() });
        }
        let mut offsets = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if j >= n_cols {
                    return Err(Error::NodeOutOfRange { index: j, n: n_cols });
                }
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("entry {v} is not a nonnegative number")));
                }
                if v == 0.0 {
                    continue;
                }
                if cols.len() > *offsets.last().unwrap() && *cols.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        for &u in &uniform {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::InvalidParameter(format!("uniform value {u} is not a nonnegative number")));
            }
        }
        Ok(SparseBlock { n_rows, n_cols, offsets, cols, vals, uniform })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut sparse = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DomainMismatch { left: n_cols, right: row.len() });
            }
            sparse.push(row.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect());
        }
        Self::from_rows(n_cols, sparse, vec![0.0; rows.len()])
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        let mut b = Self::from_dense(&rows)?;
        b.n_cols = m.ncols();
        Ok(b)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn uniform_value(&self, i: usize) -> f64 {
        self.uniform[i]
    }

    /// Explicit entries of row `i`, excluding the uniform part.
    pub fn explicit_row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        let explicit = match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        };
        explicit + self.uniform[i]
    }

    /// All entries of row `i` with the uniform part materialized.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut row = vec![self.uniform[i]; self.n_cols];
        for (j, v) in self.explicit_row(i) {
            row[j] += v;
        }
        row
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.explicit_row(i).map(|(_, v)| v).sum::<f64>() + self.uniform[i] * self.n_cols as f64)
            .collect()
    }

    /// `out = x · B` (row vector times block).
    pub fn left_mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(out.len(), self.n_cols);
        let mut spread = 0.0;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n_rows {
            let xi = x[i];
            spread += xi * self.uniform[i];
            for k in self.offsets[i]..self.offsets[i + 1] {
                out[self.cols[k]] += xi * self.vals[k];
            }
        }
        if spread != 0.0 {
            out.iter_mut().for_each(|v| *v += spread);
        }
    }

    /// `out = B · y` (block times column vector).
    pub fn right_mul(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        let total: f64 = if self.uniform.iter().any(|&u| u != 0.0) { y.iter().sum() } else { 0.0 };
        for i in 0..self.n_rows {
            let mut acc = self.uniform[i] * total;
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[k] * y[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    /// `diag(scale) · B`.
    pub fn scale_rows(&self, scale: &[f64]) -> SparseBlock {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in out.offsets[i]..out.offsets[i + 1] {
                out.vals[k] *= scale[i];
            }
            out.uniform[i] *= scale[i];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_rows, self.n_cols, |i, j| self.entry(i, j))
    }
}
