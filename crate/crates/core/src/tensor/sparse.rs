use crate::error::{Error, Result};

use super::Matrix;

/// Compressed sparse row matrix, used for (normalised) adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|&&(r, c, _)| r >= n_rows || c >= n_cols) {
            return Err(Error::shape(
                "CsrMatrix::from_triplets",
                format!("entry ({r},{c}) outside {n_rows}x{n_cols}"),
            ));
        }
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row_entries(i)
            .find(|&(c, _)| c == j)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row_entries(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|i| {
                self.row_entries(i)
                    .all(|(j, v)| (self.get(j, i) - v).abs() <= tol)
            })
    }

    /// `self · x`.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n_cols {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} · {}x{}", self.n_rows, self.n_cols, x.rows(), x.cols()),
            ));
        }
        let mut out = Matrix::zeros(self.n_rows, x.cols());
        for i in 0..self.n_rows {
            let span = self.indptr[i]..self.indptr[i + 1];
            let dst = out.row_mut(i);
            for (&j, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (d, s) in dst.iter_mut().zip(x.row(j)) {
                    *d += v * s;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets: Vec<_> = (0..self.n_rows)
            .flat_map(|i| self.row_entries(i).map(move |(j, v)| (j, i, v)))
            .collect();
        CsrMatrix::from_triplets(self.n_cols, self.n_rows, &triplets)
            .expect("transposed entries are in range")
    }
}
