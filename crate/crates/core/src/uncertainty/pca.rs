use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::{gemm, Matrix};

/// Linear projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaMap {
    pub mean: Vec<f64>,
    /// d × r with orthonormal columns.
    pub components: Matrix,
    /// Fraction of total variance captured by the kept components.
    pub retained_ratio: f64,
    /// Explained-variance ratio of every component, descending; sums to 1.
    pub explained_ratios: Vec<f64>,
}

/// Fits a PCA keeping the smallest number of components whose cumulative
/// explained variance reaches `variance_target`.
///
/// Uses the d × d covariance when `d ≤ n` and the n × n Gram matrix otherwise.
/// All-equal rows keep one zero-variance component.
pub fn fit_pca(x: &Matrix, variance_target: f64) -> Result<PcaMap> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one column".into()));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidArgument(format!("variance target {variance_target} not in (0, 1]")));
    }
    let mean = x.column_means();
    let mut xc = x.clone();
    for row in xc.as_mut_slice().chunks_mut(d) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }

    let (eigvals, vectors) = if d <= n {
        let mut cov = Matrix::zeros(d, d);
        gemm(&xc, true, &xc, false, &mut cov, 0.0)?;
        let (vals, vecs) = sym_eigen(&cov);
        (vals, vecs)
    } else {
        let mut gram = Matrix::zeros(n, n);
        gemm(&xc, false, &xc, true, &mut gram, 0.0)?;
        let (vals, u) = sym_eigen(&gram);
        // v_j = Xcᵀ u_j / sqrt(λ_j) for the non-null directions.
        let keep = vals.iter().take_while(|&&l| l > 1e-12 * vals[0].max(1e-300)).count().max(1);
        let mut v = Matrix::zeros(d, keep);
        let mut xt_u = Matrix::zeros(d, n);
        gemm(&xc, true, &u, false, &mut xt_u, 0.0)?;
        for j in 0..keep {
            let s = vals[j].max(0.0).sqrt();
            for i in 0..d {
                v.set(i, j, if s > 0.0 { xt_u.get(i, j) / s } else { 0.0 });
            }
        }
        (vals.into_iter().take(keep).collect(), v)
    };

    let centered_ss: f64 = xc.as_slice().iter().map(|v| v * v).sum();
    let raw_ss: f64 = x.as_slice().iter().map(|v| v * v).sum();
    if centered_ss <= 1e-24 * (1.0 + raw_ss) {
        warn!("PCA input has zero variance; keeping a single zero-variance component");
        let mut components = Matrix::zeros(d, 1);
        components.set(0, 0, 1.0);
        let mut explained = vec![0.0; eigvals.len().max(1)];
        explained[0] = 1.0;
        return Ok(PcaMap {
            mean,
            components,
            retained_ratio: 1.0,
            explained_ratios: explained,
        });
    }
    let scale: f64 = eigvals.iter().map(|l| l.max(0.0)).sum();
    let explained: Vec<f64> = eigvals.iter().map(|l| l.max(0.0) / scale).collect();
    let mut cum = 0.0;
    let mut r = explained.len();
    for (j, e) in explained.iter().enumerate() {
        cum += e;
        if cum >= variance_target - 1e-12 {
            r = j + 1;
            break;
        }
    }
    let components = Matrix::from_fn(d, r, |i, j| vectors.get(i, j));
    let retained_ratio = explained[..r].iter().sum::<f64>().min(1.0);
    Ok(PcaMap {
        mean,
        components,
        retained_ratio,
        explained_ratios: explained,
    })
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue, with
/// each eigenvector's largest-magnitude entry made positive.
fn sym_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let k = m.rows();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(k, k, m.as_slice()));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vecs = Matrix::zeros(k, k);
    for (jj, &j) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..k {
            vecs.set(i, jj, sign * col[i]);
        }
    }
    (vals, vecs)
}

impl PcaMap {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.cols()
    }

    /// Projects rows of `x` onto the kept components.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "pca_transform",
                format!("{} columns for a map fitted on {}", x.cols(), self.input_dim()),
            ));
        }
        let mut xc = x.clone();
        for row in xc.as_mut_slice().chunks_mut(self.input_dim()) {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        xc.matmul(&self.components)
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(z.rows(), self.input_dim());
        gemm(z, false, &self.components, true, &mut out, 0.0)?;
        for row in out.as_mut_slice().chunks_mut(self.input_dim()) {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}
