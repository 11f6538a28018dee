//! Differentiable primitives.
//!
//! Each forward function has a matching `*_backward` that maps the upstream
//! gradient to the downstream one and accumulates parameter gradients into
//! the [`Tensor::grad`] slots. The backward passes are composed by hand in
//! [`crate::mpnn`]; there is no tape.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{gemm, Matrix, Tensor};

/// `x·W + bias` with `bias` broadcast over rows.
pub fn linear(x: &Matrix, w: &Matrix, bias: Option<&Matrix>) -> Result<Matrix> {
    if x.cols() != w.rows() {
        return Err(Error::shape(
            "linear",
            format!("x {:?} · W {:?}", x.shape(), w.shape()),
        ));
    }
    let mut y = Matrix::zeros(x.rows(), w.cols());
    if let Some(b) = bias {
        if b.shape() != (1, w.cols()) {
            return Err(Error::shape(
                "linear",
                format!("bias {:?}, expected (1, {})", b.shape(), w.cols()),
            ));
        }
        for i in 0..y.rows() {
            y.row_mut(i).copy_from_slice(b.as_slice());
        }
        gemm(x, false, w, false, &mut y, 1.0)?;
    } else {
        gemm(x, false, w, false, &mut y, 0.0)?;
    }
    Ok(y)
}

/// Accumulates `dW += xᵀ·dy`, `dbias += colsum(dy)`; returns `dx = dy·Wᵀ`
/// when `need_dx`.
pub fn linear_backward(
    x: &Matrix,
    w: &mut Tensor,
    bias: Option<&mut Tensor>,
    dy: &Matrix,
    need_dx: bool,
) -> Result<Option<Matrix>> {
    if dy.shape() != (x.rows(), w.value.cols()) {
        return Err(Error::shape(
            "linear_backward",
            format!("dy {:?} for x {:?}, W {:?}", dy.shape(), x.shape(), w.value.shape()),
        ));
    }
    gemm(x, true, dy, false, &mut w.grad, 1.0)?;
    if let Some(b) = bias {
        let g = b.grad.as_mut_slice();
        for r in dy.row_iter() {
            for (gi, ri) in g.iter_mut().zip(r) {
                *gi += ri;
            }
        }
    }
    if !need_dx {
        return Ok(None);
    }
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    gemm(dy, false, &w.value, true, &mut dx, 0.0)?;
    Ok(Some(dx))
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient of relu given its input `x`. The subgradient at 0 is taken as 0.
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Result<Matrix> {
    if x.shape() != dy.shape() {
        return Err(Error::shape("relu_backward", format!("{:?} vs {:?}", x.shape(), dy.shape())));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Inverted dropout. Returns the output and, when active, the multiplier
/// mask (entries `0` or `1/(1-p)`) needed by [`dropout_backward`].
pub fn dropout(x: &Matrix, p: f64, training: bool, rng: &mut Rng) -> Result<(Matrix, Option<Matrix>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} not in [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    });
    let y = Matrix::from_vec(
        x.rows(),
        x.cols(),
        x.as_slice().iter().zip(mask.as_slice()).map(|(a, m)| a * m).collect(),
    )?;
    Ok((y, Some(mask)))
}

pub fn dropout_backward(mask: Option<&Matrix>, dy: Matrix) -> Matrix {
    match mask {
        None => dy,
        Some(m) => {
            let mut dx = dy;
            dx.as_mut_slice()
                .iter_mut()
                .zip(m.as_slice())
                .for_each(|(g, s)| *g *= s);
            dx
        }
    }
}

/// Saved state of a layer-norm forward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

/// Row-wise layer normalisation: `gain ⊙ (x − mean)/sqrt(var + eps) + shift`
/// with the biased (population) row variance.
pub fn layer_norm(x: &Matrix, gain: &Matrix, shift: &Matrix, eps: f64) -> Result<(Matrix, LayerNormCache)> {
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("layer_norm eps must be positive, got {eps}")));
    }
    let d = x.cols();
    if gain.shape() != (1, d) || shift.shape() != (1, d) {
        return Err(Error::shape(
            "layer_norm",
            format!("x {:?}, gain {:?}, shift {:?}", x.shape(), gain.shape(), shift.shape()),
        ));
    }
    let mut normalized = Matrix::zeros(x.rows(), d);
    let mut out = Matrix::zeros(x.rows(), d);
    let mut inv_std = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let r = x.row(i);
        let mean = r.iter().sum::<f64>() / d as f64;
        let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + eps).sqrt();
        inv_std.push(s);
        let nr = normalized.row_mut(i);
        for (n, v) in nr.iter_mut().zip(r) {
            *n = (v - mean) * s;
        }
        let nr = normalized.row(i);
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = gain.as_slice()[j] * nr[j] + shift.as_slice()[j];
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &mut Tensor,
    shift: &mut Tensor,
    dy: &Matrix,
) -> Result<Matrix> {
    let xhat = &cache.normalized;
    if dy.shape() != xhat.shape() {
        return Err(Error::shape("layer_norm_backward", format!("{:?} vs {:?}", dy.shape(), xhat.shape())));
    }
    let d = xhat.cols();
    let n = d as f64;
    let mut dx = Matrix::zeros(xhat.rows(), d);
    for i in 0..xhat.rows() {
        let g = dy.row(i);
        let xr = xhat.row(i);
        {
            let gg = gain.grad.as_mut_slice();
            let sg = shift.grad.as_mut_slice();
            for j in 0..d {
                gg[j] += g[j] * xr[j];
                sg[j] += g[j];
            }
        }
        let gv = gain.value.as_slice();
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for j in 0..d {
            let dh = g[j] * gv[j];
            sum_dxhat += dh;
            sum_dxhat_xhat += dh * xr[j];
        }
        let s = cache.inv_std[i];
        for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
            let dh = g[j] * gv[j];
            *o = s / n * (n * dh - sum_dxhat - xr[j] * sum_dxhat_xhat);
        }
    }
    Ok(dx)
}

/// Numerically stable row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let r = p.row_mut(i);
        let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in r.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        r.iter_mut().for_each(|v| *v /= z);
    }
    p
}

pub fn logsumexp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood of `labels` over the rows in `mask`.
/// Returns the loss and `dlogits = (softmax − onehot)/|mask|` on masked rows.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize], mask: &[usize]) -> Result<(f64, Matrix)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("loss"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("{} labels for {} rows", labels.len(), logits.rows()),
        ));
    }
    let c = logits.cols();
    let scale = 1.0 / mask.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), c);
    let mut loss = 0.0;
    for &i in mask {
        let y = labels[i];
        if y >= c {
            return Err(Error::LabelOutOfRange { node: i, label: y, num_classes: c });
        }
        let r = logits.row(i);
        let lse = logsumexp(r);
        loss += lse - r[y];
        let g = grad.row_mut(i);
        for j in 0..c {
            g[j] = (r[j] - lse).exp() * scale;
        }
        g[y] -= scale;
    }
    Ok((loss * scale, grad))
}
