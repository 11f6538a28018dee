use crate::error::{Error, Result};
use crate::tensor::ops::logsumexp;
use crate::tensor::Matrix;

/// Energy score `−logsumexp(logits_v)` per row.
pub fn score_energy(logits: &Matrix) -> Vec<f64> {
    logits.row_iter().map(|r| -logsumexp(r)).collect()
}

/// `1 − max_c p_c` per row.
pub fn score_msp(probs: &Matrix) -> Vec<f64> {
    probs
        .row_iter()
        .map(|r| 1.0 - r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Elementwise mean of several probability matrices.
pub fn mean_probs(samples: &[Matrix]) -> Result<Matrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("no probability samples".into()))?;
    let mut out = Matrix::zeros(first.rows(), first.cols());
    for s in samples {
        out.add_assign(s)?;
    }
    out.scale(1.0 / samples.len() as f64);
    Ok(out)
}

/// `(1/c) Σ_c Var_i p^(i)_c` per node, with the population variance over
/// samples.
pub fn score_sampling_variance(samples: &[Matrix]) -> Result<Vec<f64>> {
    let mean = mean_probs(samples)?;
    let (n, c) = mean.shape();
    let mut out = vec![0.0; n];
    for s in samples {
        for (v, o) in out.iter_mut().enumerate() {
            *o += s
                .row(v)
                .iter()
                .zip(mean.row(v))
                .map(|(p, m)| (p - m) * (p - m))
                .sum::<f64>();
        }
    }
    let denom = (samples.len() * c) as f64;
    Ok(out.into_iter().map(|x| x / denom).collect())
}
