use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SplitMasks;
use crate::mpnn::EmbeddingStack;
use crate::tensor::ops::logsumexp;
use crate::tensor::Matrix;

use super::jlde::{default_layers, LatentSpace};
use super::knn::sq_dist;

/// Lower clamp on log-densities.
pub const MIN_LOG_DENSITY: f64 = -1e12;
const VARIANCE_FLOOR: f64 = 1e-6;

/// Latent space shared by the density baselines: per-layer PCA of the
/// concatenated layers, fitted on all nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    pub include_input_layer: bool,
    pub variance_target: f64,
    /// KDE bandwidth; the median pairwise reference distance when unset.
    pub bandwidth: Option<f64>,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            include_input_layer: false,
            variance_target: 0.95,
            bandwidth: None,
        }
    }
}

fn latent(stack: &EmbeddingStack, cfg: &DensityConfig) -> Result<LatentSpace> {
    LatentSpace::fit(
        stack,
        &default_layers(stack.num_layers(), cfg.include_input_layer),
        None,
        cfg.variance_target,
    )
}

/// Class-conditional diagonal Gaussians weighted by class frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MogDensity {
    pub latent: LatentSpace,
    pub log_weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

/// Maximum-likelihood mixture fitted on the training nodes, one component
/// per class present in the training labels.
pub fn fit_mog(stack: &EmbeddingStack, masks: &SplitMasks, labels: &[usize], cfg: &DensityConfig) -> Result<MogDensity> {
    if masks.train.is_empty() {
        return Err(Error::EmptyMask("train"));
    }
    let latent = latent(stack, cfg)?;
    let z = latent.embed(stack, &masks.train)?;
    let num_classes = masks.train.iter().map(|&v| labels[v] + 1).max().unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (row, &v) in masks.train.iter().enumerate() {
        members[labels[v]].push(row);
    }
    let d = z.cols();
    let n = masks.train.len() as f64;
    let (mut log_weights, mut means, mut variances) = (Vec::new(), Vec::new(), Vec::new());
    for (class, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                available: rows.len(),
                required: 2,
            });
        }
        let m = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &r in rows {
            for (a, b) in mean.iter_mut().zip(z.row(r)) {
                *a += b / m;
            }
        }
        let mut var = vec![0.0; d];
        for &r in rows {
            for ((a, b), mu) in var.iter_mut().zip(z.row(r)).zip(&mean) {
                *a += (b - mu) * (b - mu) / m;
            }
        }
        if var.iter().any(|&v| v < VARIANCE_FLOOR) {
            warn!("class {class}: variance floored at {VARIANCE_FLOOR}");
            for v in &mut var {
                *v = v.max(VARIANCE_FLOOR);
            }
        }
        log_weights.push((m / n).ln());
        means.push(mean);
        variances.push(var);
    }
    Ok(MogDensity {
        latent,
        log_weights,
        means,
        variances,
    })
}

impl MogDensity {
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let comps: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, mu), var)| {
                let mut lp = *w;
                for ((x, m), s2) in z.iter().zip(mu).zip(var) {
                    lp -= 0.5 * ((x - m) * (x - m) / s2 + s2.ln() + ln2pi);
                }
                lp
            })
            .collect();
        logsumexp(&comps).max(MIN_LOG_DENSITY)
    }

    /// `−log p(z)` for each query node.
    pub fn score(&self, stack: &EmbeddingStack, query: &[usize]) -> Result<Vec<f64>> {
        let z = self.latent.embed(stack, query)?;
        Ok((0..z.rows()).into_par_iter().map(|i| -self.log_density(z.row(i))).collect())
    }
}

/// Gaussian kernel density over the training embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeDensity {
    pub latent: LatentSpace,
    pub reference: Matrix,
    pub bandwidth: f64,
}

/// Median pairwise distance, over at most 1000 evenly strided rows.
fn median_pairwise_distance(x: &Matrix) -> f64 {
    let stride = x.rows().div_ceil(1000).max(1);
    let rows: Vec<usize> = (0..x.rows()).step_by(stride).collect();
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            d.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

pub fn fit_kde(stack: &EmbeddingStack, masks: &SplitMasks, cfg: &DensityConfig) -> Result<KdeDensity> {
    if masks.train.is_empty() {
        return Err(Error::EmptyMask("train"));
    }
    let latent = latent(stack, cfg)?;
    let reference = latent.embed(stack, &masks.train)?;
    let bandwidth = match cfg.bandwidth {
        Some(b) if b > 0.0 => b,
        Some(b) => return Err(Error::InvalidArgument(format!("bandwidth {b} must be positive"))),
        None => {
            let m = median_pairwise_distance(&reference);
            if m > 0.0 {
                m
            } else {
                warn!("median reference distance is 0; using bandwidth 1");
                1.0
            }
        }
    };
    Ok(KdeDensity {
        latent,
        reference,
        bandwidth,
    })
}

impl KdeDensity {
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let terms: Vec<f64> = self.reference.row_iter().map(|r| -sq_dist(r, z) * inv).collect();
        (logsumexp(&terms) - (terms.len() as f64).ln()).max(MIN_LOG_DENSITY)
    }

    pub fn score(&self, stack: &EmbeddingStack, query: &[usize]) -> Result<Vec<f64>> {
        let z = self.latent.embed(stack, query)?;
        Ok((0..z.rows()).into_par_iter().map(|i| -self.log_density(z.row(i))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn stack(h1: Matrix) -> EmbeddingStack {
        let n = h1.rows();
        EmbeddingStack {
            hidden: vec![Matrix::zeros(n, 1), h1],
            logits: Matrix::zeros(n, 2),
            probs: Matrix::filled(n, 2, 0.5),
        }
    }

    fn masks(train: Vec<usize>, n: usize) -> SplitMasks {
        let test = (0..n).filter(|v| !train.contains(v)).collect();
        SplitMasks::new(train, vec![], test, n).unwrap()
    }

    #[test]
    fn mog_density_peaks_at_dominant_class_mean() {
        let mut rng = rng_from_seed(1);
        let n = 200;
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= 150)).collect();
        let h = Matrix::from_fn(n, 2, |i, _| {
            let c = if labels[i] == 0 { 0.0 } else { 6.0 };
            c + rng.sample::<f64, _>(StandardNormal)
        });
        let s = stack(h);
        let m = masks((0..n).collect(), n);
        let cfg = DensityConfig { variance_target: 1.0, ..DensityConfig::default() };
        let mog = fit_mog(&s, &m, &labels, &cfg).unwrap();
        assert_eq!(mog.means.len(), 2);
        let mu = &mog.means[0];
        let sd: Vec<f64> = mog.variances[0].iter().map(|v| v.sqrt()).collect();
        let at_mean = -mog.log_density(mu);
        for j in 0..2 {
            for sign in [-1.0, 1.0] {
                let mut p = mu.clone();
                p[j] += sign * sd[j];
                assert!(at_mean < -mog.log_density(&p));
            }
        }
    }

    #[test]
    fn single_unit_gaussian_matches_closed_form() {
        let mog = MogDensity {
            latent: LatentSpace { layers: vec![], pca: vec![] },
            log_weights: vec![0.0],
            means: vec![vec![1.0, -2.0]],
            variances: vec![vec![1.0, 1.0]],
        };
        let z = [0.5, 0.5];
        let expect = 0.5 * (0.25 + 6.25) + (2.0 * std::f64::consts::PI).ln();
        assert!((-mog.log_density(&z) - expect).abs() < 1e-12);
    }

    #[test]
    fn mog_floors_zero_variance_and_rejects_tiny_classes() {
        let h = Matrix::from_fn(6, 2, |i, j| if j == 0 { i as f64 } else { 1.0 });
        let s = stack(h);
        let labels = vec![0, 0, 0, 1, 1, 1];
        let mog = fit_mog(&s, &masks((0..6).collect(), 6), &labels, &DensityConfig::default()).unwrap();
        assert!(mog.variances.iter().flatten().all(|&v| v >= VARIANCE_FLOOR));
        let err = fit_mog(&s, &masks(vec![0, 1, 3], 6), &labels, &DensityConfig::default());
        assert!(matches!(err, Err(Error::ClassTooSmall { class: 1, .. })));
    }

    #[test]
    fn kde_far_query_is_clamped_not_infinite() {
        let h = Matrix::from_fn(10, 1, |i, _| if i < 9 { i as f64 * 0.1 } else { 1e9 });
        let s = stack(h);
        let kde = fit_kde(&s, &masks((0..9).collect(), 10), &DensityConfig::default()).unwrap();
        let sc = kde.score(&s, &[0, 9]).unwrap();
        assert!(sc[1].is_finite());
        assert!(sc[1] > sc[0]);
        assert_eq!(sc[1], -MIN_LOG_DENSITY);
    }

    #[test]
    fn kde_matches_direct_average() {
        let h = Matrix::from_fn(5, 1, |i, _| i as f64);
        let s = stack(h);
        let cfg = DensityConfig { bandwidth: Some(0.7), ..DensityConfig::default() };
        let kde = fit_kde(&s, &masks(vec![0, 1, 2], 5), &cfg).unwrap();
        let z = kde.latent.embed(&s, &[4]).unwrap();
        let r = kde.latent.embed(&s, &[0, 1, 2]).unwrap();
        let mean: f64 = (0..3)
            .map(|t| (-(z.get(0, 0) - r.get(t, 0)).powi(2) / (2.0 * 0.49)).exp())
            .sum::<f64>()
            / 3.0;
        assert!((kde.score(&s, &[4]).unwrap()[0] + mean.ln()).abs() < 1e-12);
    }

    #[test]
    fn median_distance_of_three_points() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(median_pairwise_distance(&x), 2.0);
    }
}
