use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};
use crate::tensor::Matrix;

use super::{make_splits_for_classes, FeatureKind, Graph, SplitMasks};

/// Two-moons node classification with an optional anomalous third class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoonsConfig {
    pub n_per_class: usize,
    /// Expected fraction of intra-class edges at nodes of classes 0 and 1.
    pub homophily: f64,
    /// Number of anomalous (class 2) nodes relative to the `2·n_per_class`
    /// in-distribution nodes.
    pub anomaly_fraction: f64,
    pub avg_degree: f64,
    /// Standard deviation of the Gaussian jitter on the moon arcs.
    pub noise: f64,
    /// Per-dimension variance of anomalous features around `[1, 1]`.
    pub anomaly_variance: f64,
    pub per_class_train: usize,
    pub per_class_val: usize,
}

impl Default for MoonsConfig {
    fn default() -> Self {
        MoonsConfig {
            n_per_class: 300,
            homophily: 0.5,
            anomaly_fraction: 0.25,
            avg_degree: 10.0,
            noise: 0.1,
            anomaly_variance: 0.1,
            per_class_train: 20,
            per_class_val: 20,
        }
    }
}

impl MoonsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.homophily > 0.0 && self.homophily <= 1.0) {
            return Err(Error::Infeasible(format!("homophily {} not in (0, 1]", self.homophily)));
        }
        if self.n_per_class < 2 {
            return Err(Error::Infeasible("need at least two nodes per class".into()));
        }
        if !(self.avg_degree > 0.0) || !(self.anomaly_fraction >= 0.0) || !(self.noise >= 0.0) {
            return Err(Error::Infeasible("avg_degree must be positive, fractions non-negative".into()));
        }
        if self.partners_per_node() >= self.n_per_class {
            return Err(Error::Infeasible(format!(
                "average degree {} too large for {} nodes per class",
                self.avg_degree, self.n_per_class
            )));
        }
        Ok(())
    }

    /// Each node initiates this many edges, giving the target mean degree
    /// after symmetrisation.
    fn partners_per_node(&self) -> usize {
        ((self.avg_degree / 2.0).round() as usize).max(1)
    }
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Generates the moons graph and a split whose train / val nodes come from
/// classes 0 and 1 only.
///
/// Wiring: every node draws `round(avg_degree / 2)` partners. A node of class
/// 0 or 1 picks a same-class partner with probability `homophily` and a
/// partner from the other moon otherwise; anomalous nodes pick partners
/// uniformly from all nodes.
pub fn make_moons_graph(cfg: &MoonsConfig, seed: u64) -> Result<(Graph, SplitMasks)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::GRAPH]));
    let n = cfg.n_per_class;
    let n_anom = (cfg.anomaly_fraction * 2.0 * n as f64).round() as usize;
    let total = 2 * n + n_anom;

    let mut labels = Vec::with_capacity(total);
    let mut feats = Vec::with_capacity(total);
    for class in 0..2 {
        for _ in 0..n {
            let t = rng.random_range(0.0..PI);
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            feats.push(vec![x + cfg.noise * normal(&mut rng), y + cfg.noise * normal(&mut rng)]);
            labels.push(class);
        }
    }
    let sd = cfg.anomaly_variance.sqrt();
    for _ in 0..n_anom {
        feats.push(vec![1.0 + sd * normal(&mut rng), 1.0 + sd * normal(&mut rng)]);
        labels.push(2);
    }

    let m = cfg.partners_per_node();
    let mut edges = Vec::with_capacity(total * m);
    for u in 0..total {
        for _ in 0..m {
            let v = if labels[u] == 2 {
                loop {
                    let v = rng.random_range(0..total);
                    if v != u {
                        break v;
                    }
                }
            } else {
                let same = rng.random::<f64>() < cfg.homophily;
                let class = if same { labels[u] } else { 1 - labels[u] };
                loop {
                    let v = class * n + rng.random_range(0..n);
                    if v != u {
                        break v;
                    }
                }
            };
            edges.push((u, v));
        }
    }

    let num_classes = if n_anom > 0 { 3 } else { 2 };
    let g = Graph::new(num_classes, edges, Matrix::from_rows(&feats)?, labels, FeatureKind::Continuous)?;
    let masks = make_splits_for_classes(
        &g,
        &[0, 1],
        cfg.per_class_train,
        cfg.per_class_val,
        derive_seed(seed, &[stream::SPLIT]),
    )?;
    Ok((g, masks))
}
