//! Distribution shifts and the resulting ID / OOD node partition.
//!
//! Leave-out-classes hides the labels of some classes during training and
//! treats their nodes as OOD. Feature shifts replace the feature rows of a
//! random share of test nodes with noise; the near variant samples from the
//! per-feature maximum-likelihood fit of the original features, the far
//! variant from a standard normal.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureKind, Graph, SplitMasks};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Loc,
    NearFeatures,
    FarFeatures,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocClasses {
    Explicit(Vec<usize>),
    /// Classes `0..l`.
    FirstL(usize),
    /// The last `l` classes.
    LastL(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub loc_classes: LocClasses,
    /// Share of the test partition perturbed by feature shifts.
    pub ood_fraction: f64,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec {
            kind: ShiftKind::Loc,
            loc_classes: LocClasses::LastL(1),
            ood_fraction: 0.5,
            seed: 0,
        }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ShiftKind::Loc => match &self.loc_classes {
                LocClasses::Explicit(c) if c.is_empty() => {
                    Err(Error::InvalidArgument("loc_classes is empty".into()))
                }
                LocClasses::FirstL(0) | LocClasses::LastL(0) => {
                    Err(Error::InvalidArgument("loc_classes selects no class".into()))
                }
                _ => Ok(()),
            },
            _ if !(self.ood_fraction > 0.0 && self.ood_fraction < 1.0) => Err(Error::InvalidArgument(format!(
                "ood_fraction {} not in (0, 1)",
                self.ood_fraction
            ))),
            _ => Ok(()),
        }
    }
}

/// Sorted OOD classes for a graph with `num_classes` classes.
pub fn resolve_loc_classes(sel: &LocClasses, num_classes: usize) -> Result<Vec<usize>> {
    let mut classes = match sel {
        LocClasses::Explicit(c) => c.clone(),
        LocClasses::FirstL(l) => (0..*l).collect(),
        LocClasses::LastL(l) => (num_classes.saturating_sub(*l)..num_classes).collect(),
    };
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::InvalidArgument("no OOD class selected".into()));
    }
    if let Some(&c) = classes.iter().find(|&&c| c >= num_classes) {
        return Err(Error::InvalidArgument(format!("OOD class {c} out of range for {num_classes} classes")));
    }
    if let LocClasses::FirstL(l) | LocClasses::LastL(l) = sel {
        if *l >= num_classes {
            return Err(Error::Infeasible(format!("cannot hold out {l} of {num_classes} classes")));
        }
    }
    Ok(classes)
}

/// Result of a leave-out-classes shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LocShift {
    /// Train/val without OOD-class nodes; the removed nodes join test.
    pub masks: SplitMasks,
    pub ood_classes: Vec<usize>,
    /// Every node of an OOD class.
    pub ood_set: Vec<usize>,
    /// Test nodes of retained classes.
    pub id_eval_set: Vec<usize>,
    /// Dense re-indexing of the retained classes; `None` for OOD classes.
    pub class_map: Vec<Option<usize>>,
    /// Per-node labels under `class_map`. OOD nodes carry `num_classes`,
    /// which is out of range for the classifier head.
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

pub fn apply_loc(g: &Graph, masks: &SplitMasks, spec: &ShiftSpec) -> Result<LocShift> {
    if spec.kind != ShiftKind::Loc {
        return Err(Error::InvalidArgument("apply_loc needs a loc shift".into()));
    }
    spec.validate()?;
    let c = g.num_classes();
    let ood_classes = resolve_loc_classes(&spec.loc_classes, c)?;
    let mut class_map = vec![None; c];
    let mut retained = 0;
    for (k, slot) in class_map.iter_mut().enumerate() {
        if ood_classes.binary_search(&k).is_err() {
            *slot = Some(retained);
            retained += 1;
        }
    }
    if retained < 2 {
        return Err(Error::Infeasible(format!(
            "holding out {} of {c} classes leaves {retained}",
            ood_classes.len()
        )));
    }
    let y = g.labels();
    let is_ood = |v: &usize| class_map[y[*v]].is_none();
    let keep = |set: &[usize]| set.iter().copied().filter(|v| !is_ood(v)).collect::<Vec<_>>();
    let train = keep(&masks.train);
    if train.is_empty() {
        return Err(Error::EmptyMask("train"));
    }
    let val = keep(&masks.val);
    let mut test = masks.test.clone();
    test.extend(masks.train.iter().chain(&masks.val).copied().filter(|v| is_ood(v)));
    let id_eval_set = keep(&masks.test);
    let ood_set: Vec<usize> = (0..g.num_nodes()).filter(|v| is_ood(v)).collect();
    let labels = y.iter().map(|&l| class_map[l].unwrap_or(retained)).collect();
    Ok(LocShift {
        masks: SplitMasks::new(train, val, test, g.num_nodes())?,
        ood_classes,
        ood_set,
        id_eval_set,
        class_map,
        labels,
        num_classes: retained,
    })
}

/// Result of a feature shift.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureShift {
    pub graph: Graph,
    pub ood_set: Vec<usize>,
    pub id_eval_set: Vec<usize>,
}

pub fn apply_feature_noise(g: &Graph, masks: &SplitMasks, spec: &ShiftSpec) -> Result<FeatureShift> {
    if spec.kind == ShiftKind::Loc {
        return Err(Error::InvalidArgument("apply_feature_noise needs a feature shift".into()));
    }
    spec.validate()?;
    if masks.test.is_empty() {
        return Err(Error::EmptyMask("test"));
    }
    let mut rng = rng_from_seed(spec.seed);
    let count = (spec.ood_fraction * masks.test.len() as f64).round() as usize;
    let mut picked: Vec<usize> = index::sample(&mut rng, masks.test.len(), count)
        .into_iter()
        .map(|i| masks.test[i])
        .collect();
    picked.sort_unstable();
    let id_eval_set = masks
        .test
        .iter()
        .copied()
        .filter(|v| picked.binary_search(v).is_err())
        .collect();

    let x = g.features();
    let (n, d) = x.shape();
    let mean = x.column_means();
    let mut x2 = x.clone();
    match spec.kind {
        ShiftKind::FarFeatures => {
            for &v in &picked {
                for f in x2.row_mut(v) {
                    *f = rng.sample(StandardNormal);
                }
            }
        }
        ShiftKind::NearFeatures => match g.feature_kind() {
            FeatureKind::Binary => {
                let dists = mean
                    .iter()
                    .map(|&m| Bernoulli::new(m.clamp(0.0, 1.0)))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                for &v in &picked {
                    for (f, b) in x2.row_mut(v).iter_mut().zip(&dists) {
                        *f = if b.sample(&mut rng) { 1.0 } else { 0.0 };
                    }
                }
            }
            FeatureKind::Continuous => {
                let mut var = vec![0.0; d];
                for r in x.row_iter() {
                    for ((s, a), m) in var.iter_mut().zip(r).zip(&mean) {
                        *s += (a - m) * (a - m) / n as f64;
                    }
                }
                let dists = mean
                    .iter()
                    .zip(&var)
                    .map(|(&m, &s2)| Normal::new(m, s2.sqrt()))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                for &v in &picked {
                    for (f, nd) in x2.row_mut(v).iter_mut().zip(&dists) {
                        *f = nd.sample(&mut rng);
                    }
                }
            }
        },
        ShiftKind::Loc => unreachable!(),
    }
    Ok(FeatureShift {
        graph: g.with_features(x2)?,
        ood_set: picked,
        id_eval_set,
    })
}
