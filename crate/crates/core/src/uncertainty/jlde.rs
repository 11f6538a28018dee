use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SplitMasks;
use crate::mpnn::EmbeddingStack;
use crate::tensor::Matrix;

use super::knn::k_nearest;
use super::pca::{fit_pca, PcaMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSelection {
    /// Concatenate all layers into one joint space.
    AllCat,
    /// Score each layer on its own and sum the scores.
    AllAdd,
    /// One layer only (`0` is the input features).
    Single(usize),
    /// First and last layer, concatenated.
    FirstLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceForm {
    /// `Σ_t ‖z − z_t‖²`
    SumSq,
    /// `((1/k) Σ_t ‖z − z_t‖)²`
    MeanThenSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaFit {
    /// PCA on every node's embedding.
    Transductive,
    /// PCA on training nodes only.
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JldeConfig {
    pub k: usize,
    pub layer_selection: LayerSelection,
    /// Add `H^(0) = X` to the layer set.
    pub include_input_layer: bool,
    pub distance_form: DistanceForm,
    pub variance_target: f64,
    pub pca_fit: PcaFit,
}

impl Default for JldeConfig {
    fn default() -> Self {
        JldeConfig {
            k: 5,
            layer_selection: LayerSelection::AllCat,
            include_input_layer: false,
            distance_form: DistanceForm::SumSq,
            variance_target: 0.95,
            pca_fit: PcaFit::Transductive,
        }
    }
}

/// Per-layer PCA maps whose outputs are concatenated in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpace {
    pub layers: Vec<usize>,
    pub pca: Vec<PcaMap>,
}

impl LatentSpace {
    /// Fits one PCA per layer on `fit_rows` (all nodes when `None`).
    pub fn fit(stack: &EmbeddingStack, layers: &[usize], fit_rows: Option<&[usize]>, variance_target: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("empty layer set".into()));
        }
        let mut pca = Vec::with_capacity(layers.len());
        for &l in layers {
            let h = stack.hidden.get(l).ok_or_else(|| {
                Error::InvalidArgument(format!("layer {l} not in a stack of {} layers", stack.num_layers()))
            })?;
            let map = match fit_rows {
                Some(rows) => fit_pca(&h.select_rows(rows), variance_target),
                None => fit_pca(h, variance_target),
            }
            .map_err(|e| e.context(format!("PCA of layer {l}")))?;
            pca.push(map);
        }
        Ok(LatentSpace {
            layers: layers.to_vec(),
            pca,
        })
    }

    pub fn dim(&self) -> usize {
        self.pca.iter().map(PcaMap::output_dim).sum()
    }

    /// Reduced, concatenated embeddings of `nodes`.
    pub fn embed(&self, stack: &EmbeddingStack, nodes: &[usize]) -> Result<Matrix> {
        let parts = self
            .layers
            .iter()
            .zip(&self.pca)
            .map(|(&l, p)| {
                let h = stack
                    .hidden
                    .get(l)
                    .ok_or_else(|| Error::InvalidArgument(format!("stack has no layer {l}")))?;
                p.transform(&h.select_rows(nodes))
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::hcat(&parts.iter().collect::<Vec<_>>())
    }
}

/// Layers `1..=L`, preceded by `0` when the input layer is included.
pub fn default_layers(num_layers: usize, include_input: bool) -> Vec<usize> {
    let start = if include_input { 0 } else { 1 };
    (start..=num_layers).collect()
}

fn layer_blocks(sel: LayerSelection, num_layers: usize, include_input: bool) -> Result<Vec<Vec<usize>>> {
    let base = default_layers(num_layers, include_input);
    Ok(match sel {
        LayerSelection::AllCat => vec![base],
        LayerSelection::AllAdd => base.into_iter().map(|l| vec![l]).collect(),
        LayerSelection::Single(i) => {
            if i > num_layers {
                return Err(Error::InvalidArgument(format!("layer {i} exceeds {num_layers} layers")));
            }
            vec![vec![i]]
        }
        LayerSelection::FirstLast => {
            if base[0] == num_layers {
                vec![vec![num_layers]]
            } else {
                vec![vec![base[0], num_layers]]
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JldeBlock {
    pub latent: LatentSpace,
    /// Reduced embeddings of the training nodes.
    pub reference: Matrix,
}

/// Fitted KNN density estimator over joint latent embeddings.
///
/// All selections except `all_add` use a single block.
#[derive(Debug, Clone, PartialEq)]
pub struct JldeEstimator {
    pub config: JldeConfig,
    pub blocks: Vec<JldeBlock>,
}

/// Fits PCA and the reference set from the training nodes of `stack`.
pub fn fit_jlde(stack: &EmbeddingStack, masks: &SplitMasks, cfg: &JldeConfig) -> Result<JldeEstimator> {
    let train = &masks.train;
    if train.is_empty() {
        return Err(Error::EmptyMask("train"));
    }
    if cfg.k == 0 || cfg.k > train.len() {
        return Err(Error::TooFewReferences {
            k: cfg.k,
            available: train.len(),
        });
    }
    let fit_rows = match cfg.pca_fit {
        PcaFit::Transductive => None,
        PcaFit::TrainOnly => {
            if train.len() < 2 {
                return Err(Error::InvalidArgument("train-only PCA needs at least 2 training nodes".into()));
            }
            Some(train.as_slice())
        }
    };
    let blocks = layer_blocks(cfg.layer_selection, stack.num_layers(), cfg.include_input_layer)?
        .into_iter()
        .map(|layers| {
            let latent = LatentSpace::fit(stack, &layers, fit_rows, cfg.variance_target)?;
            let reference = latent.embed(stack, train)?;
            Ok(JldeBlock { latent, reference })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JldeEstimator {
        config: cfg.clone(),
        blocks,
    })
}

impl JldeEstimator {
    /// Reference matrix of the first block.
    pub fn reference(&self) -> &Matrix {
        &self.blocks[0].reference
    }

    /// Scores already-reduced query rows against one block's references.
    fn score_block(&self, block: &JldeBlock, z: &Matrix) -> Result<Vec<f64>> {
        let k = self.config.k;
        let form = self.config.distance_form;
        (0..z.rows())
            .into_par_iter()
            .map(|i| {
                let nn = k_nearest(&block.reference, z.row(i), k)?;
                Ok(match form {
                    DistanceForm::SumSq => nn.iter().map(|(d, _)| d).sum(),
                    DistanceForm::MeanThenSq => {
                        let m = nn.iter().map(|(d, _)| d.sqrt()).sum::<f64>() / k as f64;
                        m * m
                    }
                })
            })
            .collect()
    }
}

/// Epistemic score of each query node; larger means lower density.
pub fn score_jlde(est: &JldeEstimator, stack: &EmbeddingStack, query: &[usize]) -> Result<Vec<f64>> {
    let mut total = vec![0.0; query.len()];
    for block in &est.blocks {
        let z = block.latent.embed(stack, query)?;
        for (t, s) in total.iter_mut().zip(est.score_block(block, &z)?) {
            *t += s;
        }
    }
    Ok(total)
}
