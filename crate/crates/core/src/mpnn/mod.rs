//! Message-passing backbones.
//!
//! Two kinds are provided. `gcn` stacks `σ(Â·H·W)` layers. `res_gcn` follows
//! the residual recipe for heterophilic benchmarks: input projection, then
//! per layer `LayerNorm → Â· → linear-relu-linear → residual add`, a final
//! LayerNorm and a linear classifier. Both expose every intermediate node
//! embedding through [`EmbeddingStack`].

mod adjacency;
mod gradsuite;
mod model;
mod predict;
mod train;

pub use adjacency::normalized_adjacency;
pub use gradsuite::{gradient_suite, GradientCheckLine, LINEAR_TOL, SMOOTH_TOL};
pub use model::{Architecture, ForwardCache, MpnnModel};
pub use predict::{ensemble_predict, mc_dropout_predict};
pub use train::{accuracy, train, EpochRecord, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Gcn,
    ResGcn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub kind: ArchKind,
    pub layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    /// Project features with a 1-layer MLP before message passing. When off,
    /// `res_gcn` requires `hidden_dim == num_features`.
    pub input_mlp: bool,
    /// Linear classifier after the last layer. Always on for `res_gcn`; for
    /// `gcn` the last layer emits logits directly when off.
    pub output_mlp: bool,
    pub layer_norm_eps: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            kind: ArchKind::ResGcn,
            layers: 2,
            hidden_dim: 64,
            dropout: 0.2,
            input_mlp: true,
            output_mlp: true,
            layer_norm_eps: 1e-5,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("layers and hidden_dim must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.kind == ArchKind::ResGcn && !self.output_mlp {
            return Err(Error::InvalidArgument("res_gcn requires an output head".into()));
        }
        Ok(())
    }
}

/// All node representations produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStack {
    /// `hidden[0]` is the input feature matrix, `hidden[l]` the output of
    /// message-passing layer `l` (post-residual for `res_gcn`).
    pub hidden: Vec<Matrix>,
    pub logits: Matrix,
    pub probs: Matrix,
}

impl EmbeddingStack {
    pub fn num_layers(&self) -> usize {
        self.hidden.len() - 1
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.probs.argmax_rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            weight_decay: 1e-4,
            max_epochs: 1000,
            patience: 200,
            seed: 0,
        }
    }
}
