//! Post-hoc uncertainty estimators on a trained backbone.
//!
//! JLDE reduces each selected layer with PCA, concatenates the results and
//! scores a node by its distances to the `k` nearest training nodes in that
//! joint space. MoG and KDE densities live in the same latent space; energy,
//! max-softmax and sampling variance work on logits and probabilities.

mod baselines;
mod density;
mod jlde;
pub mod knn;
mod pca;
mod scores;

pub use baselines::{mean_probs, score_energy, score_msp, score_sampling_variance};
pub use density::{fit_kde, fit_mog, DensityConfig, KdeDensity, MogDensity, MIN_LOG_DENSITY};
pub use jlde::{
    default_layers, fit_jlde, score_jlde, DistanceForm, JldeBlock, JldeConfig, JldeEstimator, LatentSpace,
    LayerSelection, PcaFit,
};
pub use pca::{fit_pca, PcaMap};
pub use scores::{ScoreRow, ScoreTable};
