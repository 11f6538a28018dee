//! Post-hoc epistemic uncertainty for message-passing neural networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: transductive graph storage, homophily statistics, ego-graph
//!   shells, synthetic generators and the on-disk dataset format.
//! * [`tensor`]: dense `f64` matrices with explicit gradient rules, Adam and a
//!   finite-difference gradient checker.
//! * [`mpnn`]: GCN / Res-GCN backbones exposing every intermediate embedding,
//!   full-batch training with early stopping, ensembles and MC dropout.
//! * [`uncertainty`]: joint latent density estimation (per-layer PCA + KNN on
//!   the concatenated embeddings) together with MoG, KDE, energy, max-softmax
//!   and sampling-variance baselines.
//! * [`shifts`]: leave-out-classes and feature-noise distribution shifts.
//! * [`metrics`]: AUC-ROC, AUC-PR, ECE, Brier and reliability curves.
//! * [`info`]: exact mutual-information bookkeeping over finite generative
//!   models of message passing.
//! * [`experiment`]: the config-driven runner behind the `heterouq` binary.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod info;
pub mod metrics;
pub mod mpnn;
pub mod rng;
pub mod shifts;
pub mod tensor;
pub mod uncertainty;

pub use error::{Error, Result};
pub use graph::{FeatureKind, Graph, HomophilyReport, SplitMasks};
pub use mpnn::{ArchConfig, ArchKind, EmbeddingStack, MpnnModel, TrainConfig};
pub use tensor::{ParamSet, Tensor};
pub use uncertainty::{JldeConfig, JldeEstimator, ScoreTable};
