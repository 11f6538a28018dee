//! Config-driven experiments: one backbone per (split, init) cell, post-hoc
//! estimators on top, metrics aggregated across cells.
//!
//! Every cell draws its seeds from the master seed through
//! [`crate::rng::derive_seed`], so any subset of the grid can be rerun on its
//! own and a written manifest replays a run exactly.

mod cell;
mod config;
mod runner;
mod studies;


pub use cell::{CellOutcome, CellSeeds, EstimatorOutcome, MetricValues, ReliabilityTally, METRICS};
pub use config::{DatasetSpec, EstimatorEntry, EstimatorSpec, ExperimentConfig, Repeats, SplitSpec};
pub use runner::{mean_std, run_experiment, ExperimentResult, Manifest, ReliabilityRow, RunRow, SummaryRow};
pub use studies::{
    ablation_csv, ablation_selections, run_layer_ablation, run_moons_sweep, selection_name, sweep_csv, tune, tune_csv,
    AblationRow, SweepConfig, SweepRow, TuneGrid, TuneResult, TuneRow,
};
