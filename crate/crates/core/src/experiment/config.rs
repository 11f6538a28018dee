use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MoonsConfig;
use crate::mpnn::{ArchConfig, TrainConfig};
use crate::shifts::ShiftSpec;
use crate::uncertainty::{DensityConfig, JldeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Directory in the on-disk dataset format.
    Path(PathBuf),
    /// Synthetic two-moons graph, regenerated for every split.
    Moons(MoonsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub per_class_train: usize,
    pub per_class_val: usize,
    /// Use the dataset's `splits.json` for every split instead of drawing.
    pub from_file: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            per_class_train: 20,
            per_class_val: 20,
            from_file: false,
        }
    }
}

fn default_members() -> usize {
    10
}

fn default_samples() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Jlde(JldeConfig),
    Energy,
    Msp,
    Mog(DensityConfig),
    Kde(DensityConfig),
    Ensemble {
        #[serde(default = "default_members")]
        members: usize,
    },
    McDropout {
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

impl EstimatorSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EstimatorSpec::Jlde(_) => "jlde",
            EstimatorSpec::Energy => "energy",
            EstimatorSpec::Msp => "msp",
            EstimatorSpec::Mog(_) => "mog",
            EstimatorSpec::Kde(_) => "kde",
            EstimatorSpec::Ensemble { .. } => "ensemble",
            EstimatorSpec::McDropout { .. } => "mc_dropout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    /// Row label in the outputs; defaults to the estimator kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: EstimatorSpec,
}

impl EstimatorEntry {
    pub fn new(spec: EstimatorSpec) -> Self {
        EstimatorEntry { name: None, spec }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec.kind_name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Repeats {
    pub splits: usize,
    pub inits: usize,
}

impl Default for Repeats {
    fn default() -> Self {
        Repeats { splits: 1, inits: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub shift: ShiftSpec,
    pub splits: SplitSpec,
    pub estimators: Vec<EstimatorEntry>,
    pub repeats: Repeats,
    /// Master seed; every other seed is derived from it.
    pub seed: u64,
    /// Parallel (split, init) cells; all cores when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Write the 20-bin reliability curve of each estimator.
    pub reliability: bool,
    /// Write one training-history CSV per cell.
    pub history: bool,
    /// Write one parameter checkpoint per cell.
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Moons(MoonsConfig::default()),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            shift: ShiftSpec::default(),
            splits: SplitSpec::default(),
            estimators: vec![
                EstimatorEntry::new(EstimatorSpec::Jlde(JldeConfig::default())),
                EstimatorEntry::new(EstimatorSpec::Energy),
            ],
            repeats: Repeats::default(),
            seed: 0,
            workers: None,
            output: None,
            reliability: false,
            history: false,
            checkpoints: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats.splits == 0 || self.repeats.inits == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1 each".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators configured".into()));
        }
        let mut labels: Vec<String> = self.estimators.iter().map(EstimatorEntry::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("estimator names must be unique".into()));
        }
        for e in &self.estimators {
            match e.spec {
                EstimatorSpec::Ensemble { members } if members < 2 => {
                    return Err(Error::InvalidArgument("an ensemble needs at least 2 members".into()))
                }
                EstimatorSpec::McDropout { samples } if samples < 2 => {
                    return Err(Error::InvalidArgument("MC dropout needs at least 2 samples".into()))
                }
                _ => {}
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        self.arch.validate()?;
        self.shift.validate()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        // A manifest embeds the config it was produced from.
        let v = match v.get("config") {
            Some(c) if v.get("cells").is_some() => c.clone(),
            _ => v,
        };
        Ok(serde_json::from_value(v)?)
    }

    /// Reads a config or a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }
}
