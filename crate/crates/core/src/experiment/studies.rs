//! Layer ablation, homophily sweep and hyperparameter search.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shifts::{LocClasses, ShiftKind, ShiftSpec};
use crate::uncertainty::{fit_jlde, score_jlde, JldeConfig, LayerSelection};

use super::cell::{evaluate, graph_and_masks, load_source, prepare, train_backbone};
use super::config::{DatasetSpec, EstimatorSpec, ExperimentConfig};
use super::runner::{cell_seeds, mean_std, par_cells, run_experiment};

/// Display name of a layer selection, e.g. `single(2)`.
pub fn selection_name(sel: LayerSelection) -> String {
    match sel {
        LayerSelection::AllCat => "all_cat".into(),
        LayerSelection::AllAdd => "all_add".into(),
        LayerSelection::Single(i) => format!("single({i})"),
        LayerSelection::FirstLast => "first_last".into(),
    }
}

/// `single(1..=L)`, `first_last`, `all_add`, `all_cat`.
pub fn ablation_selections(num_layers: usize) -> Vec<LayerSelection> {
    let mut v: Vec<LayerSelection> = (1..=num_layers).map(LayerSelection::Single).collect();
    v.extend([LayerSelection::FirstLast, LayerSelection::AllAdd, LayerSelection::AllCat]);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub selection: LayerSelection,
    pub runs: usize,
    pub auc_roc: (f64, f64),
    pub auc_pr: (f64, f64),
}

fn first_jlde(cfg: &ExperimentConfig) -> Result<JldeConfig> {
    cfg.estimators
        .iter()
        .find_map(|e| match &e.spec {
            EstimatorSpec::Jlde(c) => Some(c.clone()),
            _ => None,
        })
        .ok_or_else(|| Error::InvalidArgument("layer ablation needs a jlde estimator".into()))
}

/// Scores every layer selection against one trained backbone per cell,
/// using the first JLDE estimator's remaining options.
pub fn run_layer_ablation(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let base = first_jlde(cfg)?;
    let selections = ablation_selections(cfg.arch.layers);
    let source = load_source(cfg)?;
    let seeds = cell_seeds(cfg);
    let per_cell = par_cells(cfg.workers, seeds.len(), |c| {
        let s = &seeds[c];
        let (g, masks) = graph_and_masks(cfg, &source, s)?;
        let p = prepare(g, masks, &cfg.shift, s.shift_seed)?;
        let (model, _) = train_backbone(cfg, &p, s.init_seed, s.train_seed)?;
        let stack = model.forward(&p.infer_graph, false, 0)?;
        selections
            .iter()
            .map(|&sel| {
                let jc = JldeConfig {
                    layer_selection: sel,
                    ..base.clone()
                };
                let est = fit_jlde(&stack, &p.masks, &jc)?;
                let epi = score_jlde(&est, &stack, &p.eval)?;
                let o = evaluate(&p, &stack.probs, epi, false)?;
                Ok((o.metrics[0], o.metrics[1]))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.context(format!("split {}, init {}", s.split, s.init)))
    })?;
    selections
        .iter()
        .enumerate()
        .map(|(j, &selection)| {
            let roc = mean_std(per_cell.iter().map(|c| c[j].0));
            let pr = mean_std(per_cell.iter().map(|c| c[j].1));
            match (roc, pr) {
                (Some(r), Some(p)) => Ok(AblationRow {
                    selection,
                    runs: r.2,
                    auc_roc: (r.0, r.1),
                    auc_pr: (p.0, p.1),
                }),
                _ => Err(Error::InvalidArgument("the shift produced no OOD nodes".into())),
            }
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("selection,runs,auc_roc_mean,auc_roc_std,auc_pr_mean,auc_pr_std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            selection_name(r.selection),
            r.runs,
            r.auc_roc.0,
            r.auc_roc.1,
            r.auc_pr.0,
            r.auc_pr.1
        );
    }
    out
}

fn default_h_values() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.7, 0.9]
}

/// A moons experiment evaluated at several homophily levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    #[serde(default = "default_h_values")]
    pub h_values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            experiment: ExperimentConfig::default(),
            h_values: default_h_values(),
        }
    }
}

impl SweepConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::from(e).context(format!("parsing {}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub homophily: f64,
    pub estimator: String,
    pub runs: usize,
    pub auc_roc: (f64, f64),
}

/// For each `h`, regenerates the moons graph with that homophily, holds out
/// the anomalous class as the OOD set and records the epistemic AUC-ROC of
/// every configured estimator.
pub fn run_moons_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let DatasetSpec::Moons(moons) = &cfg.experiment.dataset else {
        return Err(Error::InvalidArgument("the homophily sweep needs a moons dataset".into()));
    };
    if cfg.h_values.is_empty() || cfg.h_values.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
        return Err(Error::InvalidArgument("h_values must be non-empty and lie in (0, 1]".into()));
    }
    if moons.anomaly_fraction <= 0.0 {
        return Err(Error::InvalidArgument("the homophily sweep needs anomalous nodes".into()));
    }
    let mut rows = Vec::new();
    for &h in &cfg.h_values {
        let mut exp = cfg.experiment.clone();
        let mut m = moons.clone();
        m.homophily = h;
        exp.dataset = DatasetSpec::Moons(m);
        exp.shift = ShiftSpec {
            kind: ShiftKind::Loc,
            loc_classes: LocClasses::Explicit(vec![2]),
            ..exp.shift
        };
        exp.reliability = false;
        exp.history = false;
        exp.checkpoints = false;
        let res = run_experiment(&exp).map_err(|e| e.context(format!("homophily {h}")))?;
        for r in &res.summary {
            let (mean, std) = r.values[0].ok_or_else(|| Error::InvalidArgument("no OOD nodes in the sweep".into()))?;
            rows.push(SweepRow {
                homophily: h,
                estimator: r.estimator.clone(),
                runs: r.runs,
                auc_roc: (mean, std),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("homophily,estimator,runs,auc_roc_mean,auc_roc_std\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.homophily, r.estimator, r.runs, r.auc_roc.0, r.auc_roc.1);
    }
    out
}

/// Hyperparameter grid searched by [`tune`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub hidden_dim: Vec<usize>,
    pub dropout: Vec<f64>,
    pub lr: Vec<f64>,
    pub weight_decay: Vec<f64>,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid {
            hidden_dim: vec![64, 512],
            dropout: vec![0.2, 0.5],
            lr: vec![0.01, 0.001],
            weight_decay: vec![0.0, 1e-4],
        }
    }
}

impl TuneGrid {
    fn points(&self) -> Vec<(usize, f64, f64, f64)> {
        let mut v = Vec::new();
        for &h in &self.hidden_dim {
            for &d in &self.dropout {
                for &lr in &self.lr {
                    for &wd in &self.weight_decay {
                        v.push((h, d, lr, wd));
                    }
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub hidden_dim: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub runs: usize,
    pub val_acc: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub rows: Vec<TuneRow>,
    /// Index into `rows` of the highest mean validation accuracy; ties keep
    /// the earlier grid point.
    pub best: usize,
    /// Input config with the best grid point applied.
    pub best_config: ExperimentConfig,
}

/// Trains a backbone for every (grid point, split, init) and selects the grid
/// point with the highest mean validation accuracy. Shifts are applied
/// before training so held-out classes never influence the selection.
pub fn tune(cfg: &ExperimentConfig, grid: &TuneGrid) -> Result<TuneResult> {
    cfg.validate()?;
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    let source = load_source(cfg)?;
    let seeds = cell_seeds(cfg);
    let configs: Vec<ExperimentConfig> = points
        .iter()
        .map(|&(h, d, lr, wd)| {
            let mut c = cfg.clone();
            c.arch.hidden_dim = h;
            c.arch.dropout = d;
            c.train.lr = lr;
            c.train.weight_decay = wd;
            c.arch.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let n = seeds.len();
    let accs = par_cells(cfg.workers, points.len() * n, |j| {
        let (c, s) = (&configs[j / n], &seeds[j % n]);
        let (g, masks) = graph_and_masks(c, &source, s)?;
        let p = prepare(g, masks, &c.shift, s.shift_seed)?;
        Ok(train_backbone(c, &p, s.init_seed, s.train_seed)?.1.best_val_acc)
    })?;
    let rows: Vec<TuneRow> = points
        .iter()
        .enumerate()
        .map(|(i, &(h, d, lr, wd))| {
            let (mean, std, runs) = mean_std(accs[i * n..(i + 1) * n].iter().map(|&a| Some(a))).expect("non-empty");
            TuneRow {
                hidden_dim: h,
                dropout: d,
                lr,
                weight_decay: wd,
                runs,
                val_acc: (mean, std),
            }
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.val_acc.0 > rows[best].val_acc.0 {
            best = i;
        }
    }
    Ok(TuneResult {
        best_config: configs[best].clone(),
        rows,
        best,
    })
}

pub fn tune_csv(rows: &[TuneRow]) -> String {
    let mut out = String::from("hidden_dim,dropout,lr,weight_decay,runs,val_acc_mean,val_acc_std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.hidden_dim, r.dropout, r.lr, r.weight_decay, r.runs, r.val_acc.0, r.val_acc.1
        );
    }
    out
}
