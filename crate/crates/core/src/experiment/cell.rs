//! One (split, init) cell: shift, train, score, evaluate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{load_dataset, make_moons_graph, make_splits, Graph, SplitMasks};
use crate::metrics::{self, ScoreKind, RELIABILITY_BINS};
use crate::mpnn::{accuracy, ensemble_predict, mc_dropout_predict, train, EmbeddingStack, MpnnModel, TrainConfig, TrainHistory};
use crate::rng::{derive_seed, stream};
use crate::shifts::{apply_feature_noise, apply_loc, ShiftKind, ShiftSpec};
use crate::tensor::Matrix;
use crate::uncertainty::{
    fit_jlde, fit_kde, fit_mog, mean_probs, score_energy, score_jlde, score_msp, score_sampling_variance, ScoreTable,
};

use super::config::{DatasetSpec, EstimatorSpec, ExperimentConfig};

/// Per-run metric names, in output column order.
pub const METRICS: [&str; 9] = [
    "ood_auc_roc_epistemic",
    "ood_auc_pr_epistemic",
    "ood_auc_roc_aleatoric",
    "ood_auc_pr_aleatoric",
    "id_accuracy",
    "misclassification_auc_aleatoric",
    "misclassification_auc_epistemic",
    "ece",
    "brier",
];

pub type MetricValues = [Option<f64>; METRICS.len()];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSeeds {
    pub split: usize,
    pub init: usize,
    pub split_seed: u64,
    pub shift_seed: u64,
    pub init_seed: u64,
    pub train_seed: u64,
}

impl CellSeeds {
    pub fn derive(master: u64, split: usize, init: usize) -> Self {
        let (s, i) = (split as u64, init as u64);
        CellSeeds {
            split,
            init,
            split_seed: derive_seed(master, &[stream::SPLIT, s]),
            shift_seed: derive_seed(master, &[stream::SHIFT, s]),
            init_seed: derive_seed(master, &[stream::INIT, s, i]),
            train_seed: derive_seed(master, &[stream::DROPOUT, s, i]),
        }
    }
}

/// Reliability tallies per bin, summed over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTally {
    pub count: Vec<usize>,
    pub hits: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct EstimatorOutcome {
    pub metrics: MetricValues,
    pub scores: ScoreTable,
    pub reliability: Option<ReliabilityTally>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub seeds: CellSeeds,
    pub estimators: Vec<EstimatorOutcome>,
    pub history: TrainHistory,
    pub model: MpnnModel,
}

/// Source graph shared by all cells of a path dataset.
pub(crate) enum Source {
    File(Graph, Option<SplitMasks>),
    Moons,
}

pub(crate) fn load_source(cfg: &ExperimentConfig) -> Result<Source> {
    match &cfg.dataset {
        DatasetSpec::Path(p) => {
            let (g, s) = load_dataset(p).map_err(|e| e.context(format!("dataset {}", p.display())))?;
            Ok(Source::File(g, s))
        }
        DatasetSpec::Moons(_) => Ok(Source::Moons),
    }
}

pub(crate) fn graph_and_masks(cfg: &ExperimentConfig, source: &Source, seeds: &CellSeeds) -> Result<(Graph, SplitMasks)> {
    match (source, &cfg.dataset) {
        (Source::File(g, file_masks), _) => {
            let masks = if cfg.splits.from_file {
                file_masks
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("splits.from_file set but dataset has no splits.json".into()))?
            } else {
                make_splits(g, cfg.splits.per_class_train, cfg.splits.per_class_val, seeds.split_seed)?
            };
            Ok((g.clone(), masks))
        }
        (Source::Moons, DatasetSpec::Moons(m)) => make_moons_graph(m, seeds.split_seed),
        (Source::Moons, DatasetSpec::Path(_)) => unreachable!("source follows the dataset spec"),
    }
}

/// Everything the estimators of one cell share.
pub(crate) struct Prepared {
    pub train_graph: Graph,
    pub infer_graph: Graph,
    pub masks: SplitMasks,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Sorted union of ID evaluation and OOD nodes.
    pub eval: Vec<usize>,
    pub is_ood: Vec<bool>,
    pub id_eval: Vec<usize>,
}

pub(crate) fn prepare(g: Graph, masks: SplitMasks, shift: &ShiftSpec, shift_seed: u64) -> Result<Prepared> {
    let spec = ShiftSpec {
        seed: shift_seed,
        ..shift.clone()
    };
    let (train_graph, infer_graph, masks, labels, num_classes, ood, id_eval) = match spec.kind {
        ShiftKind::Loc => {
            let s = apply_loc(&g, &masks, &spec)?;
            (g.clone(), g, s.masks, s.labels, s.num_classes, s.ood_set, s.id_eval_set)
        }
        ShiftKind::NearFeatures | ShiftKind::FarFeatures => {
            let s = apply_feature_noise(&g, &masks, &spec)?;
            let labels = g.labels().to_vec();
            let c = g.num_classes();
            (g, s.graph, masks, labels, c, s.ood_set, s.id_eval_set)
        }
    };
    let mut eval: Vec<usize> = ood.iter().chain(&id_eval).copied().collect();
    eval.sort_unstable();
    let is_ood = eval.iter().map(|v| ood.binary_search(v).is_ok()).collect();
    Ok(Prepared {
        train_graph,
        infer_graph,
        masks,
        labels,
        num_classes,
        eval,
        is_ood,
        id_eval,
    })
}

pub(crate) fn train_backbone(cfg: &ExperimentConfig, p: &Prepared, init_seed: u64, train_seed: u64) -> Result<(MpnnModel, TrainHistory)> {
    let mut model = MpnnModel::new(&cfg.arch, p.train_graph.num_features(), p.num_classes, init_seed)?;
    let tc = TrainConfig {
        seed: train_seed,
        ..cfg.train.clone()
    };
    let history = train(&mut model, &p.train_graph, &p.masks, &p.labels, &tc)?;
    Ok((model, history))
}

fn select(values: &[f64], nodes: &[usize]) -> Vec<f64> {
    nodes.iter().map(|&v| values[v]).collect()
}

/// Predictive probabilities over all nodes and epistemic scores over the
/// evaluation nodes.
pub(crate) fn estimate(
    spec: &EstimatorSpec,
    cfg: &ExperimentConfig,
    p: &Prepared,
    model: &MpnnModel,
    stack: &EmbeddingStack,
    seeds: &CellSeeds,
) -> Result<(Matrix, Vec<f64>)> {
    Ok(match spec {
        EstimatorSpec::Jlde(c) => {
            let est = fit_jlde(stack, &p.masks, c)?;
            (stack.probs.clone(), score_jlde(&est, stack, &p.eval)?)
        }
        EstimatorSpec::Energy => (stack.probs.clone(), select(&score_energy(&stack.logits), &p.eval)),
        EstimatorSpec::Msp => (stack.probs.clone(), select(&score_msp(&stack.probs), &p.eval)),
        EstimatorSpec::Mog(c) => {
            let mog = fit_mog(stack, &p.masks, &p.labels, c)?;
            (stack.probs.clone(), mog.score(stack, &p.eval)?)
        }
        EstimatorSpec::Kde(c) => {
            let kde = fit_kde(stack, &p.masks, c)?;
            (stack.probs.clone(), kde.score(stack, &p.eval)?)
        }
        EstimatorSpec::Ensemble { members } => {
            let mut models = vec![model.clone()];
            for m in 1..*members {
                let member_seeds = CellSeeds {
                    init_seed: derive_seed(seeds.init_seed, &[stream::MEMBER, m as u64]),
                    train_seed: derive_seed(seeds.train_seed, &[stream::MEMBER, m as u64]),
                    ..seeds.clone()
                };
                models.push(train_backbone(cfg, p, member_seeds.init_seed, member_seeds.train_seed)?.0);
            }
            let probs = ensemble_predict(&models, &p.infer_graph)?;
            let var = score_sampling_variance(&probs)?;
            (mean_probs(&probs)?, select(&var, &p.eval))
        }
        EstimatorSpec::McDropout { samples } => {
            let seed = derive_seed(seeds.train_seed, &[stream::MC]);
            let probs = mc_dropout_predict(model, &p.infer_graph, *samples, seed)?;
            let var = score_sampling_variance(&probs)?;
            (mean_probs(&probs)?, select(&var, &p.eval))
        }
    })
}

/// Metrics for one estimator. Metrics whose inputs are degenerate (e.g. no
/// misclassified node) are left empty.
pub(crate) fn evaluate(p: &Prepared, probs: &Matrix, epistemic: Vec<f64>, reliability: bool) -> Result<EstimatorOutcome> {
    let pred = probs.argmax_rows();
    let aleatoric = select(&score_msp(probs), &p.eval);
    let correct: Vec<bool> = p.eval.iter().map(|&v| pred[v] == p.labels[v]).collect();
    let scores = ScoreTable::new(&p.eval, &aleatoric, &epistemic, &p.is_ood, &correct)?;

    let ood_epi = metrics::ood_detection(&scores, ScoreKind::Epistemic).ok();
    let ood_alea = metrics::ood_detection(&scores, ScoreKind::Aleatoric).ok();
    let id_probs = probs.select_rows(&p.id_eval);
    let id_labels: Vec<usize> = p.id_eval.iter().map(|&v| p.labels[v]).collect();
    let (ece, brier) = if p.id_eval.is_empty() {
        (None, None)
    } else {
        (
            Some(metrics::ece(&id_probs, &id_labels, metrics::ECE_BINS)?),
            Some(metrics::brier(&id_probs, &id_labels)?),
        )
    };
    let values: MetricValues = [
        ood_epi.map(|x| x.0),
        ood_epi.map(|x| x.1),
        ood_alea.map(|x| x.0),
        ood_alea.map(|x| x.1),
        (!p.id_eval.is_empty()).then(|| accuracy(probs, &p.labels, &p.id_eval)),
        metrics::misclassification_auc(&scores, ScoreKind::Aleatoric).ok(),
        metrics::misclassification_auc(&scores, ScoreKind::Epistemic).ok(),
        ece,
        brier,
    ];
    let reliability = if reliability {
        let id = scores.in_distribution();
        let ok: Vec<bool> = id.rows.iter().map(|r| r.is_correct).collect();
        let curve = metrics::reliability_curve(&id.epistemic(), &ok, RELIABILITY_BINS)?;
        Some(ReliabilityTally {
            count: curve.iter().map(|b| b.count).collect(),
            hits: curve
                .iter()
                .map(|b| b.accuracy.map_or(0, |a| (a * b.count as f64).round() as usize))
                .collect(),
        })
    } else {
        None
    };
    Ok(EstimatorOutcome {
        metrics: values,
        scores,
        reliability,
    })
}

pub(crate) fn run_cell(cfg: &ExperimentConfig, source: &Source, seeds: CellSeeds) -> Result<CellOutcome> {
    let (g, masks) = graph_and_masks(cfg, source, &seeds)?;
    let p = prepare(g, masks, &cfg.shift, seeds.shift_seed)?;
    let (model, history) = train_backbone(cfg, &p, seeds.init_seed, seeds.train_seed)?;
    let stack = model.forward(&p.infer_graph, false, 0)?;
    let estimators = cfg
        .estimators
        .iter()
        .map(|e| {
            let (probs, epi) = estimate(&e.spec, cfg, &p, &model, &stack, &seeds)?;
            evaluate(&p, &probs, epi, cfg.reliability).map_err(|err| err.context(format!("estimator {}", e.label())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellOutcome {
        seeds,
        estimators,
        history,
        model,
    })
}
