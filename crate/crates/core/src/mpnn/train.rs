use std::path::Path;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SplitMasks};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::tensor::ops::softmax_cross_entropy;
use crate::tensor::{AdamConfig, Matrix};

use super::{normalized_adjacency, MpnnModel, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

impl TrainHistory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of `nodes` whose argmax prediction equals the label.
pub fn accuracy(probs: &Matrix, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let pred = probs.argmax_rows();
    nodes.iter().filter(|&&v| pred[v] == labels[v]).count() as f64 / nodes.len() as f64
}

/// Full-batch training on the `train` mask with early stopping on validation
/// accuracy. `labels` may differ from the graph labels (e.g. re-indexed after
/// a class shift); only entries under the train and val masks are read.
///
/// With an empty validation mask the training accuracy drives early stopping.
pub fn train(
    model: &mut MpnnModel,
    g: &Graph,
    masks: &SplitMasks,
    labels: &[usize],
    tc: &TrainConfig,
) -> Result<TrainHistory> {
    if masks.train.is_empty() {
        return Err(Error::EmptyMask("train"));
    }
    if tc.patience == 0 {
        return Err(Error::InvalidArgument("patience must be at least 1".into()));
    }
    if labels.len() != g.num_nodes() {
        return Err(Error::shape(
            "train",
            format!("{} labels for {} nodes", labels.len(), g.num_nodes()),
        ));
    }
    let adj = normalized_adjacency(g);
    let x = g.features();
    let monitor: &[usize] = if masks.val.is_empty() { &masks.train } else { &masks.val };
    let adam = AdamConfig::new(tc.lr, tc.weight_decay);

    let mut history = TrainHistory::default();
    let mut best = model.params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    for epoch in 1..=tc.max_epochs {
        let mut rng = rng_from_seed(derive_seed(tc.seed, &[stream::DROPOUT, epoch as u64]));
        let (stack, cache) = model.arch.forward(&model.params, &adj, x, true, &mut rng)?;
        let (loss, dlogits) = softmax_cross_entropy(&stack.logits, labels, &masks.train)?;
        if !loss.is_finite() {
            return Err(Error::Infeasible(format!("training loss diverged at epoch {epoch}")));
        }
        model.params.zero_grad();
        model.arch.backward(&mut model.params, &adj, x, &cache, &dlogits)?;
        model.params.adam_step(&adam);

        let eval = model.forward_with(&adj, x, false, 0)?;
        let acc = accuracy(&eval.probs, labels, monitor);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_acc: acc,
        });
        if acc > best_acc {
            best_acc = acc;
            history.best_epoch = epoch;
            best.copy_values_from(&model.params)?;
        } else if epoch - history.best_epoch >= tc.patience {
            debug!("early stop at epoch {epoch}, best {} ({best_acc:.4})", history.best_epoch);
            break;
        }
    }
    model.params.copy_values_from(&best)?;
    history.best_val_acc = best_acc.max(0.0);
    Ok(history)
}
