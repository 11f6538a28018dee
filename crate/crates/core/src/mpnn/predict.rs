use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, stream};
use crate::tensor::Matrix;

use super::{normalized_adjacency, MpnnModel};

/// Eval-mode probabilities from every ensemble member.
pub fn ensemble_predict(models: &[MpnnModel], g: &Graph) -> Result<Vec<Matrix>> {
    if models.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "an ensemble needs at least 2 members, got {}",
            models.len()
        )));
    }
    let adj = normalized_adjacency(g);
    models
        .iter()
        .map(|m| Ok(m.forward_with(&adj, g.features(), false, 0)?.probs))
        .collect()
}

/// Probabilities from `samples` forward passes with dropout active.
pub fn mc_dropout_predict(model: &MpnnModel, g: &Graph, samples: usize, seed: u64) -> Result<Vec<Matrix>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 MC samples, got {samples}")));
    }
    let adj = normalized_adjacency(g);
    (0..samples)
        .map(|s| {
            let sseed = derive_seed(seed, &[stream::MC, s as u64]);
            Ok(model.forward_with(&adj, g.features(), true, sseed)?.probs)
        })
        .collect()
}
