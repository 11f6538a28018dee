use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::{Graph, SplitMasks};

/// Stratified split over every class; the remainder goes to test.
pub fn make_splits(g: &Graph, per_class_train: usize, per_class_val: usize, seed: u64) -> Result<SplitMasks> {
    let classes: Vec<usize> = (0..g.num_classes()).collect();
    make_splits_for_classes(g, &classes, per_class_train, per_class_val, seed)
}

/// Stratified split drawing train / val nodes only from `classes`. Nodes of
/// all other classes are placed in test.
pub fn make_splits_for_classes(
    g: &Graph,
    classes: &[usize],
    per_class_train: usize,
    per_class_val: usize,
    seed: u64,
) -> Result<SplitMasks> {
    let mut rng = rng_from_seed(seed);
    let mut by_class = vec![Vec::new(); g.num_classes()];
    for (v, &y) in g.labels().iter().enumerate() {
        by_class[y].push(v);
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (c, mut nodes) in by_class.into_iter().enumerate() {
        if !classes.contains(&c) {
            test.extend(nodes);
            continue;
        }
        let required = per_class_train + per_class_val;
        if nodes.len() < required {
            return Err(Error::ClassTooSmall {
                class: c,
                available: nodes.len(),
                required,
            });
        }
        nodes.shuffle(&mut rng);
        train.extend_from_slice(&nodes[..per_class_train]);
        val.extend_from_slice(&nodes[per_class_train..required]);
        test.extend_from_slice(&nodes[required..]);
    }
    SplitMasks::new(train, val, test, g.num_nodes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{FeatureKind, Graph};
    use crate::tensor::Matrix;

    fn balanced(per_class: usize, classes: usize) -> Graph {
        let labels: Vec<usize> = (0..per_class * classes).map(|i| i % classes).collect();
        Graph::new(classes, [], Matrix::zeros(labels.len(), 1), labels, FeatureKind::Binary).unwrap()
    }

    #[test]
    fn split_sizes() {
        let g = balanced(100, 3);
        let m = make_splits(&g, 20, 20, 0).unwrap();
        assert_eq!((m.train.len(), m.val.len(), m.test.len()), (60, 60, 180));
        for c in 0..3 {
            assert_eq!(m.train.iter().filter(|&&v| g.labels()[v] == c).count(), 20);
        }
    }

    #[test]
    fn seeds_give_different_masks() {
        let g = balanced(100, 3);
        assert_ne!(make_splits(&g, 20, 20, 0).unwrap(), make_splits(&g, 20, 20, 1).unwrap());
        assert_eq!(make_splits(&g, 20, 20, 5).unwrap(), make_splits(&g, 20, 20, 5).unwrap());
    }

    #[test]
    fn masks_disjoint_over_many_draws() {
        let g = balanced(30, 4);
        for seed in 0..1000 {
            let m = make_splits(&g, 5, 7, seed).unwrap();
            let mut seen = vec![0u8; g.num_nodes()];
            for &v in m.train.iter().chain(&m.val).chain(&m.test) {
                seen[v] += 1;
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn small_class_errors() {
        let g = balanced(10, 2);
        assert!(matches!(make_splits(&g, 6, 6, 0), Err(Error::ClassTooSmall { .. })));
    }

    #[test]
    fn excluded_classes_go_to_test() {
        let g = balanced(10, 3);
        let m = make_splits_for_classes(&g, &[0, 1], 2, 2, 0).unwrap();
        assert!(m.train.iter().chain(&m.val).all(|&v| g.labels()[v] != 2));
        assert_eq!(m.test.iter().filter(|&&v| g.labels()[v] == 2).count(), 10);
    }
}
