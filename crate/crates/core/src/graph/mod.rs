//! Transductive graphs and everything computed directly from them.

mod generate;
mod homophily;
pub mod io;
mod splits;

pub use generate::{make_moons_graph, MoonsConfig};
pub use homophily::{
    adjusted_homophily, class_homophily, compatibility_matrix, edge_homophily, homophily_report,
    node_homophily, node_homophily_among, HomophilyReport,
};
pub use io::{load_dataset, save_dataset};
pub use splits::{make_splits, make_splits_for_classes};

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CsrMatrix, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    Continuous,
}

/// Immutable undirected graph with node features and labels.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted and deduplicated;
/// neighbour lists are derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_classes: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: Matrix,
    labels: Vec<usize>,
    feature_kind: FeatureKind,
}

impl Graph {
    /// Builds a graph, symmetrising and deduplicating `edges`. Self-loops
    /// are dropped.
    pub fn new(
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Matrix,
        labels: Vec<usize>,
        feature_kind: FeatureKind,
    ) -> Result<Self> {
        let n = labels.len();
        if features.rows() != n {
            return Err(Error::RowCountMismatch {
                file: "features".into(),
                expected: n,
                found: features.rows(),
            });
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::LabelOutOfRange { node, label, num_classes });
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { index: x, num_nodes: n });
                }
            }
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        neighbors.iter_mut().for_each(|l| l.sort_unstable());
        Ok(Graph {
            num_classes,
            edges,
            neighbors,
            features,
            labels,
            feature_kind,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    /// Same structure and labels with a replacement feature matrix.
    pub fn with_features(&self, features: Matrix) -> Result<Graph> {
        if features.rows() != self.num_nodes() {
            return Err(Error::RowCountMismatch {
                file: "features".into(),
                expected: self.num_nodes(),
                found: features.rows(),
            });
        }
        Ok(Graph {
            features,
            ..self.clone()
        })
    }

    /// Symmetric 0/1 adjacency with zero diagonal.
    pub fn adjacency(&self) -> CsrMatrix {
        let triplets: Vec<_> = self
            .edges
            .iter()
            .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
            .collect();
        CsrMatrix::from_triplets(self.num_nodes(), self.num_nodes(), &triplets)
            .expect("edge endpoints validated at construction")
    }

    /// Node sets at exact shortest-path distance `0..=k_max` from `v`.
    pub fn khop_shells(&self, v: usize, k_max: usize) -> Result<Vec<Vec<usize>>> {
        if v >= self.num_nodes() {
            return Err(Error::NodeOutOfRange { index: v, num_nodes: self.num_nodes() });
        }
        let mut shells = vec![Vec::new(); k_max + 1];
        let mut dist = vec![usize::MAX; self.num_nodes()];
        let mut queue = VecDeque::from([v]);
        dist[v] = 0;
        while let Some(u) = queue.pop_front() {
            shells[dist[u]].push(u);
            if dist[u] == k_max {
                continue;
            }
            for &w in &self.neighbors[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        shells.iter_mut().for_each(|s| s.sort_unstable());
        Ok(shells)
    }
}

/// Disjoint train / validation / test node sets (sorted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn new(mut train: Vec<usize>, mut val: Vec<usize>, mut test: Vec<usize>, num_nodes: usize) -> Result<Self> {
        let mut seen = vec![false; num_nodes];
        for set in [&mut train, &mut val, &mut test] {
            set.sort_unstable();
            for &i in set.iter() {
                if i >= num_nodes {
                    return Err(Error::NodeOutOfRange { index: i, num_nodes });
                }
                if seen[i] {
                    return Err(Error::InvalidArgument(format!("node {i} appears in more than one split")));
                }
                seen[i] = true;
            }
        }
        Ok(SplitMasks { train, val, test })
    }
}


#[cfg(test)]
mod tests {
    use super::test_graphs::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edges_are_deduplicated_and_symmetric() {
        let g = from_edges(vec![0, 0], 1, &[(0, 1), (1, 0), (0, 1)]);
        assert_eq!(g.num_edges(), 1);
        let a = g.adjacency();
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert!(a.is_symmetric(0.0));
    }

    #[test]
    fn construction_errors() {
        let f = Matrix::zeros(2, 1);
        assert!(matches!(
            Graph::new(2, [(0, 1)], f.clone(), vec![0, 2], FeatureKind::Binary),
            Err(Error::LabelOutOfRange { label: 2, .. })
        ));
        assert!(matches!(
            Graph::new(2, [(0, 5)], f.clone(), vec![0, 1], FeatureKind::Binary),
            Err(Error::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            Graph::new(2, [(0, 1)], Matrix::zeros(3, 1), vec![0, 1], FeatureKind::Binary),
            Err(Error::RowCountMismatch { .. })
        ));
    }

    #[test]
    fn shells_of_path_and_isolated_node() {
        let g = from_edges(vec![0, 0, 0, 0], 1, &[(0, 1), (1, 2)]);
        assert_eq!(g.khop_shells(0, 2).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(g.khop_shells(3, 2).unwrap(), vec![vec![3], vec![], vec![]]);
        assert!(g.khop_shells(9, 1).is_err());
    }

    fn bfs_distances(g: &Graph, v: usize) -> Vec<Option<usize>> {
        // Bellman-Ford style relaxation, independent of the queue-based BFS.
        let n = g.num_nodes();
        let mut d: Vec<Option<usize>> = vec![None; n];
        d[v] = Some(0);
        for _ in 0..n {
            for &(a, b) in g.edges() {
                for (x, y) in [(a, b), (b, a)] {
                    if let Some(dx) = d[x] {
                        if d[y].is_none_or(|dy| dx + 1 < dy) {
                            d[y] = Some(dx + 1);
                        }
                    }
                }
            }
        }
        d
    }

    proptest! {
        #[test]
        fn shells_partition_reachable_set(seed in any::<u64>(), v in 0usize..25, k in 0usize..5) {
            let g = random(25, 0.08, 3, seed);
            let shells = g.khop_shells(v, k).unwrap();
            let dist = bfs_distances(&g, v);
            let mut seen = vec![false; g.num_nodes()];
            for (i, s) in shells.iter().enumerate() {
                for &u in s {
                    prop_assert!(!seen[u]);
                    seen[u] = true;
                    prop_assert_eq!(dist[u], Some(i));
                }
            }
            for u in 0..g.num_nodes() {
                prop_assert_eq!(seen[u], dist[u].is_some_and(|d| d <= k));
            }
        }
    }

    #[test]
    fn split_masks_reject_overlap() {
        assert!(SplitMasks::new(vec![0, 1], vec![1], vec![], 3).is_err());
        assert!(SplitMasks::new(vec![0], vec![4], vec![], 3).is_err());
        let m = SplitMasks::new(vec![2, 0], vec![1], vec![], 3).unwrap();
        assert_eq!(m.train, vec![0, 2]);
    }
}
