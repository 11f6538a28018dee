use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

use super::Graph;

/// Label-based homophily statistics of a graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomophilyReport {
    pub h_edge: f64,
    pub h_node: f64,
    pub h_class: f64,
    /// Only computed on request.
    pub h_adjusted: Option<f64>,
    /// Row-stochastic class compatibility matrix.
    pub compatibility: Vec<Vec<f64>>,
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    if g.num_edges() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let y = g.labels();
    let same = g.edges().iter().filter(|&&(u, v)| y[u] == y[v]).count();
    Ok(same as f64 / g.num_edges() as f64)
}

/// Mean same-label neighbour fraction over non-isolated nodes.
pub fn node_homophily(g: &Graph) -> Result<f64> {
    node_homophily_filtered(g, |_| true)
}

/// Node homophily on the subgraph induced by nodes whose label is in
/// `classes`: only such nodes are averaged and only their neighbours inside
/// the subgraph are counted.
pub fn node_homophily_among(g: &Graph, classes: &[usize]) -> Result<f64> {
    node_homophily_filtered(g, |c| classes.contains(&c))
}

fn node_homophily_filtered(g: &Graph, keep: impl Fn(usize) -> bool) -> Result<f64> {
    let y = g.labels();
    let mut total = 0.0;
    let mut counted = 0usize;
    for v in 0..g.num_nodes() {
        if !keep(y[v]) {
            continue;
        }
        let (mut deg, mut same) = (0usize, 0usize);
        for &u in g.neighbors(v).iter().filter(|&&u| keep(y[u])) {
            deg += 1;
            same += usize::from(y[u] == y[v]);
        }
        if deg > 0 {
            total += same as f64 / deg as f64;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::AllNodesIsolated);
    }
    Ok(total / counted as f64)
}

/// Excess intra-class edge fraction over the class share, clamped at zero
/// per class and averaged with `1/(C-1)`.
pub fn class_homophily(g: &Graph) -> Result<f64> {
    let c = g.num_classes();
    if c < 2 {
        return Err(Error::SingleClass);
    }
    if g.num_edges() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let y = g.labels();
    let mut same = vec![0usize; c];
    let mut degree = vec![0usize; c];
    let mut size = vec![0usize; c];
    for v in 0..g.num_nodes() {
        size[y[v]] += 1;
        degree[y[v]] += g.degree(v);
        same[y[v]] += g.neighbors(v).iter().filter(|&&u| y[u] == y[v]).count();
    }
    let n = g.num_nodes() as f64;
    let sum: f64 = (0..c)
        .filter(|&k| degree[k] > 0)
        .map(|k| (same[k] as f64 / degree[k] as f64 - size[k] as f64 / n).max(0.0))
        .sum();
    Ok(sum / (c - 1) as f64)
}

/// Entry `(i, j)`: fraction of edge endpoints at class-`i` nodes whose
/// neighbour has class `j`. Rows of classes without edges are zero.
pub fn compatibility_matrix(g: &Graph) -> Result<Matrix> {
    if g.num_edges() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let c = g.num_classes();
    let y = g.labels();
    let mut m = Matrix::zeros(c, c);
    for &(u, v) in g.edges() {
        m.set(y[u], y[v], m.get(y[u], y[v]) + 1.0);
        m.set(y[v], y[u], m.get(y[v], y[u]) + 1.0);
    }
    for i in 0..c {
        let row = m.row_mut(i);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    Ok(m)
}

/// Adjusted homophily `(h_edge − Σ_c D_c²/(2|E|)²) / (1 − Σ_c D_c²/(2|E|)²)`
/// with `D_c` the summed degree of class `c`.
pub fn adjusted_homophily(g: &Graph) -> Result<f64> {
    let h = edge_homophily(g)?;
    let mut d = vec![0.0; g.num_classes()];
    for v in 0..g.num_nodes() {
        d[g.labels()[v]] += g.degree(v) as f64;
    }
    let two_e = 2.0 * g.num_edges() as f64;
    let expected: f64 = d.iter().map(|dc| (dc / two_e).powi(2)).sum();
    if (1.0 - expected).abs() < f64::EPSILON {
        return Err(Error::SingleClass);
    }
    Ok((h - expected) / (1.0 - expected))
}

pub fn homophily_report(g: &Graph, adjusted: bool) -> Result<HomophilyReport> {
    let compat = compatibility_matrix(g)?;
    Ok(HomophilyReport {
        h_edge: edge_homophily(g)?,
        h_node: node_homophily(g)?,
        h_class: class_homophily(g)?,
        h_adjusted: if adjusted { Some(adjusted_homophily(g)?) } else { None },
        compatibility: compat.row_iter().map(<[f64]>::to_vec).collect(),
    })
}
