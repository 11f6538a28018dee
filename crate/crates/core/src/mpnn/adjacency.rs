use crate::graph::Graph;
use crate::tensor::CsrMatrix;

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
    let mut triplets = Vec::with_capacity(n + 2 * g.num_edges());
    for (v, s) in inv_sqrt.iter().enumerate() {
        triplets.push((v, v, s * s));
    }
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    CsrMatrix::from_triplets(n, n, &triplets).expect("graph edges are in range")
}
