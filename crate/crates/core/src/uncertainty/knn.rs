use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Squared Euclidean distance.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest reference rows to `query` as `(squared distance, row)`,
/// ascending, ties broken by the lower row index. Linear in the number of
/// references.
pub fn k_nearest(reference: &Matrix, query: &[f64], k: usize) -> Result<Vec<(f64, usize)>> {
    if k == 0 || k > reference.rows() {
        return Err(Error::TooFewReferences {
            k,
            available: reference.rows(),
        });
    }
    if query.len() != reference.cols() {
        return Err(Error::shape(
            "k_nearest",
            format!("query of length {} against {} columns", query.len(), reference.cols()),
        ));
    }
    let mut all: Vec<(f64, usize)> = reference
        .row_iter()
        .enumerate()
        .map(|(i, r)| (sq_dist(r, query), i))
        .collect();
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, by_dist_then_index);
        all.truncate(k);
    }
    all.sort_unstable_by(by_dist_then_index);
    Ok(all)
}
