use rand::seq::index;

use crate::rng::rng_from_seed;

use super::ParamSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates_checked: usize,
}

/// Compares analytic gradients against central finite differences.
///
/// `loss` must evaluate the scalar objective and accumulate its gradient into
/// the parameter grad slots; grads are zeroed before every call. The relative
/// error per coordinate is `|a − n| / max(|a|, |n|, 1e-8)`.
///
/// With `sample = Some((count, seed))` only a random subset of `count`
/// coordinates is checked.
pub fn grad_check<F>(params: &mut ParamSet, loss: F, h: f64, sample: Option<(usize, u64)>) -> GradCheckReport
where
    F: FnMut(&mut ParamSet) -> f64,
{
    grad_check_with_floor(params, loss, h, sample, 1e-8)
}

/// [`grad_check`] with a custom denominator floor: coordinates whose
/// gradients are below `floor` are compared in absolute terms scaled by
/// `1/floor`, which keeps rounding noise on near-zero gradients from
/// dominating the report.
pub fn grad_check_with_floor<F>(
    params: &mut ParamSet,
    mut loss: F,
    h: f64,
    sample: Option<(usize, u64)>,
    floor: f64,
) -> GradCheckReport
where
    F: FnMut(&mut ParamSet) -> f64,
{
    params.zero_grad();
    loss(params);
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.tensor.grad.as_slice().to_vec())
        .collect();

    let coords: Vec<(usize, usize)> = analytic
        .iter()
        .enumerate()
        .flat_map(|(pi, g)| (0..g.len()).map(move |j| (pi, j)))
        .collect();
    let coords = match sample {
        Some((count, seed)) if count < coords.len() => {
            let mut rng = rng_from_seed(seed);
            let mut picked: Vec<usize> = index::sample(&mut rng, coords.len(), count).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| coords[i]).collect()
        }
        _ => coords,
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        coordinates_checked: coords.len(),
    };
    for (pi, j) in coords {
        let orig = params.get(pi).value.as_slice()[j];
        params.get_mut(pi).value.as_mut_slice()[j] = orig + h;
        params.zero_grad();
        let up = loss(params);
        params.get_mut(pi).value.as_mut_slice()[j] = orig - h;
        params.zero_grad();
        let down = loss(params);
        params.get_mut(pi).value.as_mut_slice()[j] = orig;

        let numeric = (up - down) / (2.0 * h);
        let a = analytic[pi][j];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if err > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = err;
            report.worst = Some((params.name(pi).to_string(), j));
        }
    }
    params.zero_grad();
    report
}
