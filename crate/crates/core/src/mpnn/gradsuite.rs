//! Finite-difference checks of every differentiable primitive and of the
//! full backbone losses on random instances.

use rand::Rng as _;
use serde::Serialize;

use crate::graph::{FeatureKind, Graph};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::tensor::ops::{
    dropout, dropout_backward, layer_norm, layer_norm_backward, linear, linear_backward, relu, relu_backward,
    softmax_cross_entropy,
};
use crate::tensor::{grad_check, grad_check_with_floor, Matrix, ParamSet, Tensor};

use super::{normalized_adjacency, ArchConfig, ArchKind, Architecture};

/// Tolerance for piecewise-linear primitives, whose central differences are
/// exact up to rounding.
pub const LINEAR_TOL: f64 = 1e-7;
/// Tolerance for smooth non-linear primitives and whole-model losses.
pub const SMOOTH_TOL: f64 = 1e-4;
/// Denominator floor for smooth checks. Their rounding noise is about 1e-10,
/// so gradients below the floor are compared in absolute terms.
const GRAD_FLOOR: f64 = 1e-5;
/// Whole-model instances keep every relu input at least this far from zero.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheckLine {
    pub name: &'static str,
    pub instances: usize,
    pub coordinates: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn uniform(r: usize, c: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Entries bounded away from zero, so relu kinks and near-zero gradients are
/// avoided.
fn signed(r: usize, c: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| {
        let m = rng.random_range(0.2..1.0);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

fn weighted_sum(y: &Matrix, r: &Matrix) -> f64 {
    y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

fn random_graph(n: usize, d: usize, c: usize, rng: &mut Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < 0.3 {
                edges.push((u, v));
            }
        }
    }
    let x = uniform(n, d, rng);
    let y = (0..n).map(|_| rng.random_range(0..c)).collect();
    Graph::new(c, edges, x, y, FeatureKind::Continuous).expect("valid random graph")
}

fn check_linear(rng: &mut Rng) -> (f64, usize) {
    let (n, d, m) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..6));
    let r = signed(n, m, rng);
    let mut ps = ParamSet::new();
    ps.push("x", Tensor::new(uniform(n, d, rng)));
    ps.push("w", Tensor::new(uniform(d, m, rng)));
    ps.push("b", Tensor::new(uniform(1, m, rng)));
    let rep = grad_check(
        &mut ps,
        |ps| {
            let [x, w, b] = ps.get_many_mut([0, 1, 2]);
            let y = linear(&x.value, &w.value, Some(&b.value)).unwrap();
            let dx = linear_backward(&x.value, w, Some(b), &r, true).unwrap().unwrap();
            x.grad.add_assign(&dx).unwrap();
            weighted_sum(&y, &r)
        },
        1e-3,
        None,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

fn check_relu(rng: &mut Rng) -> (f64, usize) {
    let (n, d) = (rng.random_range(1..8), rng.random_range(1..8));
    let r = signed(n, d, rng);
    let mut ps = ParamSet::new();
    ps.push("x", Tensor::new(signed(n, d, rng)));
    let rep = grad_check(
        &mut ps,
        |ps| {
            let x = ps.get_mut(0);
            let y = relu(&x.value);
            let dx = relu_backward(&x.value, &r).unwrap();
            x.grad.add_assign(&dx).unwrap();
            weighted_sum(&y, &r)
        },
        1e-3,
        None,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

fn check_dropout(rng: &mut Rng) -> (f64, usize) {
    let (n, d) = (rng.random_range(1..8), rng.random_range(1..8));
    let r = signed(n, d, rng);
    let mask_seed = rng.random::<u64>();
    let mut ps = ParamSet::new();
    ps.push("x", Tensor::new(uniform(n, d, rng)));
    let rep = grad_check(
        &mut ps,
        |ps| {
            let x = ps.get_mut(0);
            let (y, mask) = dropout(&x.value, 0.4, true, &mut rng_from_seed(mask_seed)).unwrap();
            let dx = dropout_backward(mask.as_ref(), r.clone());
            x.grad.add_assign(&dx).unwrap();
            weighted_sum(&y, &r)
        },
        1e-3,
        None,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

fn check_aggregation(rng: &mut Rng) -> (f64, usize) {
    let n = rng.random_range(2..10);
    let d = rng.random_range(1..5);
    let g = random_graph(n, d, 2, rng);
    let adj = normalized_adjacency(&g);
    let adj_t = adj.transpose();
    let r = signed(n, d, rng);
    let mut ps = ParamSet::new();
    ps.push("x", Tensor::new(uniform(n, d, rng)));
    let rep = grad_check(
        &mut ps,
        |ps| {
            let x = ps.get_mut(0);
            let y = adj.spmm(&x.value).unwrap();
            x.grad.add_assign(&adj_t.spmm(&r).unwrap()).unwrap();
            weighted_sum(&y, &r)
        },
        1e-3,
        None,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

fn check_layer_norm(rng: &mut Rng) -> (f64, usize) {
    let (n, d) = (rng.random_range(1..6), rng.random_range(2..8));
    let r = uniform(n, d, rng);
    let mut ps = ParamSet::new();
    ps.push("x", Tensor::new(uniform(n, d, rng)));
    ps.push("gain", Tensor::new(uniform(1, d, rng)));
    ps.push("shift", Tensor::new(uniform(1, d, rng)));
    let rep = grad_check_with_floor(
        &mut ps,
        |ps| {
            let [x, gain, shift] = ps.get_many_mut([0, 1, 2]);
            let (y, cache) = layer_norm(&x.value, &gain.value, &shift.value, 1e-5).unwrap();
            let dx = layer_norm_backward(&cache, gain, shift, &r).unwrap();
            x.grad.add_assign(&dx).unwrap();
            weighted_sum(&y, &r)
        },
        1e-5,
        None,
        GRAD_FLOOR,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

fn check_cross_entropy(rng: &mut Rng) -> (f64, usize) {
    let (n, c) = (rng.random_range(1..8), rng.random_range(2..6));
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let mut mask: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.6).collect();
    if mask.is_empty() {
        mask.push(0);
    }
    let mut ps = ParamSet::new();
    ps.push("logits", Tensor::new(uniform(n, c, rng).map(|v| 3.0 * v)));
    let rep = grad_check(
        &mut ps,
        |ps| {
            let z = ps.get_mut(0);
            let (loss, dz) = softmax_cross_entropy(&z.value, &labels, &mask).unwrap();
            z.grad.add_assign(&dz).unwrap();
            loss
        },
        1e-5,
        None,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

fn check_model(kind: ArchKind, dropout_p: f64, rng: &mut Rng) -> (f64, usize) {
    let n = rng.random_range(6..14);
    let (d, c) = (rng.random_range(2..6), rng.random_range(2..4));
    let g = random_graph(n, d, c, rng);
    let adj = normalized_adjacency(&g);
    let cfg = ArchConfig {
        kind,
        layers: rng.random_range(1..4),
        hidden_dim: rng.random_range(3..7),
        dropout: dropout_p,
        ..ArchConfig::default()
    };
    let mask: Vec<usize> = (0..n).step_by(2).collect();
    // Redraw parameters until no relu input sits within reach of the step.
    let (arch, mut ps, drop_seed) = loop {
        let (arch, ps) = Architecture::build(&cfg, d, c, rng.random()).unwrap();
        let drop_seed = rng.random::<u64>();
        let (_, cache) = arch
            .forward(&ps, &adj, g.features(), dropout_p > 0.0, &mut rng_from_seed(drop_seed))
            .unwrap();
        if cache.min_abs_relu_input() > KINK_MARGIN {
            break (arch, ps, drop_seed);
        }
    };
    let rep = grad_check_with_floor(
        &mut ps,
        |ps| {
            let mut r = rng_from_seed(drop_seed);
            let (stack, cache) = arch.forward(ps, &adj, g.features(), dropout_p > 0.0, &mut r).unwrap();
            let (loss, dl) = softmax_cross_entropy(&stack.logits, g.labels(), &mask).unwrap();
            arch.backward(ps, &adj, g.features(), &cache, &dl).unwrap();
            loss
        },
        1e-6,
        None,
        GRAD_FLOOR,
    );
    (rep.max_rel_err, rep.coordinates_checked)
}

type Check = fn(&mut Rng) -> (f64, usize);

/// Runs every check on `instances` random instances derived from `seed`.
pub fn gradient_suite(instances: usize, seed: u64) -> Vec<GradientCheckLine> {
    let checks: [(&'static str, f64, Check); 10] = [
        ("linear", LINEAR_TOL, check_linear),
        ("relu", LINEAR_TOL, check_relu),
        ("dropout", LINEAR_TOL, check_dropout),
        ("normalized aggregation", LINEAR_TOL, check_aggregation),
        ("layer norm", SMOOTH_TOL, check_layer_norm),
        ("softmax cross-entropy", SMOOTH_TOL, check_cross_entropy),
        ("res_gcn loss", SMOOTH_TOL, |r| check_model(ArchKind::ResGcn, 0.0, r)),
        ("res_gcn loss with dropout", SMOOTH_TOL, |r| check_model(ArchKind::ResGcn, 0.3, r)),
        ("gcn loss", SMOOTH_TOL, |r| check_model(ArchKind::Gcn, 0.0, r)),
        ("gcn loss with dropout", SMOOTH_TOL, |r| check_model(ArchKind::Gcn, 0.3, r)),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(ci, &(name, tolerance, check))| {
            let mut worst = 0.0f64;
            let mut coordinates = 0;
            for i in 0..instances {
                let mut rng = rng_from_seed(derive_seed(seed, &[ci as u64, i as u64]));
                let (e, k) = check(&mut rng);
                worst = worst.max(e);
                coordinates += k;
            }
            GradientCheckLine {
                name,
                instances,
                coordinates,
                max_rel_err: worst,
                tolerance,
                passed: worst < tolerance,
            }
        })
        .collect()
}
