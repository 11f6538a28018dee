//! Dense numerics and gradient machinery.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod matrix;
pub mod ops;
mod sparse;

pub use adam::{AdamConfig, Param, ParamSet};
pub use gradcheck::{grad_check, grad_check_with_floor, GradCheckReport};
pub use matrix::{gemm, Matrix};
pub use sparse::CsrMatrix;

use crate::rng::Rng;
use rand::Rng as _;

/// A matrix with a same-shaped gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Tensor {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Tensor { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::new(Matrix::zeros(rows, cols))
    }

    /// Glorot-uniform initialisation.
    pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        Tensor::new(Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound)))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}
