use crate::error::{Error, Result};

use super::{Matrix, Tensor};

/// One named trainable parameter with its Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Param {
    pub fn new(name: impl Into<String>, tensor: Tensor) -> Self {
        let n = tensor.value.as_slice().len();
        Param {
            name: name.into(),
            tensor,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty: `weight_decay · param` is added to the gradient.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Ordered collection of named parameters plus the optimiser step counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    params: Vec<Param>,
    step: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Adds a parameter and returns its index.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        self.params.push(Param::new(name, tensor));
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.m.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn get(&self, idx: usize) -> &Tensor {
        &self.params[idx].tensor
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.params[idx].tensor
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.params[idx].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Mutable access to several distinct parameters at once.
    pub fn get_many_mut<const N: usize>(&mut self, idx: [usize; N]) -> [&mut Tensor; N] {
        self.params
            .get_disjoint_mut(idx)
            .expect("parameter indices must be distinct and in range")
            .map(|p| &mut p.tensor)
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(|p| p.tensor.zero_grad());
    }

    /// Bias-corrected Adam update over every parameter.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for p in &mut self.params {
            let w = p.tensor.value.as_mut_slice();
            let g = p.tensor.grad.as_slice();
            for j in 0..w.len() {
                let gj = g[j] + cfg.weight_decay * w[j];
                p.m[j] = cfg.beta1 * p.m[j] + (1.0 - cfg.beta1) * gj;
                p.v[j] = cfg.beta2 * p.v[j] + (1.0 - cfg.beta2) * gj * gj;
                let m_hat = p.m[j] / bc1;
                let v_hat = p.v[j] / bc2;
                w[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }

    /// Copies parameter values (not moments) from `other`, which must have
    /// the same layout.
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::shape(
                "ParamSet::copy_values_from",
                format!("{} vs {} parameters", self.params.len(), other.params.len()),
            ));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if a.tensor.shape() != b.tensor.shape() {
                return Err(Error::shape(
                    "ParamSet::copy_values_from",
                    format!("{}: {:?} vs {:?}", a.name, a.tensor.shape(), b.tensor.shape()),
                ));
            }
            a.tensor.value = b.tensor.value.clone();
        }
        Ok(())
    }

    /// Named value matrices, in insertion order.
    pub fn named_values(&self) -> Vec<(String, Matrix)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.tensor.value.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_set(x: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.push("x", Tensor::new(Matrix::filled(1, 1, x)));
        ps
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::new(Matrix::from_fn(3, 2, |i, j| i as f64 - j as f64)));
        let before = ps.named_values();
        for _ in 0..10 {
            ps.adam_step(&AdamConfig::new(0.1, 0.0));
        }
        assert_eq!(before, ps.named_values());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps).
        let mut ps = scalar_set(0.5);
        ps.get_mut(0).grad.set(0, 0, 1.0);
        ps.adam_step(&AdamConfig::new(0.01, 0.0));
        let moved = ps.get(0).value.get(0, 0) - 0.5;
        assert!((moved + 0.01 / (1.0 + 1e-8)).abs() < 1e-15, "{moved}");
    }

    #[test]
    fn identical_sets_update_identically() {
        let mut a = scalar_set(2.0);
        let mut b = scalar_set(2.0);
        for k in 0..5 {
            let g = (k as f64).sin();
            a.get_mut(0).grad.set(0, 0, g);
            b.get_mut(0).grad.set(0, 0, g);
            a.adam_step(&AdamConfig::new(0.05, 1e-4));
            b.adam_step(&AdamConfig::new(0.05, 1e-4));
        }
        assert_eq!(a, b);
    }

    #[test]
    fn weight_decay_pulls_towards_zero() {
        let mut ps = scalar_set(3.0);
        ps.adam_step(&AdamConfig::new(0.1, 1.0));
        assert!(ps.get(0).value.get(0, 0) < 3.0);
    }
}
