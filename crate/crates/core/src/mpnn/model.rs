use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{rng_from_seed, Rng};
use crate::tensor::ops::{
    dropout, dropout_backward, layer_norm, layer_norm_backward, linear, linear_backward, relu, relu_backward,
    softmax, LayerNormCache,
};
use crate::tensor::{CsrMatrix, Matrix, ParamSet, Tensor};

use super::{normalized_adjacency, ArchConfig, ArchKind, EmbeddingStack};

/// Indices of one linear map inside the [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
struct LinearIdx {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct NormIdx {
    gain: usize,
    shift: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum LayerIdx {
    Gcn { lin: LinearIdx, activate: bool },
    Res { norm: NormIdx, lin1: LinearIdx, lin2: LinearIdx },
}

/// Parameter layout and forward / backward rules of one backbone. Parameter
/// values live in a separate [`ParamSet`], so gradient checks can perturb them.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    cfg: ArchConfig,
    in_dim: usize,
    num_classes: usize,
    input: Option<LinearIdx>,
    layers: Vec<LayerIdx>,
    final_norm: Option<NormIdx>,
    output: Option<LinearIdx>,
}

fn push_linear(ps: &mut ParamSet, name: &str, rows: usize, cols: usize, rng: &mut Rng) -> LinearIdx {
    LinearIdx {
        w: ps.push(format!("{name}.weight"), Tensor::glorot(rows, cols, rng)),
        b: ps.push(format!("{name}.bias"), Tensor::zeros(1, cols)),
    }
}

fn push_norm(ps: &mut ParamSet, name: &str, dim: usize) -> NormIdx {
    NormIdx {
        gain: ps.push(format!("{name}.gain"), Tensor::new(Matrix::filled(1, dim, 1.0))),
        shift: ps.push(format!("{name}.shift"), Tensor::zeros(1, dim)),
    }
}

impl Architecture {
    /// Lays out and initialises parameters for `in_dim` features and
    /// `num_classes` outputs.
    pub fn build(cfg: &ArchConfig, in_dim: usize, num_classes: usize, seed: u64) -> Result<(Self, ParamSet)> {
        cfg.validate()?;
        if num_classes == 0 || in_dim == 0 {
            return Err(Error::InvalidArgument("need at least one feature and one class".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut ps = ParamSet::new();
        let h = cfg.hidden_dim;
        let input = cfg.input_mlp.then(|| push_linear(&mut ps, "input", in_dim, h, &mut rng));
        let mut dim = if cfg.input_mlp { h } else { in_dim };
        let mut layers = Vec::with_capacity(cfg.layers);
        let (final_norm, output);
        match cfg.kind {
            ArchKind::ResGcn => {
                if dim != h {
                    return Err(Error::InvalidArgument(format!(
                        "res_gcn without input MLP needs hidden_dim == num_features ({h} != {in_dim})"
                    )));
                }
                for l in 1..=cfg.layers {
                    layers.push(LayerIdx::Res {
                        norm: push_norm(&mut ps, &format!("layer{l}.norm"), h),
                        lin1: push_linear(&mut ps, &format!("layer{l}.combine1"), h, h, &mut rng),
                        lin2: push_linear(&mut ps, &format!("layer{l}.combine2"), h, h, &mut rng),
                    });
                }
                final_norm = Some(push_norm(&mut ps, "final.norm", h));
                output = Some(push_linear(&mut ps, "output", h, num_classes, &mut rng));
            }
            ArchKind::Gcn => {
                for l in 1..=cfg.layers {
                    let last = l == cfg.layers;
                    let out = if last && !cfg.output_mlp { num_classes } else { h };
                    layers.push(LayerIdx::Gcn {
                        lin: push_linear(&mut ps, &format!("layer{l}"), dim, out, &mut rng),
                        activate: !last || cfg.output_mlp,
                    });
                    dim = out;
                }
                final_norm = None;
                output = cfg.output_mlp.then(|| push_linear(&mut ps, "output", h, num_classes, &mut rng));
            }
        }
        Ok((
            Architecture {
                cfg: cfg.clone(),
                in_dim,
                num_classes,
                input,
                layers,
                final_norm,
                output,
            },
            ps,
        ))
    }

    pub fn config(&self) -> &ArchConfig {
        &self.cfg
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Forward pass returning all embeddings and the state needed by
    /// [`Architecture::backward`]. Dropout draws from `rng` only when
    /// `training` is set.
    pub fn forward(
        &self,
        ps: &ParamSet,
        adj: &CsrMatrix,
        x: &Matrix,
        training: bool,
        rng: &mut Rng,
    ) -> Result<(EmbeddingStack, ForwardCache)> {
        if x.cols() != self.in_dim || adj.n_rows() != x.rows() {
            return Err(Error::shape(
                "forward",
                format!(
                    "features {:?} for a model expecting {} features and {} nodes",
                    x.shape(),
                    self.in_dim,
                    adj.n_rows()
                ),
            ));
        }
        let p = self.cfg.dropout;
        let val = |i: usize| &ps.get(i).value;

        let mut cache = ForwardCache {
            input_pre: None,
            input_mask: None,
            layers: Vec::with_capacity(self.layers.len()),
            final_norm: None,
            head_input: None,
        };
        let mut h = match self.input {
            Some(li) => {
                let pre = linear(x, val(li.w), Some(val(li.b)))?;
                let (out, mask) = dropout(&relu(&pre), p, training, rng)?;
                cache.input_pre = Some(pre);
                cache.input_mask = mask;
                out
            }
            None => x.clone(),
        };

        let mut hidden = Vec::with_capacity(self.layers.len() + 1);
        hidden.push(x.clone());
        for layer in &self.layers {
            match *layer {
                LayerIdx::Gcn { lin, activate } => {
                    let (hd, mask) = dropout(&h, p, training, rng)?;
                    let agg = adj.spmm(&hd)?;
                    let pre = linear(&agg, val(lin.w), Some(val(lin.b)))?;
                    h = if activate { relu(&pre) } else { pre.clone() };
                    cache.layers.push(LayerCache::Gcn { mask, agg, pre });
                }
                LayerIdx::Res { norm, lin1, lin2 } => {
                    let (normed, norm_cache) =
                        layer_norm(&h, val(norm.gain), val(norm.shift), self.cfg.layer_norm_eps)?;
                    let agg = adj.spmm(&normed)?;
                    let pre1 = linear(&agg, val(lin1.w), Some(val(lin1.b)))?;
                    let (act1, mask1) = dropout(&relu(&pre1), p, training, rng)?;
                    let pre2 = linear(&act1, val(lin2.w), Some(val(lin2.b)))?;
                    let (branch, mask2) = dropout(&pre2, p, training, rng)?;
                    h.add_assign(&branch)?;
                    cache.layers.push(LayerCache::Res {
                        norm: norm_cache,
                        agg,
                        pre1,
                        mask1,
                        act1,
                        mask2,
                    });
                }
            }
            hidden.push(h.clone());
        }

        let head_in = match self.final_norm {
            Some(n) => {
                let (normed, c) = layer_norm(&h, val(n.gain), val(n.shift), self.cfg.layer_norm_eps)?;
                cache.final_norm = Some(c);
                normed
            }
            None => h,
        };
        let logits = match self.output {
            Some(li) => {
                let out = linear(&head_in, val(li.w), Some(val(li.b)))?;
                cache.head_input = Some(head_in);
                out
            }
            None => head_in,
        };
        let probs = softmax(&logits);
        Ok((EmbeddingStack { hidden, logits, probs }, cache))
    }

    /// Accumulates parameter gradients for upstream gradient `dlogits`.
    pub fn backward(
        &self,
        ps: &mut ParamSet,
        adj: &CsrMatrix,
        x: &Matrix,
        cache: &ForwardCache,
        dlogits: &Matrix,
    ) -> Result<()> {
        let mut grad = dlogits.clone();
        if let Some(li) = self.output {
            let head_in = cache.head_input.as_ref().expect("cached head input");
            let [w, b] = ps.get_many_mut([li.w, li.b]);
            grad = linear_backward(head_in, w, Some(b), &grad, true)?.expect("dx requested");
        }
        if let Some(n) = self.final_norm {
            let c = cache.final_norm.as_ref().expect("cached final norm");
            let [g, s] = ps.get_many_mut([n.gain, n.shift]);
            grad = layer_norm_backward(c, g, s, &grad)?;
        }
        // Â is symmetric, so Âᵀ = Â in the aggregation backward.
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            match (layer, lc) {
                (LayerIdx::Gcn { lin, activate }, LayerCache::Gcn { mask, agg, pre }) => {
                    if *activate {
                        grad = relu_backward(pre, &grad)?;
                    }
                    let [w, b] = ps.get_many_mut([lin.w, lin.b]);
                    let dagg = linear_backward(agg, w, Some(b), &grad, true)?.expect("dx requested");
                    grad = dropout_backward(mask.as_ref(), adj.spmm(&dagg)?);
                }
                (
                    LayerIdx::Res { norm, lin1, lin2 },
                    LayerCache::Res {
                        norm: nc,
                        agg,
                        pre1,
                        mask1,
                        act1,
                        mask2,
                    },
                ) => {
                    let dbranch = dropout_backward(mask2.as_ref(), grad.clone());
                    let [w2, b2] = ps.get_many_mut([lin2.w, lin2.b]);
                    let dact1 = linear_backward(act1, w2, Some(b2), &dbranch, true)?.expect("dx requested");
                    let dpre1 = relu_backward(pre1, &dropout_backward(mask1.as_ref(), dact1))?;
                    let [w1, b1] = ps.get_many_mut([lin1.w, lin1.b]);
                    let dagg = linear_backward(agg, w1, Some(b1), &dpre1, true)?.expect("dx requested");
                    let dnormed = adj.spmm(&dagg)?;
                    let [g, s] = ps.get_many_mut([norm.gain, norm.shift]);
                    let dh = layer_norm_backward(nc, g, s, &dnormed)?;
                    grad.add_assign(&dh)?;
                }
                _ => unreachable!("cache layout follows the architecture"),
            }
        }
        if let Some(li) = self.input {
            let pre = cache.input_pre.as_ref().expect("cached input pre-activation");
            let d = relu_backward(pre, &dropout_backward(cache.input_mask.as_ref(), grad))?;
            let [w, b] = ps.get_many_mut([li.w, li.b]);
            linear_backward(x, w, Some(b), &d, false)?;
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input_pre: Option<Matrix>,
    input_mask: Option<Matrix>,
    layers: Vec<LayerCache>,
    final_norm: Option<LayerNormCache>,
    head_input: Option<Matrix>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Gcn {
        mask: Option<Matrix>,
        agg: Matrix,
        pre: Matrix,
    },
    Res {
        norm: LayerNormCache,
        agg: Matrix,
        pre1: Matrix,
        mask1: Option<Matrix>,
        act1: Matrix,
        mask2: Option<Matrix>,
    },
}

impl ForwardCache {
    /// Smallest `|x|` over all relu inputs; finite differences are only
    /// meaningful when it exceeds the step size.
    pub fn min_abs_relu_input(&self) -> f64 {
        let min_abs = |m: &Matrix| m.as_slice().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let mut out = self.input_pre.as_ref().map_or(f64::INFINITY, min_abs);
        for l in &self.layers {
            out = out.min(match l {
                LayerCache::Gcn { pre, .. } => min_abs(pre),
                LayerCache::Res { pre1, .. } => min_abs(pre1),
            });
        }
        out
    }
}

/// A backbone together with its parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct MpnnModel {
    pub arch: Architecture,
    pub params: ParamSet,
}

impl MpnnModel {
    pub fn new(cfg: &ArchConfig, in_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        let (arch, params) = Architecture::build(cfg, in_dim, num_classes, seed)?;
        Ok(MpnnModel { arch, params })
    }

    /// Forward pass on `g`. `seed` drives dropout when `training` is set and
    /// is ignored otherwise.
    pub fn forward(&self, g: &Graph, training: bool, seed: u64) -> Result<EmbeddingStack> {
        let adj = normalized_adjacency(g);
        self.forward_with(&adj, g.features(), training, seed)
    }

    pub fn forward_with(&self, adj: &CsrMatrix, x: &Matrix, training: bool, seed: u64) -> Result<EmbeddingStack> {
        let mut rng = rng_from_seed(seed);
        Ok(self.arch.forward(&self.params, adj, x, training, &mut rng)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FeatureKind;
    use crate::tensor::grad_check;
    use crate::tensor::ops::softmax_cross_entropy;
    use rand::Rng as _;

    fn random_graph(n: usize, d: usize, c: usize, seed: u64) -> Graph {
        let mut rng = rng_from_seed(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.25 {
                    edges.push((u, v));
                }
            }
        }
        let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..n).map(|_| rng.random_range(0..c)).collect();
        Graph::new(c, edges, x, y, FeatureKind::Continuous).unwrap()
    }

    fn arch(kind: ArchKind, hidden: usize, dropout: f64) -> ArchConfig {
        ArchConfig {
            kind,
            hidden_dim: hidden,
            dropout,
            ..ArchConfig::default()
        }
    }

    #[test]
    fn single_layer_linear_gcn_returns_a_hat_x() {
        let g = random_graph(6, 3, 3, 1);
        let cfg = ArchConfig {
            kind: ArchKind::Gcn,
            layers: 1,
            hidden_dim: 3,
            dropout: 0.0,
            input_mlp: false,
            output_mlp: false,
            ..ArchConfig::default()
        };
        let mut m = MpnnModel::new(&cfg, 3, 3, 0).unwrap();
        let w = m.params.index_of("layer1.weight").unwrap();
        m.params.get_mut(w).value = Matrix::identity(3);
        let stack = m.forward(&g, false, 0).unwrap();
        let expect = normalized_adjacency(&g).spmm(g.features()).unwrap();
        assert_eq!(stack.logits.shape(), (6, 3));
        for (a, b) in stack.logits.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn res_gcn_with_identity_adjacency_is_residual_mlp() {
        // With no edges Â = I, so each layer is LN → MLP → residual add.
        let g = Graph::new(
            2,
            [],
            Matrix::from_fn(5, 3, |i, j| (i as f64) * 0.3 - j as f64),
            vec![0, 1, 0, 1, 0],
            FeatureKind::Continuous,
        )
        .unwrap();
        let m = MpnnModel::new(&arch(ArchKind::ResGcn, 4, 0.0), 3, 2, 3).unwrap();
        let stack = m.forward(&g, false, 0).unwrap();
        let val = |n: &str| m.params.get(m.params.index_of(n).unwrap()).value.clone();
        let mut h = relu(&linear(g.features(), &val("input.weight"), Some(&val("input.bias"))).unwrap());
        for l in 1..=2 {
            let (nrm, _) = layer_norm(&h, &val(&format!("layer{l}.norm.gain")), &val(&format!("layer{l}.norm.shift")), 1e-5)
                .unwrap();
            let a = relu(&linear(&nrm, &val(&format!("layer{l}.combine1.weight")), Some(&val(&format!("layer{l}.combine1.bias")))).unwrap());
            let b = linear(&a, &val(&format!("layer{l}.combine2.weight")), Some(&val(&format!("layer{l}.combine2.bias")))).unwrap();
            h.add_assign(&b).unwrap();
            assert_eq!(stack.hidden[l], h);
        }
    }

    #[test]
    fn eval_forward_is_deterministic_and_row_stochastic() {
        let g = random_graph(10, 4, 3, 2);
        for kind in [ArchKind::Gcn, ArchKind::ResGcn] {
            let m = MpnnModel::new(&arch(kind, 8, 0.5), 4, 3, 7).unwrap();
            let a = m.forward(&g, false, 1).unwrap();
            let b = m.forward(&g, false, 2).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.hidden.len(), 3);
            assert_eq!(&a.hidden[0], g.features());
            for r in a.probs.row_iter() {
                assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let t = m.forward(&g, true, 1).unwrap();
            assert_ne!(a.logits, t.logits);
        }
    }

    #[test]
    fn zero_residual_branches_leave_input_projection() {
        let g = random_graph(8, 4, 2, 5);
        let mut m = MpnnModel::new(&arch(ArchKind::ResGcn, 6, 0.0), 4, 2, 1).unwrap();
        for l in 1..=2 {
            for n in ["weight", "bias"] {
                let i = m.params.index_of(&format!("layer{l}.combine2.{n}")).unwrap();
                m.params.get_mut(i).value.fill(0.0);
            }
        }
        let stack = m.forward(&g, false, 0).unwrap();
        let val = |n: &str| m.params.get(m.params.index_of(n).unwrap()).value.clone();
        let h0 = relu(&linear(g.features(), &val("input.weight"), Some(&val("input.bias"))).unwrap());
        assert_eq!(stack.hidden[1], h0);
        assert_eq!(stack.hidden[2], h0);
        let (nrm, _) = layer_norm(&h0, &val("final.norm.gain"), &val("final.norm.shift"), 1e-5).unwrap();
        let logits = linear(&nrm, &val("output.weight"), Some(&val("output.bias"))).unwrap();
        assert_eq!(stack.logits, logits);
    }

    #[test]
    fn wrong_feature_dimension_errors() {
        let g = random_graph(5, 4, 2, 0);
        let m = MpnnModel::new(&arch(ArchKind::Gcn, 4, 0.0), 3, 2, 0).unwrap();
        assert!(m.forward(&g, false, 0).is_err());
    }

    fn model_grad_error(kind: ArchKind, dropout: f64, seed: u64) -> f64 {
        let g = random_graph(12, 5, 3, seed);
        let adj = normalized_adjacency(&g);
        let mask: Vec<usize> = (0..12).step_by(2).collect();
        let m = MpnnModel::new(&arch(kind, 6, dropout), 5, 3, seed + 100).unwrap();
        let arch = m.arch.clone();
        let mut params = m.params.clone();
        let report = grad_check(
            &mut params,
            |ps| {
                let mut rng = rng_from_seed(seed);
                let (stack, cache) = arch.forward(ps, &adj, g.features(), dropout > 0.0, &mut rng).unwrap();
                let (loss, dl) = softmax_cross_entropy(&stack.logits, g.labels(), &mask).unwrap();
                arch.backward(ps, &adj, g.features(), &cache, &dl).unwrap();
                loss
            },
            1e-5,
            None,
        );
        report.max_rel_err
    }

    #[test]
    fn whole_model_gradients_match_finite_differences() {
        for seed in 0..3 {
            for kind in [ArchKind::Gcn, ArchKind::ResGcn] {
                let e = model_grad_error(kind, 0.0, seed);
                assert!(e < 1e-4, "{kind:?} seed {seed}: {e}");
                let e = model_grad_error(kind, 0.3, seed);
                assert!(e < 1e-4, "{kind:?} with dropout, seed {seed}: {e}");
            }
        }
    }
}
