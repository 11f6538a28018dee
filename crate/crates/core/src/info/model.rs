use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Upper bound on the number of base states `c · Π a_k`.
pub const STATE_LIMIT: u128 = 1_000_000;

/// Deterministic map from the previous-layer states of the shells it reads
/// to one hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMap {
    /// Shells read, in order `k−1, k, k+1` with boundary shells omitted.
    pub inputs: Vec<usize>,
    pub in_sizes: Vec<usize>,
    pub out_size: usize,
    /// Output state per mixed-radix input index (first input most significant).
    pub table: Vec<u32>,
}

impl LayerMap {
    pub fn apply(&self, prev: &[u32]) -> u32 {
        let mut idx = 0usize;
        for (&s, &size) in self.inputs.iter().zip(&self.in_sizes) {
            idx = idx * size + prev[s] as usize;
        }
        self.table[idx]
    }
}

/// Inputs of shell `k` out of `0..=k_max`.
fn lattice_inputs(k: usize, k_max: usize) -> Vec<usize> {
    (k.saturating_sub(1)..=(k + 1).min(k_max)).collect()
}

/// Joint table over the label and ego-graph shells plus layer maps that
/// update every shell's representation from its own and adjacent shells.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGenerativeModel {
    pub num_labels: usize,
    /// Alphabet sizes `a_0..a_K`.
    pub shell_sizes: Vec<usize>,
    /// Dense `p(Y, S_0..S_K)`, label most significant.
    pub joint: Vec<f64>,
    /// `layers[i − 1][k]` computes `H^(i)_k`.
    pub layers: Vec<Vec<LayerMap>>,
}

fn base_states(num_labels: usize, shell_sizes: &[usize]) -> Result<usize> {
    let states = shell_sizes
        .iter()
        .try_fold(num_labels as u128, |acc, &a| acc.checked_mul(a as u128))
        .unwrap_or(u128::MAX);
    if states > STATE_LIMIT {
        return Err(Error::StateSpaceOverflow {
            states,
            limit: STATE_LIMIT,
        });
    }
    Ok(states as usize)
}

impl FiniteGenerativeModel {
    /// Builds a model whose layer maps are given by `f(i, k, [left, own, right])`
    /// with values in `0..out_size(i, k)`. Missing neighbours are `None`.
    pub fn from_fn(
        num_labels: usize,
        shell_sizes: Vec<usize>,
        joint: Vec<f64>,
        num_layers: usize,
        out_size: impl Fn(usize, usize) -> usize,
        f: impl Fn(usize, usize, [Option<u32>; 3]) -> u32,
    ) -> Result<Self> {
        let k_max = shell_sizes.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("no shells".into()))?;
        let mut prev_sizes = shell_sizes.clone();
        let mut layers = Vec::with_capacity(num_layers);
        for i in 1..=num_layers {
            let mut maps = Vec::with_capacity(k_max + 1);
            for k in 0..=k_max {
                let inputs = lattice_inputs(k, k_max);
                let in_sizes: Vec<usize> = inputs.iter().map(|&s| prev_sizes[s]).collect();
                let domain: usize = in_sizes.iter().product();
                let out = out_size(i, k);
                let mut table = Vec::with_capacity(domain);
                for mut idx in 0..domain {
                    let mut vals = vec![0u32; inputs.len()];
                    for j in (0..inputs.len()).rev() {
                        vals[j] = (idx % in_sizes[j]) as u32;
                        idx /= in_sizes[j];
                    }
                    let mut nb = [None; 3];
                    for (&s, &v) in inputs.iter().zip(&vals) {
                        nb[s + 1 - k] = Some(v);
                    }
                    table.push(f(i, k, nb));
                }
                maps.push(LayerMap {
                    inputs,
                    in_sizes,
                    out_size: out,
                    table,
                });
            }
            prev_sizes = maps.iter().map(|m| m.out_size).collect();
            layers.push(maps);
        }
        let m = FiniteGenerativeModel {
            num_labels,
            shell_sizes,
            joint,
            layers,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn num_shells(&self) -> usize {
        self.shell_sizes.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Largest shell index `K`.
    pub fn k_max(&self) -> usize {
        self.shell_sizes.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_labels == 0 || self.shell_sizes.is_empty() || self.shell_sizes.contains(&0) {
            return Err(Error::InvalidArgument("alphabets must be nonempty".into()));
        }
        let states = base_states(self.num_labels, &self.shell_sizes)?;
        if self.joint.len() != states {
            return Err(Error::shape("generative_model", format!("{} entries for {states} states", self.joint.len())));
        }
        if self.joint.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite probability".into()));
        }
        let mass: f64 = self.joint.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("joint sums to {mass}")));
        }
        let mut prev = self.shell_sizes.clone();
        for (i, maps) in self.layers.iter().enumerate() {
            if maps.len() != self.num_shells() {
                return Err(Error::shape("layer_maps", format!("layer {} has {} maps", i + 1, maps.len())));
            }
            for (k, m) in maps.iter().enumerate() {
                let want: Vec<usize> = lattice_inputs(k, self.k_max());
                let sizes: Vec<usize> = want.iter().map(|&s| prev[s]).collect();
                let domain: usize = sizes.iter().product();
                if m.inputs != want || m.in_sizes != sizes || m.table.len() != domain {
                    return Err(Error::shape("layer_maps", format!("map ({}, {k}) has the wrong domain", i + 1)));
                }
                if m.table.iter().any(|&v| v as usize >= m.out_size) {
                    return Err(Error::InvalidArgument(format!("map ({}, {k}) leaves its codomain", i + 1)));
                }
            }
            prev = maps.iter().map(|m| m.out_size).collect();
        }
        Ok(())
    }
}

/// Random model with label alphabet `c`, shells `0..=k_max` with alphabets
/// drawn from `2..=max_alphabet`, a strictly positive normalised joint and
/// `num_layers` layers of uniformly random maps. Hidden alphabets are the
/// images of the drawn maps, so they never exceed `max_alphabet`.
pub fn random_model(c: usize, k_max: usize, num_layers: usize, max_alphabet: usize, seed: u64) -> Result<FiniteGenerativeModel> {
    if c == 0 || max_alphabet == 0 {
        return Err(Error::InvalidArgument("alphabets must be nonempty".into()));
    }
    let mut rng = rng_from_seed(seed);
    let shell_sizes: Vec<usize> = (0..=k_max)
        .map(|_| if max_alphabet >= 2 { rng.random_range(2..=max_alphabet) } else { 1 })
        .collect();
    let states = base_states(c, &shell_sizes)?;
    let raw: Vec<f64> = (0..states).map(|_| 1.0 - rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let joint = raw.into_iter().map(|p| p / total).collect();

    let mut prev_sizes = shell_sizes.clone();
    let mut layers = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let mut maps = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let inputs = lattice_inputs(k, k_max);
            let in_sizes: Vec<usize> = inputs.iter().map(|&s| prev_sizes[s]).collect();
            let domain: usize = in_sizes.iter().product();
            let raw: Vec<u32> = (0..domain).map(|_| rng.random_range(0..max_alphabet as u32)).collect();
            // Relabel the image densely in order of first appearance.
            let mut code = vec![u32::MAX; max_alphabet];
            let mut next = 0u32;
            let table = raw
                .into_iter()
                .map(|v| {
                    if code[v as usize] == u32::MAX {
                        code[v as usize] = next;
                        next += 1;
                    }
                    code[v as usize]
                })
                .collect();
            maps.push(LayerMap {
                inputs,
                in_sizes,
                out_size: next as usize,
                table,
            });
        }
        prev_sizes = maps.iter().map(|m| m.out_size).collect();
        layers.push(maps);
    }
    let m = FiniteGenerativeModel {
        num_labels: c,
        shell_sizes,
        joint,
        layers,
    };
    m.validate()?;
    Ok(m)
}

/// Position of a variable in a [`JointTable`] assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Label,
    Shell(usize),
    /// `H^(layer)_shell`; layer 0 is the shell itself.
    Hidden { layer: usize, shell: usize },
}

/// Support of the pushed-forward joint over `(Y, S_*, H^(1..L)_*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub num_shells: usize,
    pub num_layers: usize,
    /// Alphabet size per variable slot.
    pub sizes: Vec<usize>,
    /// `(probability, assignment)` for every base state with positive mass.
    pub entries: Vec<(f64, Vec<u32>)>,
}

impl JointTable {
    pub fn slot(&self, v: Var) -> Result<usize> {
        let (layer, shell) = match v {
            Var::Label => return Ok(0),
            Var::Shell(k) => (0, k),
            Var::Hidden { layer, shell } => (layer, shell),
        };
        if shell >= self.num_shells || layer > self.num_layers {
            return Err(Error::InvalidArgument(format!("{v:?} not in the model")));
        }
        Ok(1 + layer * self.num_shells + shell)
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|e| e.0).sum()
    }
}

/// Extends the base joint to every hidden variable.
pub fn push_forward(model: &FiniteGenerativeModel) -> JointTable {
    let ns = model.num_shells();
    let nl = model.num_layers();
    let mut sizes = vec![model.num_labels];
    sizes.extend(&model.shell_sizes);
    for maps in &model.layers {
        sizes.extend(maps.iter().map(|m| m.out_size));
    }
    let mut entries = Vec::new();
    for (mut idx, &p) in model.joint.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut a = vec![0u32; 1 + (nl + 1) * ns];
        for k in (0..ns).rev() {
            a[1 + k] = (idx % model.shell_sizes[k]) as u32;
            idx /= model.shell_sizes[k];
        }
        a[0] = idx as u32;
        for (i, maps) in model.layers.iter().enumerate() {
            let (done, rest) = a.split_at_mut(1 + (i + 1) * ns);
            let prev = &done[1 + i * ns..];
            for (k, m) in maps.iter().enumerate() {
                rest[k] = m.apply(prev);
            }
        }
        entries.push((p, a));
    }
    JointTable {
        num_shells: ns,
        num_layers: nl,
        sizes,
        entries,
    }
}
