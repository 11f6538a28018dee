use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

use super::measures::{cmi, mi, VariableGroup};
use super::model::{push_forward, random_model, FiniteGenerativeModel, JointTable, Var};

/// Label-information bookkeeping for one layer transition `i → i+1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpeTerms {
    pub i: usize,
    /// `I(Y; T_i)`
    pub mi_current: f64,
    /// `I(Y; T_{i+1})`
    pub mi_next: f64,
    /// `L_i = I(Y; S_{0:i} | T_{i+1}) − I(Y; S_{0:i} | T_i)`
    pub relative_info: f64,
    /// `G_{i+1} = I(Y; S_{i+1} | S_{0:i}) − I(Y; S_{i+1} | S_{0:i}, T_{i+1})`
    pub gain: f64,
    /// `I(Y; T_{i+1}) − I(Y; T_i) + L_i − G_{i+1}`
    pub residual: f64,
    /// `I(Y; S_{0:i})`
    pub mi_ego: f64,
    /// `I(Y; T_{i+1} | S_{0:i})`
    pub gain_alt: f64,
}

/// The anchor representation after `i` layers; `T_0 = S_0`.
fn anchor(i: usize) -> VariableGroup {
    if i == 0 {
        VariableGroup::of(&[Var::Shell(0)])
    } else {
        VariableGroup::of(&[Var::Hidden { layer: i, shell: 0 }])
    }
}

fn ego(joint: &JointTable, i: usize) -> VariableGroup {
    VariableGroup::shells_upto(i.min(joint.num_shells - 1))
}

/// `S_{i+1}`, empty beyond the outermost shell.
fn next_shell(joint: &JointTable, i: usize) -> VariableGroup {
    if i + 1 < joint.num_shells {
        VariableGroup::of(&[Var::Shell(i + 1)])
    } else {
        VariableGroup::empty()
    }
}

pub fn dpe_terms(joint: &JointTable, i: usize) -> Result<DpeTerms> {
    if i >= joint.num_layers {
        return Err(Error::InvalidArgument(format!("layer {i} needs i < L = {}", joint.num_layers)));
    }
    let y = VariableGroup::label();
    let (t0, t1) = (anchor(i), anchor(i + 1));
    let s = ego(joint, i);
    let sn = next_shell(joint, i);
    let mi_current = mi(joint, &y, &t0)?;
    let mi_next = mi(joint, &y, &t1)?;
    let relative_info = cmi(joint, &y, &s, &t1)? - cmi(joint, &y, &s, &t0)?;
    let gain = cmi(joint, &y, &sn, &s)? - cmi(joint, &y, &sn, &s.union(&t1))?;
    Ok(DpeTerms {
        i,
        mi_current,
        mi_next,
        relative_info,
        gain,
        residual: mi_next - mi_current + relative_info - gain,
        mi_ego: mi(joint, &y, &s)?,
        gain_alt: cmi(joint, &y, &t1, &s)?,
    })
}

/// `h_{i+1} = I(S_{i+1}; S_{0:i}) − I(S_{i+1}; S_{0:i} | Y)`.
pub fn info_homophily(joint: &JointTable, i: usize) -> Result<f64> {
    if i + 1 >= joint.num_shells {
        return Err(Error::InvalidArgument(format!("shell {} beyond K = {}", i + 1, joint.num_shells - 1)));
    }
    let sn = next_shell(joint, i);
    let s = ego(joint, i);
    Ok(mi(joint, &sn, &s)? - cmi(joint, &sn, &s, &VariableGroup::label())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainBound {
    pub gain: f64,
    /// `I(Y; S_{i+1}) − h_{i+1}`
    pub bound: f64,
    /// `I(Y; S_{i+1} | S_{0:i})`, equal to `bound`.
    pub conditional: f64,
}

pub fn gain_bound_check(joint: &JointTable, i: usize) -> Result<GainBound> {
    let h = info_homophily(joint, i)?;
    let y = VariableGroup::label();
    let sn = next_shell(joint, i);
    Ok(GainBound {
        gain: dpe_terms(joint, i)?.gain,
        bound: mi(joint, &y, &sn)? - h,
        conditional: cmi(joint, &y, &sn, &ego(joint, i))?,
    })
}

/// Worst deviations over a verification campaign. Violations are positive
/// amounts by which an inequality fails (0 when it holds).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TheoryReport {
    pub models: usize,
    pub transitions: usize,
    pub bound_checks: usize,
    pub max_residual: f64,
    pub max_chain_rule_error: f64,
    pub max_negative_mi: f64,
    pub max_relative_info_violation: f64,
    pub max_negative_gain: f64,
    pub max_gain_identity_error: f64,
    pub max_gain_bound_violation: f64,
    pub max_bound_identity_error: f64,
    pub max_dpi_violation: f64,
}

pub const RESIDUAL_TOL: f64 = 1e-9;
pub const BOUND_TOL: f64 = 1e-9;
pub const CHAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl TheoryReport {
    pub fn lines(&self) -> Vec<CheckLine> {
        let line = |name, worst: f64, tolerance| CheckLine {
            name,
            worst,
            tolerance,
            passed: worst < tolerance,
        };
        vec![
            line("data processing equality residual", self.max_residual, RESIDUAL_TOL),
            line("chain rule", self.max_chain_rule_error, CHAIN_TOL),
            line("mutual information non-negative", self.max_negative_mi, CHAIN_TOL),
            line("relative information bound", self.max_relative_info_violation, BOUND_TOL),
            line("gain non-negative", self.max_negative_gain, BOUND_TOL),
            line("gain equals I(Y;T_i+1|S_0:i)", self.max_gain_identity_error, BOUND_TOL),
            line("gain bounded by I(Y;S_i+1) - h_i+1", self.max_gain_bound_violation, BOUND_TOL),
            line("I(Y;S_i+1|S_0:i) = I(Y;S_i+1) - h_i+1", self.max_bound_identity_error, BOUND_TOL),
            line("data processing inequality", self.max_dpi_violation, BOUND_TOL),
        ]
    }

    pub fn passed(&self) -> bool {
        self.lines().iter().all(|l| l.passed)
    }

    fn merge(&mut self, o: &TheoryReport) {
        self.models += o.models;
        self.transitions += o.transitions;
        self.bound_checks += o.bound_checks;
        macro_rules! worst {
            ($($f:ident),*) => { $( self.$f = self.$f.max(o.$f); )* };
        }
        worst!(
            max_residual,
            max_chain_rule_error,
            max_negative_mi,
            max_relative_info_violation,
            max_negative_gain,
            max_gain_identity_error,
            max_gain_bound_violation,
            max_bound_identity_error,
            max_dpi_violation
        );
    }
}

/// Runs every check on one model. `seed` picks the variable triples used
/// for the chain-rule check.
pub fn check_model(model: &FiniteGenerativeModel, seed: u64) -> Result<TheoryReport> {
    let joint = push_forward(model);
    let mut r = TheoryReport {
        models: 1,
        ..TheoryReport::default()
    };
    let y = VariableGroup::label();
    for i in 0..joint.num_layers {
        let t = dpe_terms(&joint, i)?;
        r.transitions += 1;
        r.max_residual = r.max_residual.max(t.residual.abs());
        r.max_relative_info_violation = r.max_relative_info_violation.max(-t.relative_info - t.mi_ego);
        r.max_negative_gain = r.max_negative_gain.max(-t.gain);
        r.max_gain_identity_error = r.max_gain_identity_error.max((t.gain - t.gain_alt).abs());
        r.max_negative_mi = r.max_negative_mi.max(-t.mi_current).max(-t.mi_next).max(-t.gain_alt);
        // Y → S_{0:i} → T_i
        r.max_dpi_violation = r.max_dpi_violation.max(t.mi_current - t.mi_ego);
        if i + 1 < joint.num_shells {
            let b = gain_bound_check(&joint, i)?;
            r.bound_checks += 1;
            r.max_gain_bound_violation = r.max_gain_bound_violation.max(b.gain - b.bound);
            r.max_bound_identity_error = r.max_bound_identity_error.max((b.bound - b.conditional).abs());
        }
    }

    let mut vars = vec![Var::Label];
    vars.extend((0..joint.num_shells).map(Var::Shell));
    for l in 1..=joint.num_layers {
        vars.extend((0..joint.num_shells).map(|k| Var::Hidden { layer: l, shell: k }));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..4 {
        let mut pick = || vars[rng.random_range(0..vars.len())];
        let a = VariableGroup::of(&[pick()]);
        let b = VariableGroup::of(&[pick(), pick()]);
        let c = VariableGroup::of(&[pick()]);
        let b = VariableGroup(b.0.into_iter().filter(|v| !a.0.contains(v)).collect());
        let c = VariableGroup(c.0.into_iter().filter(|v| !a.0.contains(v) && !b.0.contains(v)).collect());
        let whole = mi(&joint, &a, &b.union(&c))?;
        let parts = mi(&joint, &a, &b)? + cmi(&joint, &a, &c, &b)?;
        r.max_chain_rule_error = r.max_chain_rule_error.max((whole - parts).abs());
        r.max_negative_mi = r.max_negative_mi.max(-cmi(&joint, &a, &c, &b)?).max(-mi(&joint, &a, &b)?);
    }
    let yc = mi(&joint, &y, &VariableGroup::shells_upto(joint.num_shells - 1))?;
    r.max_negative_mi = r.max_negative_mi.max(-yc);
    Ok(r)
}

/// Checks `models` random models with `c ∈ {2,3}`, `K ∈ {1,2}`, `L ∈ {1,2,3}`
/// and alphabets of at most 3 symbols.
pub fn verify_theory(models: usize, seed: u64) -> Result<TheoryReport> {
    let reports = (0..models as u64)
        .into_par_iter()
        .map(|m| {
            let s = derive_seed(seed, &[m]);
            let mut rng = rng_from_seed(s);
            let c = rng.random_range(2..=3);
            let k = rng.random_range(1..=2);
            let l = rng.random_range(1..=3);
            let model = random_model(c, k, l, 3, derive_seed(s, &[0]))?;
            check_model(&model, derive_seed(s, &[1])).map_err(|e| e.context(format!("model {m}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = TheoryReport::default();
    for r in &reports {
        total.merge(r);
    }
    Ok(total)
}
