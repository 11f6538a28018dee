//! Exact information-theoretic bookkeeping for message passing.
//!
//! A [`FiniteGenerativeModel`] fixes a joint distribution over a node label
//! `Y` and its ego-graph shells `S_0..S_K`, plus deterministic layer maps in
//! which shell `k` after layer `i` reads shells `k−1, k, k+1` after layer
//! `i−1`. The anchor representation after `i` layers is `T_i = H^(i)_0`.
//! Every quantity is computed by enumerating the pushed-forward joint.

mod measures;
mod model;
mod theory;

pub use measures::{cmi, entropy, mi, VariableGroup};
pub use model::{push_forward, random_model, FiniteGenerativeModel, JointTable, LayerMap, Var, STATE_LIMIT};
pub use theory::{
    check_model, dpe_terms, gain_bound_check, info_homophily, verify_theory, CheckLine, DpeTerms, GainBound,
    TheoryReport, BOUND_TOL, CHAIN_TOL, RESIDUAL_TOL,
};

#[cfg(test)]
mod tests;
