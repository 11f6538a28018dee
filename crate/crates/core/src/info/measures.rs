use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::model::{JointTable, Var};

/// A set of variables treated as one joint random variable.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VariableGroup(pub Vec<Var>);

impl VariableGroup {
    pub fn empty() -> Self {
        VariableGroup(Vec::new())
    }

    pub fn label() -> Self {
        VariableGroup(vec![Var::Label])
    }

    /// Shells `0..=last`.
    pub fn shells_upto(last: usize) -> Self {
        VariableGroup((0..=last).map(Var::Shell).collect())
    }

    pub fn of(vars: &[Var]) -> Self {
        VariableGroup(vars.to_vec())
    }

    pub fn union(&self, other: &VariableGroup) -> VariableGroup {
        let mut v = self.0.clone();
        v.extend(other.0.iter().copied().filter(|x| !self.0.contains(x)));
        VariableGroup(v)
    }
}

fn slots(joint: &JointTable, g: &VariableGroup) -> Result<Vec<usize>> {
    let mut s = g.0.iter().map(|&v| joint.slot(v)).collect::<Result<Vec<_>>>()?;
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// Plug-in entropy in nats of the marginal over `g`.
pub fn entropy(joint: &JointTable, g: &VariableGroup) -> Result<f64> {
    let s = slots(joint, g)?;
    if s.is_empty() {
        return Ok(0.0);
    }
    let mut marg: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (p, a) in &joint.entries {
        *marg.entry(s.iter().map(|&i| a[i]).collect()).or_insert(0.0) += p;
    }
    Ok(-marg.values().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>())
}

fn check_disjoint(joint: &JointTable, a: &VariableGroup, b: &VariableGroup) -> Result<()> {
    let sa = slots(joint, a)?;
    if slots(joint, b)?.iter().any(|x| sa.contains(x)) {
        return Err(Error::OverlappingGroups);
    }
    Ok(())
}

/// `I(A; B)` in nats.
pub fn mi(joint: &JointTable, a: &VariableGroup, b: &VariableGroup) -> Result<f64> {
    cmi(joint, a, b, &VariableGroup::empty())
}

/// `I(A; B | C)` in nats. `A` and `B` must be disjoint; either may share
/// variables with `C`.
pub fn cmi(joint: &JointTable, a: &VariableGroup, b: &VariableGroup, c: &VariableGroup) -> Result<f64> {
    check_disjoint(joint, a, b)?;
    if a.0.is_empty() || b.0.is_empty() {
        return Ok(0.0);
    }
    let ac = a.union(c);
    let bc = b.union(c);
    Ok(entropy(joint, &ac)? + entropy(joint, &bc)? - entropy(joint, &ac.union(b))? - entropy(joint, c)?)
}
