use proptest::prelude::*;

use super::*;
use crate::error::Error;

fn uniform(states: usize) -> Vec<f64> {
    vec![1.0 / states as f64; states]
}

/// Two labels, two binary shells, given joint, `layers` layers of `f`.
fn small(joint: Vec<f64>, layers: usize, f: impl Fn(usize, usize, [Option<u32>; 3]) -> u32) -> JointTable {
    let m = FiniteGenerativeModel::from_fn(2, vec![2, 2], joint, layers, |_, _| 2, f).unwrap();
    push_forward(&m)
}

fn y() -> VariableGroup {
    VariableGroup::label()
}

fn s(k: usize) -> VariableGroup {
    VariableGroup::of(&[Var::Shell(k)])
}

fn h(layer: usize, shell: usize) -> VariableGroup {
    VariableGroup::of(&[Var::Hidden { layer, shell }])
}

/// p(y, s0, s1) with y = s0 and s1 an independent fair bit.
fn label_copy() -> Vec<f64> {
    let mut p = vec![0.0; 8];
    for y in 0..2 {
        for s1 in 0..2 {
            p[y * 4 + y * 2 + s1] = 0.25;
        }
    }
    p
}

#[test]
fn independent_fair_bits_share_nothing() {
    let j = small(uniform(8), 1, |_, _, n| n[1].unwrap());
    assert!(mi(&j, &y(), &s(0)).unwrap().abs() < 1e-15);
    assert!(mi(&j, &s(0), &s(1)).unwrap().abs() < 1e-15);
}

#[test]
fn label_copy_carries_ln2() {
    let j = small(label_copy(), 1, |_, _, n| n[1].unwrap());
    assert!((mi(&j, &y(), &s(0)).unwrap() - 2f64.ln()).abs() < 1e-15);
    assert!((mi(&j, &s(0), &y()).unwrap() - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn identity_maps_copy_shell_marginals() {
    let m = random_model(3, 2, 3, 3, 11).unwrap();
    let ident = FiniteGenerativeModel::from_fn(
        m.num_labels,
        m.shell_sizes.clone(),
        m.joint.clone(),
        3,
        |_, k| m.shell_sizes[k],
        |_, _, n| n[1].unwrap(),
    )
    .unwrap();
    let j = push_forward(&ident);
    for l in 1..=3 {
        for k in 0..3 {
            let a = entropy(&j, &h(l, k)).unwrap();
            let b = entropy(&j, &s(k)).unwrap();
            assert!((a - b).abs() < 1e-14);
            assert!((mi(&j, &y(), &h(l, k)).unwrap() - mi(&j, &y(), &s(k)).unwrap()).abs() < 1e-14);
        }
    }
}

#[test]
fn constant_maps_carry_no_information() {
    let j = small(label_copy(), 2, |_, _, _| 0);
    for l in 1..=2 {
        assert_eq!(mi(&j, &y(), &h(l, 0)).unwrap(), 0.0);
        assert_eq!(entropy(&j, &h(l, 1)).unwrap(), 0.0);
    }
    // The identity survives a layer that destroys everything.
    let t = dpe_terms(&j, 0).unwrap();
    assert_eq!(t.mi_next, 0.0);
    assert!(t.residual.abs() < 1e-12);
}

#[test]
fn mass_is_preserved() {
    for seed in 0..20 {
        let m = random_model(3, 2, 3, 3, seed).unwrap();
        assert!((m.joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((push_forward(&m).mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn random_models_are_deterministic_and_bounded() {
    assert_eq!(random_model(2, 2, 2, 3, 5).unwrap(), random_model(2, 2, 2, 3, 5).unwrap());
    assert_ne!(random_model(2, 2, 2, 3, 5).unwrap(), random_model(2, 2, 2, 3, 6).unwrap());
    let m = random_model(2, 2, 2, 2, 1).unwrap();
    assert_eq!(m.shell_sizes, vec![2, 2, 2]);
    assert_eq!(m.joint.len(), 8 * 2);
    let j = push_forward(&m);
    assert!(j.sizes.iter().all(|&a| a <= 2));
    // Seven variables of at most two symbols each.
    assert_eq!(j.sizes.len(), 1 + 3 * 3);
    assert!(j.entries.len() <= 1 << 7);
    assert!(matches!(random_model(3, 20, 1, 3, 0), Err(Error::StateSpaceOverflow { .. })));
}

#[test]
fn overlapping_groups_are_rejected() {
    let j = small(uniform(8), 1, |_, _, n| n[1].unwrap());
    assert!(matches!(mi(&j, &s(0), &s(0)), Err(Error::OverlappingGroups)));
    assert!(cmi(&j, &y(), &s(0), &s(0)).unwrap().abs() < 1e-15);
}

#[test]
fn independent_outer_shell_has_zero_homophily() {
    // S_1 is independent of (Y, S_0).
    let j = small(uniform(8), 1, |_, _, n| n[1].unwrap());
    assert!(info_homophily(&j, 0).unwrap().abs() < 1e-15);
    let mut p = vec![0.0; 8];
    for yy in 0..2 {
        for s0 in 0..2 {
            for s1 in 0..2 {
                p[yy * 4 + s0 * 2 + s1] = [0.1, 0.4][yy] * [0.3, 0.7][s0] * 0.5 + 0.0;
            }
        }
    }
    let total: f64 = p.iter().sum();
    let p: Vec<f64> = p.into_iter().map(|x| x / total).collect();
    let j = small(p, 1, |_, _, n| n[1].unwrap());
    assert!(info_homophily(&j, 0).unwrap().abs() < 1e-14);
}

#[test]
fn maximal_overlap_forces_zero_gain() {
    // S_1 = S_0 = Y.
    let mut p = vec![0.0; 8];
    p[0] = 0.5;
    p[7] = 0.5;
    let j = small(p, 1, |_, _, n| n[0].or(n[1]).unwrap() ^ n[2].unwrap_or(0));
    let b = gain_bound_check(&j, 0).unwrap();
    assert!(b.bound.abs() < 1e-15);
    assert!(b.gain.abs() < 1e-15);
}

#[test]
fn homophily_needs_an_outer_shell() {
    let j = small(uniform(8), 2, |_, _, n| n[1].unwrap());
    assert!(info_homophily(&j, 1).is_err());
    assert!(dpe_terms(&j, 2).is_err());
    // Beyond the outer shell the gain vanishes.
    assert_eq!(dpe_terms(&j, 1).unwrap().gain, 0.0);
}

#[test]
fn small_campaign_passes() {
    let r = verify_theory(25, 3).unwrap();
    assert_eq!(r.models, 25);
    assert!(r.passed(), "{:#?}", r.lines());
    assert_eq!(verify_theory(25, 3).unwrap(), r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mi_symmetric_nonnegative_and_chain_rule(seed in 0u64..100_000) {
        let m = random_model(3, 2, 2, 3, seed).unwrap();
        let j = push_forward(&m);
        let (a, b, c) = (y(), s(1), h(2, 0));
        let ab = mi(&j, &a, &b).unwrap();
        prop_assert!((ab - mi(&j, &b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab >= -1e-12);
        let cond = cmi(&j, &a, &c, &b).unwrap();
        prop_assert!(cond >= -1e-12);
        let whole = mi(&j, &a, &b.union(&c)).unwrap();
        prop_assert!((whole - ab - cond).abs() < 1e-12);
    }

    #[test]
    fn every_model_satisfies_the_theory(seed in 0u64..100_000) {
        let m = random_model(2 + (seed % 2) as usize, 1 + (seed % 3 == 0) as usize, 1 + (seed % 3) as usize, 3, seed).unwrap();
        let r = check_model(&m, seed).unwrap();
        prop_assert!(r.passed(), "{:?}", r.lines());
    }
}
