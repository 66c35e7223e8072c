//! Structural invariants of the LP fiber-mode solver.

use modalsim_core::fibermodes::{solve_lp_modes, Orientation};
use modalsim_core::profile::RadialFiberSpec;
use std::collections::BTreeMap;

#[test]
fn pmn_groups_are_near_degenerate_for_parabolic_core() {
    let spec = RadialFiberSpec::mmf_50_125();
    let set = solve_lp_modes(&spec, 0.85).unwrap();
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for m in &set.modes {
        groups.entry(m.pmn).or_default().push(m.n_eff);
    }
    assert!(groups.len() >= 15);
    for (pmn, neffs) in &groups {
        let max = neffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = neffs.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(
            max - min < 1e-4,
            "PMN {pmn}: spread {:.2e} over {} members",
            max - min,
            neffs.len()
        );
    }
}

#[test]
fn pmn_group_sizes_follow_the_oscillator_degeneracy() {
    // Group q holds q orientation-resolved members while fully guided.
    let spec = RadialFiberSpec::mmf_50_125();
    let set = solve_lp_modes(&spec, 0.85).unwrap();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for m in &set.modes {
        *counts.entry(m.pmn).or_default() += 1;
    }
    for (&pmn, &count) in counts.iter().take((set.max_pmn as usize).saturating_sub(2)) {
        assert_eq!(count as u32, pmn, "group {pmn} has {count} members");
    }
}

#[test]
fn deterministic_mode_ordering() {
    let spec = RadialFiberSpec::mmf_50_125();
    let a = solve_lp_modes(&spec, 0.85).unwrap();
    let b = solve_lp_modes(&spec, 0.85).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.modes.iter().zip(&b.modes) {
        assert_eq!((x.m, x.n, x.orientation), (y.m, y.n, y.orientation));
        assert_eq!(x.n_eff.to_bits(), y.n_eff.to_bits());
    }
    // Ascending PMN, then m, then cos before sin.
    for w in a.modes.windows(2) {
        let ka = (w[0].pmn, w[0].m, w[0].orientation == Orientation::Sin);
        let kb = (w[1].pmn, w[1].m, w[1].orientation == Orientation::Sin);
        assert!(ka <= kb, "ordering violated: {ka:?} then {kb:?}");
    }
}

#[test]
fn guided_indices_sit_between_cladding_and_core() {
    let spec = RadialFiberSpec::mmf_50_125();
    let set = solve_lp_modes(&spec, 0.85).unwrap();
    let n1 = spec.core_index();
    for m in &set.modes {
        assert!(m.n_eff > spec.n_clad && m.n_eff < n1);
    }
}
