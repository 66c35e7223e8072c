//! End-to-end behavior of the simulation pipeline on a compact synthetic
//! guide: scan symmetry, length scaling, determinism and the loss-model fit.

use modalsim_core::dispersion::{
    fit_loss_model, prepare_modes, scan_offsets, simulate_with_modes, LossModel, SimOptions,
};
use modalsim_core::launch::{LaunchKind, LaunchSpec};
use modalsim_core::modesolver::{SolverOptions, WaveguideModeSet};
use modalsim_core::profile::{synth_gi_profile, GiProfileSpec, IndexProfile};

fn mini_profile() -> IndexProfile {
    synth_gi_profile(&GiProfileSpec {
        core_width_um: 12.0,
        core_height_um: 12.0,
        delta_n: 0.01,
        peak_offset_um: (0.0, 3.0),
        step_um: 0.5,
        margin_um: 12.0,
        ..GiProfileSpec::default()
    })
    .unwrap()
}

fn sim_options() -> SimOptions {
    SimOptions {
        solver: SolverOptions { clipping_check: false, ..SolverOptions::default() },
        ..SimOptions::default()
    }
}

fn prepared() -> (IndexProfile, WaveguideModeSet) {
    let profile = mini_profile();
    let opts = sim_options();
    let modes = prepare_modes(&profile, 0.85, 60, &opts).unwrap();
    (profile, modes)
}

fn gaussian_launch() -> LaunchSpec {
    LaunchSpec { kind: LaunchKind::Gaussian { fwhm_um: 4.0 }, offset_um: (0.0, 0.0) }
}

#[test]
fn scan_is_mirror_symmetric() {
    let (_, modes) = prepared();
    let offsets: Vec<(f64, f64)> = (-8..=8).map(|k| (k as f64, 0.0)).collect();
    let rows = scan_offsets(
        &modes,
        &gaussian_launch(),
        &LossModel::unrestricted(),
        1.0,
        &offsets,
        &sim_options(),
    )
    .unwrap();
    let n = rows.len();
    for k in 0..n / 2 {
        let (a, b) = (&rows[k], &rows[n - 1 - k]);
        if a.f3db_ghz.is_finite() && b.f3db_ghz.is_finite() {
            let rel = (a.f3db_ghz - b.f3db_ghz).abs() / a.f3db_ghz;
            assert!(rel < 0.02, "f3dB({}) = {} vs f3dB({}) = {}",
                a.offset_um.0, a.f3db_ghz, b.offset_um.0, b.f3db_ghz);
        } else {
            assert_eq!(a.f3db_ghz.is_finite(), b.f3db_ghz.is_finite());
        }
        let dp = (a.coupled_power_db - b.coupled_power_db).abs();
        assert!(dp < 0.05, "power asymmetry {dp} dB at ±{}", a.offset_um.0);
    }
}

#[test]
fn blp_is_invariant_under_length_scaling() {
    let (_, modes) = prepared();
    let launch = gaussian_launch().with_offset((4.0, 0.0));
    let opts = sim_options();
    let loss = LossModel::unrestricted();
    // Lengths long enough that the bin width scales with the delay spread
    // (above the 0.01 ps floor), so h stretches linearly in time.
    let r1 = simulate_with_modes(&modes, &launch, &loss, 4.0, &opts).unwrap();
    let r2 = simulate_with_modes(&modes, &launch, &loss, 8.0, &opts).unwrap();
    let r5 = simulate_with_modes(&modes, &launch, &loss, 20.0, &opts).unwrap();
    assert!(r1.f3db_ghz.is_finite());
    for r in [&r2, &r5] {
        let rel = (r.blp_ghz_m - r1.blp_ghz_m).abs() / r1.blp_ghz_m;
        assert!(rel < 1e-9, "BLP drifted: {} vs {}", r.blp_ghz_m, r1.blp_ghz_m);
    }
}

#[test]
fn energy_is_conserved_end_to_end() {
    let (_, modes) = prepared();
    let launch = gaussian_launch().with_offset((2.0, 1.0));
    let loss = LossModel::step(4);
    let resp = simulate_with_modes(&modes, &launch, &loss, 1.0, &sim_options()).unwrap();
    let mass: f64 = resp.h.iter().sum();
    assert!((mass - resp.surviving_power).abs() < 1e-9);
    assert!(resp.surviving_power <= resp.coupled_power + 1e-12);
    assert!((resp.spectrum[0].norm() - resp.surviving_power).abs() < 1e-9);
}

#[test]
fn repeated_simulation_is_bit_identical() {
    let (_, modes) = prepared();
    let launch = gaussian_launch().with_offset((3.0, -1.0));
    let opts = sim_options();
    let loss = LossModel::unrestricted();
    let a = simulate_with_modes(&modes, &launch, &loss, 1.0, &opts).unwrap();
    let b = simulate_with_modes(&modes, &launch, &loss, 1.0, &opts).unwrap();
    assert_eq!(a.f3db_ghz.to_bits(), b.f3db_ghz.to_bits());
    assert_eq!(a.h.len(), b.h.len());
    for (x, y) in a.h.iter().zip(&b.h) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    // Two independent mode solves must agree too.
    let profile = mini_profile();
    let modes2 = prepare_modes(&profile, 0.85, 60, &opts).unwrap();
    let c = simulate_with_modes(&modes2, &launch, &loss, 1.0, &opts).unwrap();
    assert_eq!(a.f3db_ghz.to_bits(), c.f3db_ghz.to_bits());
}

#[test]
fn single_mode_guide_has_unbounded_bandwidth() {
    let profile = synth_gi_profile(&GiProfileSpec {
        core_width_um: 3.0,
        core_height_um: 3.0,
        delta_n: 0.01,
        peak_offset_um: (0.0, 0.0),
        step_um: 0.25,
        margin_um: 12.0,
        ..GiProfileSpec::default()
    })
    .unwrap();
    let opts = sim_options();
    let modes = prepare_modes(&profile, 0.85, 10, &opts).unwrap();
    assert_eq!(modes.len(), 1, "expected a single-mode guide");
    let resp = simulate_with_modes(
        &modes,
        &gaussian_launch(),
        &LossModel::unrestricted(),
        1.0,
        &opts,
    )
    .unwrap();
    assert!(resp.f3db_ghz.is_infinite());
    assert!(resp.nyquist_limited);
}

#[test]
fn loss_fit_recovers_planted_cutoffs() {
    let (_, modes) = prepared();
    let n = modes.len();
    assert!(n >= 8, "need enough modes, got {n}");
    let launch = gaussian_launch();
    let offsets: Vec<(f64, f64)> = (-8..=8).map(|k| (k as f64, 0.0)).collect();
    let opts = sim_options();
    for planted in [3usize, n - 2] {
        let loss = LossModel::step(planted);
        let rows =
            scan_offsets(&modes, &launch, &loss, 1.0, &offsets, &opts).unwrap();
        let measured: Vec<((f64, f64), f64)> =
            rows.iter().map(|r| (r.offset_um, r.coupled_power_db)).collect();
        let (fit, rmse) = fit_loss_model(&measured, &modes, &launch, &offsets).unwrap();
        assert_eq!(fit.cutoff_index, planted, "rmse {rmse}");
        assert!(rmse < 1e-9, "round-trip rmse {rmse}");
    }
}

#[test]
fn loss_fit_validates_inputs() {
    let (_, modes) = prepared();
    let launch = gaussian_launch();
    let offsets: Vec<(f64, f64)> = (-6..=6).map(|k| (k as f64, 0.0)).collect();
    // Too few points.
    let few = vec![((0.0, 0.0), 0.0), ((1.0, 0.0), -0.5)];
    assert!(fit_loss_model(&few, &modes, &launch, &offsets).is_err());
    // Out-of-range offset.
    let out = vec![((0.0, 0.0), 0.0), ((1.0, 0.0), -0.5), ((9.5, 0.0), -3.0)];
    assert!(fit_loss_model(&out, &modes, &launch, &offsets).is_err());
}

#[test]
fn exact_rmse_tie_breaks_to_lowest_cutoff() {
    let (_, modes) = prepared();
    let launch = gaussian_launch();
    // Repeating one offset makes every cutoff reproduce the same normalized
    // point exactly, so all cutoffs tie at zero RMSE.
    let offsets = vec![(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)];
    let measured: Vec<((f64, f64), f64)> = offsets.iter().map(|&o| (o, 0.0)).collect();
    let (fit, rmse) = fit_loss_model(&measured, &modes, &launch, &offsets).unwrap();
    assert_eq!(fit.cutoff_index, 1);
    assert_eq!(rmse, 0.0);
}

#[test]
fn offset_efficiency_is_continuous() {
    // One-grid-step moves on the default 0.25 µm grid.
    let profile = synth_gi_profile(&GiProfileSpec {
        core_width_um: 12.0,
        core_height_um: 12.0,
        delta_n: 0.01,
        peak_offset_um: (0.0, 3.0),
        step_um: 0.25,
        margin_um: 12.0,
        ..GiProfileSpec::default()
    })
    .unwrap();
    let modes = prepare_modes(&profile, 0.85, 60, &sim_options()).unwrap();
    let offsets: Vec<(f64, f64)> = (0..=40).map(|k| (0.25 * k as f64, 0.0)).collect();
    let rows = scan_offsets(
        &modes,
        &gaussian_launch(),
        &LossModel::unrestricted(),
        1.0,
        &offsets,
        &sim_options(),
    )
    .unwrap();
    let peak = rows.iter().map(|r| r.received_power).fold(0.0f64, f64::max);
    for w in rows.windows(2) {
        let (a, b) = (w[0].received_power, w[1].received_power);
        assert!(
            (a - b).abs() < 0.05 * peak,
            "efficiency jump {} -> {} at {} µm",
            a,
            b,
            w[1].offset_um.0
        );
    }
}
