//! Shared oracles for the solver integration tests: analytic slab modes,
//! discrete Dirichlet spectra and profile builders. Everything here is
//! independent of the solver code paths it checks.

use modalsim_core::grid::Grid;
use modalsim_core::profile::IndexProfile;
use ndarray::Array2;

/// Scalar modes of a symmetric slab (full width `width_um`, core `n1`,
/// cladding `n2`): effective indices from the transcendental equations
/// `s·tan s = √(V²−s²)` (even) and `−s·cot s = √(V²−s²)` (odd), s = u·a.
pub fn slab_neff(width_um: f64, n1: f64, n2: f64, wavelength_um: f64) -> Vec<f64> {
    let a = width_um / 2.0;
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let v = k0 * a * (n1 * n1 - n2 * n2).sqrt();
    let f = |s: f64, branch: usize| -> f64 {
        let w = (v * v - s * s).max(0.0).sqrt();
        if branch % 2 == 0 {
            s * s.tan() - w
        } else {
            -s / s.tan() - w
        }
    };
    let mut roots = Vec::new();
    let mut branch = 0usize;
    loop {
        let lo = branch as f64 * std::f64::consts::FRAC_PI_2 + 1e-12;
        let hi = ((branch + 1) as f64 * std::f64::consts::FRAC_PI_2 - 1e-12).min(v - 1e-14);
        if lo >= hi {
            break;
        }
        let (mut sa, mut sb) = (lo, hi);
        let (fa, fb) = (f(sa, branch), f(sb, branch));
        if fa.signum() != fb.signum() {
            let mut fa = fa;
            for _ in 0..200 {
                let sm = 0.5 * (sa + sb);
                let fm = f(sm, branch);
                if fm == 0.0 {
                    sa = sm;
                    sb = sm;
                    break;
                }
                if fa.signum() != fm.signum() {
                    sb = sm;
                } else {
                    sa = sm;
                    fa = fm;
                }
            }
            let s = 0.5 * (sa + sb);
            let u = s / a;
            let beta2 = k0 * k0 * n1 * n1 - u * u;
            roots.push(beta2.sqrt() / k0);
        }
        branch += 1;
        if lo >= v {
            break;
        }
    }
    roots.sort_by(|x, y| y.partial_cmp(x).unwrap());
    roots
}

/// dβ/dk0 of one slab mode (analytic solution differentiated numerically to
/// its root-finding precision).
pub fn slab_group_index(
    width_um: f64,
    n1: f64,
    n2: f64,
    wavelength_um: f64,
    mode: usize,
) -> f64 {
    let dk_rel = 1e-6;
    let lam_p = wavelength_um / (1.0 + dk_rel);
    let lam_m = wavelength_um / (1.0 - dk_rel);
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let bp = slab_neff(width_um, n1, n2, lam_p)[mode] * k0 * (1.0 + dk_rel);
    let bm = slab_neff(width_um, n1, n2, lam_m)[mode] * k0 * (1.0 - dk_rel);
    (bp - bm) / (2.0 * k0 * dk_rel)
}

/// Eigenvalue of the 1D discrete Dirichlet Laplacian for envelope order q
/// (q = 1, 2, ...) on `n_interior` points with step `h`.
pub fn discrete_sine_eigenvalue(q: usize, n_interior: usize, h: f64) -> f64 {
    let theta = q as f64 * std::f64::consts::PI / (n_interior + 1) as f64;
    (2.0 - 2.0 * theta.cos()) / (h * h)
}

/// Profile extruded along y from a slab in x. Each sample carries the cell
/// average of n² so the discrete interface sits second-order accurately.
pub fn extruded_slab_profile(
    core_width_um: f64,
    n1: f64,
    n2: f64,
    x_margin_um: f64,
    y_half_um: f64,
    step_um: f64,
) -> IndexProfile {
    let grid = Grid::centered(core_width_um / 2.0 + x_margin_um, y_half_um, step_um).unwrap();
    let a = core_width_um / 2.0;
    let values = Array2::from_shape_fn((grid.ny, grid.nx), |(_, j)| {
        let x = grid.x(j);
        let core_frac = ((a - x.abs()) / step_um + 0.5).clamp(0.0, 1.0);
        (core_frac * n1 * n1 + (1.0 - core_frac) * n2 * n2).sqrt()
    });
    IndexProfile::new(grid, values, 0.85).unwrap()
}

/// Unbounded parabolic profile n² = n0² − curvature·r² over the window.
pub fn parabolic_profile(n0: f64, curvature: f64, half_um: f64, step_um: f64) -> IndexProfile {
    let grid = Grid::centered(half_um, half_um, step_um).unwrap();
    let values = Array2::from_shape_fn((grid.ny, grid.nx), |(i, j)| {
        let (x, y) = (grid.x(j), grid.y(i));
        (n0 * n0 - curvature * (x * x + y * y)).max(1.0).sqrt()
    });
    IndexProfile::new(grid, values, 0.85).unwrap()
}

/// Flat-top square-core profile (8th-order super-Gaussian in both axes).
pub fn flat_top_profile(
    core_width_um: f64,
    n_clad: f64,
    delta_n: f64,
    half_um: f64,
    step_um: f64,
) -> IndexProfile {
    let grid = Grid::centered(half_um, half_um, step_um).unwrap();
    let r = 0.45 * core_width_um;
    let values = Array2::from_shape_fn((grid.ny, grid.nx), |(i, j)| {
        let (x, y) = (grid.x(j) / r, grid.y(i) / r);
        n_clad + delta_n * (-(x.powi(8) + y.powi(8))).exp()
    });
    IndexProfile::new(grid, values, 0.85).unwrap()
}
