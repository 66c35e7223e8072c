//! Scalar finite-difference eigenmode solver for 2D index profiles.
//!
//! Weak guidance (Δn/n ≪ 1) justifies the scalar Helmholtz treatment: the
//! five-point discretization of `∇²E + k0²n²E = β²E` on the profile grid with
//! Dirichlet edges, solved for the largest β² (the guided modes). Group
//! indices follow from solving at `λ0 ± Δλ` and pairing modes by field
//! overlap.

use ndarray::Array2;

use crate::eigen::{self, EigenOptions, HelmholtzOp};
use crate::grid::Grid;
use crate::profile::IndexProfile;
use crate::{Error, Result};

/// Tuning knobs of [`solve_modes_with`].
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Guidedness threshold: modes must satisfy `n_eff > n_clad + eps_guided`.
    pub eps_guided: f64,
    /// Relative eigen-residual bound per returned mode.
    pub residual_tol: f64,
    /// Reject solves whose fundamental mode touches the window edge above
    /// 1e-6 of its peak. Disable for profiles that are deliberately unbounded
    /// (extruded slabs, infinite parabolic wells).
    pub clipping_check: bool,
    pub max_restarts: usize,
    /// Lanczos basis size override; 0 derives one from a mode-count estimate.
    pub basis_hint: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps_guided: 1e-5,
            residual_tol: 1e-9,
            clipping_check: true,
            max_restarts: 80,
            basis_hint: 0,
        }
    }
}

/// Field ratio at the window edge above which a solve counts as clipped.
pub const CLIPPING_EDGE_RATIO: f64 = 1e-6;

/// One guided scalar mode on the profile grid, normalized to ∬|E|² dA = 1.
#[derive(Debug, Clone)]
pub struct WaveguideMode {
    /// Field samples on the full profile grid (zero on the boundary ring).
    pub field: Array2<f64>,
    pub n_eff: f64,
    /// Ordinal in the set (0 = largest n_eff).
    pub index: usize,
}

impl WaveguideMode {
    /// ∬ E_a·E_b dA on the shared grid.
    pub fn overlap(&self, other: &WaveguideMode, cell_area: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.field.iter().zip(other.field.iter()) {
            acc += a * b;
        }
        acc * cell_area
    }

    /// |E|²-weighted centroid y coordinate.
    fn centroid_y(&self, grid: &Grid) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((i, _j), &v) in self.field.indexed_iter() {
            let w = v * v;
            num += w * grid.y(i);
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Guided modes of one profile at one wavelength, ordered by strictly
/// non-increasing n_eff.
#[derive(Debug, Clone)]
pub struct WaveguideModeSet {
    pub modes: Vec<WaveguideMode>,
    pub wavelength_um: f64,
    /// Cladding index used for the guidedness cut (minimum boundary sample).
    pub n_clad: f64,
    /// Per-mode group indices, filled by [`group_indices`].
    pub n_group: Option<Vec<f64>>,
    grid: Grid,
}

impl WaveguideModeSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// Cladding-index estimate of a profile: the smallest sample on the window
/// boundary ring. Modes above it decay toward at least part of the boundary.
pub fn cladding_index(profile: &IndexProfile) -> f64 {
    let g = profile.grid();
    let v = profile.values();
    let mut min = f64::INFINITY;
    for j in 0..g.nx {
        min = min.min(v[(0, j)]).min(v[(g.ny - 1, j)]);
    }
    for i in 0..g.ny {
        min = min.min(v[(i, 0)]).min(v[(i, g.nx - 1)]);
    }
    min
}

fn build_operator(profile: &IndexProfile, k0: f64) -> Result<HelmholtzOp> {
    let g = profile.grid();
    if g.nx < 3 || g.ny < 3 {
        return Err(Error::invalid("profile grid must be at least 3x3 for the mode solver"));
    }
    let (nxi, nyi) = (g.nx - 2, g.ny - 2);
    let v = profile.values();
    let mut diag = vec![0.0f64; nxi * nyi];
    for iy in 0..nyi {
        for ix in 0..nxi {
            let n = v[(iy + 1, ix + 1)];
            diag[iy * nxi + ix] = k0 * k0 * n * n;
        }
    }
    Ok(HelmholtzOp {
        nxi,
        nyi,
        inv_dx2: 1.0 / (g.dx * g.dx),
        inv_dy2: 1.0 / (g.dy * g.dy),
        diag,
    })
}

/// Deterministic Krylov seed: a broad bump at the profile peak with
/// parity-breaking tilts so every mode symmetry class is reachable.
fn start_vector(profile: &IndexProfile) -> Vec<f64> {
    let g = profile.grid();
    let (nxi, nyi) = (g.nx - 2, g.ny - 2);
    let (px, py) = profile.peak_position();
    let w0 = 0.15 * g.width().min(g.height()).max(1e-6);
    let mut v = vec![0.0f64; nxi * nyi];
    for iy in 0..nyi {
        let y = g.y(iy + 1);
        for ix in 0..nxi {
            let x = g.x(ix + 1);
            let (ux, uy) = ((x - px) / w0, (y - py) / w0);
            let bump = (-(ux * ux + uy * uy)).exp();
            v[iy * nxi + ix] = bump * (1.0 + 0.31 * ux + 0.27 * uy + 0.11 * ux * uy) + 1e-3;
        }
    }
    v
}

/// Phase-space estimate of the number of guided scalar modes.
fn mode_count_estimate(profile: &IndexProfile, k0: f64, n_clad: f64) -> f64 {
    let v = profile.values();
    let mut acc = 0.0;
    for &n in v.iter() {
        let d = n * n - n_clad * n_clad;
        if d > 0.0 {
            acc += d;
        }
    }
    acc * profile.grid().cell_area() * k0 * k0 / (4.0 * std::f64::consts::PI)
}

/// Solves for all guided modes (up to `max_modes`) with default options.
pub fn solve_modes(
    profile: &IndexProfile,
    wavelength_um: f64,
    max_modes: usize,
) -> Result<WaveguideModeSet> {
    solve_modes_with(profile, wavelength_um, max_modes, &SolverOptions::default())
}

/// Solves for all modes with `n_eff > n_clad + eps_guided`, up to
/// `max_modes`, orthonormal on the grid, Dirichlet boundary.
pub fn solve_modes_with(
    profile: &IndexProfile,
    wavelength_um: f64,
    max_modes: usize,
    opts: &SolverOptions,
) -> Result<WaveguideModeSet> {
    if !(wavelength_um > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    if max_modes == 0 {
        return Err(Error::invalid("max_modes must be at least 1"));
    }
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let n_clad = cladding_index(profile);
    let grid = profile.grid().clone();
    let op = build_operator(profile, k0)?;

    let cut = n_clad + opts.eps_guided;
    let lambda_keep = k0 * k0 * cut * cut;

    // Size the Krylov basis from the expected guided count, but never far
    // beyond what max_modes can use.
    let est = mode_count_estimate(profile, k0, n_clad);
    let basis = if opts.basis_hint > 0 {
        opts.basis_hint
    } else {
        let by_estimate = (2.2 * est) as usize + 60;
        let by_request = 2 * max_modes + 60;
        by_estimate.min(by_request).min(op.len().max(8))
    };
    let eig_opts = EigenOptions {
        residual_tol: opts.residual_tol,
        max_restarts: opts.max_restarts,
        basis_hint: basis,
        ..EigenOptions::default()
    };

    let start = start_vector(profile);
    let pairs = eigen::guided_eigenpairs(&op, lambda_keep, max_modes, &eig_opts, &start)?;

    let (nxi, nyi) = (op.nxi, op.nyi);
    let scale = 1.0 / grid.cell_area().sqrt();
    let mut modes: Vec<WaveguideMode> = pairs
        .into_iter()
        .map(|p| {
            let mut field = Array2::<f64>::zeros((grid.ny, grid.nx));
            for iy in 0..nyi {
                for ix in 0..nxi {
                    field[(iy + 1, ix + 1)] = p.vector[iy * nxi + ix] * scale;
                }
            }
            // Canonical sign: the largest-magnitude sample is positive.
            let mut peak = 0.0f64;
            for &v in field.iter() {
                if v.abs() > peak.abs() {
                    peak = v;
                }
            }
            if peak < 0.0 {
                field.mapv_inplace(|v| -v);
            }
            WaveguideMode { field, n_eff: p.value.max(0.0).sqrt() / k0, index: 0 }
        })
        .collect();

    // Descending n_eff; break near-ties deterministically by field centroid
    // height (higher first).
    modes.sort_by(|a, b| b.n_eff.partial_cmp(&a.n_eff).unwrap());
    let mut i = 0;
    while i < modes.len() {
        let mut j = i + 1;
        while j < modes.len() && (modes[i].n_eff - modes[j].n_eff).abs() <= 1e-10 {
            j += 1;
        }
        if j - i > 1 {
            modes[i..j].sort_by(|a, b| {
                b.centroid_y(&grid).partial_cmp(&a.centroid_y(&grid)).unwrap()
            });
        }
        i = j;
    }
    for (i, m) in modes.iter_mut().enumerate() {
        m.index = i;
    }

    if opts.clipping_check {
        if let Some(fundamental) = modes.first() {
            let f = &fundamental.field;
            let mut edge = 0.0f64;
            let mut peak = 0.0f64;
            for &v in f.iter() {
                peak = peak.max(v.abs());
            }
            let (ny, nx) = (grid.ny, grid.nx);
            for j in 1..nx - 1 {
                edge = edge.max(f[(1, j)].abs()).max(f[(ny - 2, j)].abs());
            }
            for i in 1..ny - 1 {
                edge = edge.max(f[(i, 1)].abs()).max(f[(i, nx - 2)].abs());
            }
            if peak > 0.0 && edge / peak > CLIPPING_EDGE_RATIO {
                return Err(Error::WindowClipping { edge_ratio: edge / peak });
            }
        }
    }

    Ok(WaveguideModeSet { modes, wavelength_um, n_clad, n_group: None, grid })
}

/// Greedy maximum-overlap pairing between two mode sets on one grid.
/// Every mode of `a` must find a partner with |⟨E_a, E_b⟩|² ≥ 0.5.
pub fn match_modes(a: &WaveguideModeSet, b: &WaveguideModeSet) -> Result<Vec<usize>> {
    if !a.grid.same_geometry(&b.grid, 1e-9) {
        return Err(Error::invalid("mode sets do not share a grid"));
    }
    let area = a.grid.cell_area();
    let (na, nb) = (a.len(), b.len());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(na * nb);
    for (i, ma) in a.modes.iter().enumerate() {
        for (j, mb) in b.modes.iter().enumerate() {
            let o = ma.overlap(mb, area);
            pairs.push((o * o, i, j));
        }
    }
    pairs.sort_by(|x, y| {
        y.0.partial_cmp(&x.0).unwrap().then_with(|| (x.1, x.2).cmp(&(y.1, y.2)))
    });
    let mut a_to_b = vec![usize::MAX; na];
    let mut b_used = vec![false; nb];
    for &(o2, i, j) in &pairs {
        if o2 < 0.5 {
            break;
        }
        if a_to_b[i] == usize::MAX && !b_used[j] {
            a_to_b[i] = j;
            b_used[j] = true;
        }
    }
    let unmatched: Vec<usize> =
        a_to_b.iter().enumerate().filter(|(_, &v)| v == usize::MAX).map(|(i, _)| i).collect();
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedModes(unmatched));
    }
    Ok(a_to_b)
}

/// Options of the group-index computation.
#[derive(Debug, Clone)]
pub struct GroupIndexOptions {
    /// Wavelength half-step of the central difference, µm.
    pub dlambda_um: f64,
    /// Optional uniform material-dispersion slope dn/dλ (per µm) applied to
    /// every profile sample before the side solves.
    pub material_dn_dlambda: f64,
}

impl Default for GroupIndexOptions {
    fn default() -> Self {
        GroupIndexOptions { dlambda_um: 1e-3, material_dn_dlambda: 0.0 }
    }
}

/// Fills per-mode group indices `n_group = n_eff − λ0·dn_eff/dλ` by solving
/// at `λ0 ± Δλ` and pairing branches by field overlap.
pub fn group_indices(
    profile: &IndexProfile,
    lambda0_um: f64,
    modeset: WaveguideModeSet,
    solver: &SolverOptions,
    opts: &GroupIndexOptions,
) -> Result<WaveguideModeSet> {
    if !(opts.dlambda_um > 0.0) {
        return Err(Error::invalid("dlambda must be positive"));
    }
    if (modeset.wavelength_um - lambda0_um).abs() > 1e-12 {
        return Err(Error::invalid("mode set was not solved at the requested wavelength"));
    }
    if modeset.is_empty() {
        let mut set = modeset;
        set.n_group = Some(Vec::new());
        return Ok(set);
    }

    // Relax the guidedness cut for the side solves so branches that sit right
    // at the cutoff at λ0 still pair up.
    let side_opts = SolverOptions {
        eps_guided: (solver.eps_guided * 1e-3).min(1e-8),
        clipping_check: false,
        ..solver.clone()
    };
    let side_profile = |dlam: f64| -> Result<IndexProfile> {
        if opts.material_dn_dlambda == 0.0 {
            Ok(profile.clone())
        } else {
            let shift = opts.material_dn_dlambda * dlam;
            let values = profile.values().mapv(|n| n + shift);
            IndexProfile::new(profile.grid().clone(), values, profile.wavelength_ref_um())
        }
    };
    let max_side = modeset.len() + 12;
    let plus = solve_modes_with(
        &side_profile(opts.dlambda_um)?,
        lambda0_um + opts.dlambda_um,
        max_side,
        &side_opts,
    )?;
    let minus = solve_modes_with(
        &side_profile(-opts.dlambda_um)?,
        lambda0_um - opts.dlambda_um,
        max_side,
        &side_opts,
    )?;

    let to_plus = match_modes(&modeset, &plus)?;
    let to_minus = match_modes(&modeset, &minus)?;

    let mut n_group = Vec::with_capacity(modeset.len());
    for (i, mode) in modeset.modes.iter().enumerate() {
        let np = plus.modes[to_plus[i]].n_eff;
        let nm = minus.modes[to_minus[i]].n_eff;
        let dneff_dlambda = (np - nm) / (2.0 * opts.dlambda_um);
        n_group.push(mode.n_eff - lambda0_um * dneff_dlambda);
    }

    let mut set = modeset;
    set.n_group = Some(n_group);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{synth_gi_profile, GiProfileSpec};

    fn quick_profile() -> IndexProfile {
        synth_gi_profile(&GiProfileSpec {
            core_width_um: 8.0,
            core_height_um: 8.0,
            delta_n: 0.01,
            peak_offset_um: (0.0, 1.0),
            step_um: 0.5,
            margin_um: 10.0,
            ..GiProfileSpec::default()
        })
        .unwrap()
    }

    /// Weak test guides have long tails; solve with the clipping guard off.
    fn solve_unclipped(p: &IndexProfile, wl: f64, max: usize) -> WaveguideModeSet {
        let opts = SolverOptions { clipping_check: false, ..SolverOptions::default() };
        solve_modes_with(p, wl, max, &opts).unwrap()
    }

    #[test]
    fn uniform_profile_has_no_guided_modes() {
        let p = synth_gi_profile(&GiProfileSpec {
            delta_n: 0.0,
            core_width_um: 10.0,
            core_height_um: 10.0,
            peak_offset_um: (0.0, 0.0),
            step_um: 0.5,
            margin_um: 10.0,
            ..GiProfileSpec::default()
        })
        .unwrap();
        let set = solve_modes(&p, 0.85, 10).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn modes_are_normalized_and_ordered() {
        let p = quick_profile();
        let set = solve_unclipped(&p, 0.85, 12);
        assert!(!set.is_empty());
        let area = set.grid().cell_area();
        for w in set.modes.windows(2) {
            assert!(w[0].n_eff >= w[1].n_eff);
        }
        for m in &set.modes {
            let norm: f64 = m.field.iter().map(|v| v * v).sum::<f64>() * area;
            assert!((norm - 1.0).abs() < 1e-9, "norm = {norm}");
            assert!(m.n_eff > set.n_clad && m.n_eff <= p.max_index() + 1e-12);
        }
    }

    #[test]
    fn orthonormality_within_tolerance() {
        let p = quick_profile();
        let set = solve_unclipped(&p, 0.85, 12);
        let area = set.grid().cell_area();
        for i in 0..set.len() {
            for k in 0..set.len() {
                let o = set.modes[i].overlap(&set.modes[k], area);
                if i == k {
                    assert!((o - 1.0).abs() < 1e-9);
                } else {
                    assert!(o.abs() < 1e-6, "⟨{i},{k}⟩ = {o:.2e}");
                }
            }
        }
    }

    #[test]
    fn window_clipping_detected() {
        // A weakly guided core whose fundamental tail reaches the edge.
        let p = synth_gi_profile(&GiProfileSpec {
            core_width_um: 6.0,
            core_height_um: 6.0,
            delta_n: 0.006,
            peak_offset_um: (0.0, 0.0),
            step_um: 0.5,
            margin_um: 10.0,
            ..GiProfileSpec::default()
        })
        .unwrap();
        match solve_modes(&p, 0.85, 4) {
            Err(Error::WindowClipping { .. }) => {}
            other => panic!("expected window clipping, got {other:?}"),
        }
    }

    #[test]
    fn match_modes_identity_and_permutation() {
        let p = quick_profile();
        let set = solve_unclipped(&p, 0.85, 8);
        assert!(set.len() >= 2, "need at least two modes");
        let id = match_modes(&set, &set).unwrap();
        assert_eq!(id, (0..set.len()).collect::<Vec<_>>());

        let mut permuted = set.clone();
        permuted.modes.rotate_left(1);
        for (i, m) in permuted.modes.iter_mut().enumerate() {
            m.index = i;
        }
        let map = match_modes(&set, &permuted).unwrap();
        let n = set.len();
        for (i, &j) in map.iter().enumerate() {
            assert_eq!((i + n - 1) % n, j);
        }
    }

    #[test]
    fn match_modes_rejects_disjoint_sets() {
        let p = quick_profile();
        let set = solve_unclipped(&p, 0.85, 8);
        // Two single-mode sets holding orthogonal modes cannot pair.
        let mut a = set.clone();
        let mut b = set;
        a.modes.truncate(1);
        b.modes.remove(0);
        b.modes.truncate(1);
        match match_modes(&a, &b) {
            Err(Error::UnmatchedModes(list)) => assert_eq!(list, vec![0]),
            other => panic!("expected unmatched modes, got {other:?}"),
        }
    }

    #[test]
    fn group_indices_fill_and_bulk_limit() {
        let p = quick_profile();
        let opts = SolverOptions { clipping_check: false, ..SolverOptions::default() };
        let set = solve_modes_with(&p, 0.85, 6, &opts).unwrap();
        let n = set.len();
        let set = group_indices(&p, 0.85, set, &opts, &GroupIndexOptions::default()).unwrap();
        let ng = set.n_group.as_ref().unwrap();
        assert_eq!(ng.len(), n);
        for (m, &g) in set.modes.iter().zip(ng) {
            // Waveguide dispersion only: n_group must exceed n_eff and stay
            // within a plausible band.
            assert!(g > m.n_eff && g < 1.6, "n_group = {g}, n_eff = {}", m.n_eff);
        }
    }

    #[test]
    fn mode_count_non_increasing_with_wavelength() {
        let p = quick_profile();
        let short = solve_unclipped(&p, 0.75, 40);
        let long = solve_unclipped(&p, 1.0, 40);
        assert!(long.len() <= short.len());
    }
}
