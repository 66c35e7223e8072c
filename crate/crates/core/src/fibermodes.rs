//! Analytic LP modes of circular step- and graded-index fibers.
//!
//! Step-index fibers use the Bessel characteristic equation
//! `u·J_{m+1}(u)/J_m(u) = w·K_{m+1}(w)/K_m(w)`; power-law profiles use a
//! radial finite-difference eigenproblem per cylindrical order `m` (the
//! substitution `u = R·√r` makes it symmetric tridiagonal). Modes are grouped
//! by the principal mode number `PMN = m + 2n + 1` with the radial order `n`
//! starting at 0, so the fundamental has PMN 1.

use crate::bessel::{bessel_j, bessel_k};
use crate::profile::{Grading, RadialFiberSpec};
use crate::{Error, Result};

/// Azimuthal orientation of an LP mode; `m = 0` modes only come as `Cos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Orientation {
    Cos,
    Sin,
}

/// Principal mode number of the LP mode (m, n), radial order from 0.
pub fn pmn(m: u32, n: u32) -> u32 {
    m + 2 * n + 1
}

/// Tabulated radial field R(r) on a uniform grid from r = 0.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub dr_um: f64,
    pub values: Vec<f64>,
}

impl RadialProfile {
    /// Linear interpolation; zero beyond the table end.
    pub fn value_at(&self, r_um: f64) -> f64 {
        let t = r_um / self.dr_um;
        if t < 0.0 {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return 0.0;
        }
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    /// Number of interior sign changes (the radial order of the mode).
    pub fn interior_zero_crossings(&self) -> usize {
        let mut count = 0;
        let mut prev = 0.0f64;
        for &v in &self.values {
            if v != 0.0 {
                if prev != 0.0 && v.signum() != prev.signum() {
                    count += 1;
                }
                prev = v;
            }
        }
        count
    }
}

/// One LP mode, normalized so that ∬|E|² dA = 1.
#[derive(Debug, Clone)]
pub struct FiberMode {
    pub m: u32,
    pub n: u32,
    pub orientation: Orientation,
    pub n_eff: f64,
    pub pmn: u32,
    pub radial: RadialProfile,
}

impl FiberMode {
    /// Field amplitude at (x, y) for a mode centered at `offset`.
    pub fn eval_field(&self, x_um: f64, y_um: f64, offset_um: (f64, f64)) -> f64 {
        let dx = x_um - offset_um.0;
        let dy = y_um - offset_um.1;
        let r = (dx * dx + dy * dy).sqrt();
        let radial = self.radial.value_at(r);
        if self.m == 0 {
            return radial;
        }
        let phi = dy.atan2(dx);
        let arg = self.m as f64 * phi;
        match self.orientation {
            Orientation::Cos => radial * arg.cos(),
            Orientation::Sin => radial * arg.sin(),
        }
    }
}

/// All guided LP modes of a fiber at one wavelength, ordered by ascending
/// PMN, then m, then orientation.
#[derive(Debug, Clone)]
pub struct FiberModeSet {
    pub spec: RadialFiberSpec,
    pub wavelength_um: f64,
    pub modes: Vec<FiberMode>,
    pub max_pmn: u32,
}

impl FiberModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// Radial extent of the solver domain in core radii.
const DOMAIN_RADII: f64 = 3.0;
/// Radial sample count of the finite-difference eigenproblem.
const RADIAL_POINTS: usize = 3000;

/// Solves every guided LP mode of the fiber. `m > 0` azimuthal orders are
/// emitted as cos/sin orientation pairs sharing one effective index.
pub fn solve_lp_modes(spec: &RadialFiberSpec, wavelength_um: f64) -> Result<FiberModeSet> {
    if !(wavelength_um > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    let v = spec.v_number(wavelength_um);
    if !(v > 0.0) {
        return Err(Error::invalid("V-number must be positive"));
    }
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;

    let mut raw: Vec<(u32, u32, f64, RadialProfile)> = Vec::new();
    match spec.grading {
        Grading::Step => {
            let mut m = 0u32;
            loop {
                let found = step_modes_for_m(spec, wavelength_um, m)?;
                if found.is_empty() {
                    break;
                }
                raw.extend(found);
                m += 1;
            }
        }
        Grading::Power(_) => {
            let mut m = 0u32;
            loop {
                let found = graded_modes_for_m(spec, k0, m)?;
                if found.is_empty() {
                    break;
                }
                raw.extend(found);
                m += 1;
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::invalid(format!(
            "no guided modes at λ = {wavelength_um} µm (V = {v:.3})"
        )));
    }

    let mut modes: Vec<FiberMode> = Vec::new();
    for (m, n, n_eff, radial) in raw {
        let p = pmn(m, n);
        modes.push(FiberMode { m, n, orientation: Orientation::Cos, n_eff, pmn: p, radial: radial.clone() });
        if m > 0 {
            modes.push(FiberMode { m, n, orientation: Orientation::Sin, n_eff, pmn: p, radial });
        }
    }
    modes.sort_by(|a, b| {
        (a.pmn, a.m, a.orientation).cmp(&(b.pmn, b.m, b.orientation))
    });
    let max_pmn = modes.iter().map(|m| m.pmn).max().unwrap_or(0);
    Ok(FiberModeSet { spec: spec.clone(), wavelength_um, modes, max_pmn })
}

/// Normalizes a radial table so the full 2D mode carries unit power:
/// ∬|E|² dA = A·∫R²(r) r dr with A = 2π (m = 0) or π (m > 0).
fn normalize_radial(values: &mut [f64], dr: f64, m: u32) {
    let angular = if m == 0 { 2.0 * std::f64::consts::PI } else { std::f64::consts::PI };
    let mut acc = 0.0;
    for (k, val) in values.iter().enumerate() {
        let r = k as f64 * dr;
        let w = if k == 0 || k == values.len() - 1 { 0.5 } else { 1.0 };
        acc += w * val * val * r;
    }
    let norm = (angular * acc * dr).sqrt();
    if norm > 0.0 {
        for val in values.iter_mut() {
            *val /= norm;
        }
    }
}

// ---------------------------------------------------------------------------
// Step-index route: Bessel characteristic equation.
// ---------------------------------------------------------------------------

/// LP dispersion function with the pole structure removed:
/// f(u) = u·J_{m+1}(u)·K_m(w)/(w·K_{m+1}(w)) − J_m(u), w² = V² − u².
fn step_dispersion(m: u32, u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).max(0.0).sqrt().max(1e-12);
    let km = bessel_k(m, w);
    let km1 = bessel_k(m + 1, w);
    let ratio = km / (w * km1);
    u * bessel_j(m + 1, u) * ratio - bessel_j(m, u)
}

fn step_modes_for_m(
    spec: &RadialFiberSpec,
    wavelength_um: f64,
    m: u32,
) -> Result<Vec<(u32, u32, f64, RadialProfile)>> {
    let v = spec.v_number(wavelength_um);
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let a = spec.core_radius_um;
    let n1 = spec.core_index();

    let lo = 1e-9;
    let hi = v * (1.0 - 1e-12);
    let samples = (8.0 * v).ceil().max(400.0) as usize;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_u = lo;
    let mut prev_f = step_dispersion(m, prev_u, v);
    for k in 1..=samples {
        let u = lo + (hi - lo) * k as f64 / samples as f64;
        let f = step_dispersion(m, u, v);
        if prev_f == 0.0 {
            roots.push(prev_u);
        } else if prev_f.signum() != f.signum() && f.is_finite() && prev_f.is_finite() {
            let (mut ua, mut ub, mut fa) = (prev_u, u, prev_f);
            for _ in 0..90 {
                let um = 0.5 * (ua + ub);
                let fm = step_dispersion(m, um, v);
                if fm == 0.0 {
                    ua = um;
                    ub = um;
                    break;
                }
                if fa.signum() != fm.signum() {
                    ub = um;
                } else {
                    ua = um;
                    fa = fm;
                }
            }
            roots.push(0.5 * (ua + ub));
        }
        prev_u = u;
        prev_f = f;
    }

    let mut out = Vec::with_capacity(roots.len());
    for (n_idx, &u) in roots.iter().enumerate() {
        let w = (v * v - u * u).max(0.0).sqrt();
        let beta2 = k0 * k0 * n1 * n1 - (u / a).powi(2);
        if beta2 <= 0.0 {
            return Err(Error::NonConvergence(format!(
                "step-index root failure at m = {m}, n = {n_idx}"
            )));
        }
        let n_eff = beta2.sqrt() / k0;
        if n_eff <= spec.n_clad {
            continue;
        }
        // Tabulate J inside, matched K tail outside.
        let rmax = DOMAIN_RADII * a;
        let npts = 2048usize;
        let dr = rmax / (npts - 1) as f64;
        let jm_u = bessel_j(m, u);
        let km_w = bessel_k(m, w.max(1e-12));
        let mut values = Vec::with_capacity(npts);
        for k in 0..npts {
            let r = k as f64 * dr;
            let val = if r <= a {
                bessel_j(m, u * r / a)
            } else {
                let t = bessel_k(m, (w.max(1e-12)) * r / a);
                jm_u * t / km_w
            };
            values.push(val);
        }
        normalize_radial(&mut values, dr, m);
        out.push((m, n_idx as u32, n_eff, RadialProfile { dr_um: dr, values }));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Graded route: radial finite differences, symmetric tridiagonal.
// ---------------------------------------------------------------------------

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) below x.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for (k, &d) in diag.iter().enumerate().skip(1) {
        if q == 0.0 {
            q = 1e-300;
        }
        let e = off[k - 1];
        q = d - x - e * e / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves (T − λI)x = b for a symmetric tridiagonal T, by Gaussian
/// elimination with partial pivoting.
fn tridiag_shifted_solve(diag: &[f64], off: &[f64], lambda: f64, b: &mut [f64]) {
    let n = diag.len();
    let dl = off.to_vec();
    let mut d: Vec<f64> = diag.iter().map(|&v| v - lambda).collect();
    let mut du = off.to_vec();
    let mut du2 = vec![0.0f64; n.saturating_sub(2)];
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = 1e-300;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - fact * tmp;
            du[i] = tmp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            b.swap(i, i + 1);
            b[i + 1] -= fact * b[i];
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = 1e-300;
    }
    b[n - 1] /= d[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for i in (0..n - 2).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    }
}

fn graded_modes_for_m(
    spec: &RadialFiberSpec,
    k0: f64,
    m: u32,
) -> Result<Vec<(u32, u32, f64, RadialProfile)>> {
    let a = spec.core_radius_um;
    let rmax = DOMAIN_RADII * a;
    let n = RADIAL_POINTS;
    // Cell-centered mesh r_k = (k+½)·dr: the axis is a natural flux boundary
    // (zero-area face), which keeps m = 0 modes second-order accurate.
    let dr = rmax / n as f64;
    let inv_dr2 = 1.0 / (dr * dr);
    let m2 = m as f64 * m as f64;

    let mut diag = vec![0.0f64; n];
    let mut off = vec![0.0f64; n - 1];
    let mut centers = vec![0.0f64; n];
    for k in 0..n {
        let r = (k as f64 + 0.5) * dr;
        centers[k] = r;
        let r_left = k as f64 * dr;
        let r_right = (k + 1) as f64 * dr;
        let nn = spec.index_at(r);
        diag[k] = -(r_left + r_right) * inv_dr2 / r - m2 / (r * r) + k0 * k0 * nn * nn;
        if k + 1 < n {
            let r_next = (k as f64 + 1.5) * dr;
            off[k] = r_right * inv_dr2 / (r * r_next).sqrt();
        }
    }

    let n1 = spec.core_index();
    let lo = k0 * k0 * spec.n_clad * spec.n_clad * (1.0 + 1e-12);
    let hi = k0 * k0 * n1 * n1;
    let below_hi = sturm_count(&diag, &off, hi);
    let below_lo = sturm_count(&diag, &off, lo);
    let guided = below_hi.saturating_sub(below_lo);
    if guided == 0 {
        return Ok(Vec::new());
    }

    let mut out = Vec::with_capacity(guided);
    // Eigenvalue index (ascending) of the j-th guided mode from the top:
    // indices below_hi-1, below_hi-2, ...
    for j in 0..guided {
        let target = below_hi - 1 - j; // 0-based ascending index
        let (mut xlo, mut xhi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (xlo + xhi);
            if sturm_count(&diag, &off, mid) > target {
                xhi = mid;
            } else {
                xlo = mid;
            }
            if xhi - xlo <= 1e-13 * hi.abs() {
                break;
            }
        }
        let lambda = 0.5 * (xlo + xhi);
        let n_eff = lambda.max(0.0).sqrt() / k0;

        // Inverse iteration for the eigenvector (scaled basis s = √r·R).
        let mut vec_s: Vec<f64> = (0..n)
            .map(|k| {
                let t = (k as f64 + 1.0) / (n as f64);
                (1.0 - t) * (std::f64::consts::PI * t * (j as f64 + 1.0)).sin() + 1e-3
            })
            .collect();
        for _ in 0..4 {
            tridiag_shifted_solve(&diag, &off, lambda * (1.0 + 1e-13), &mut vec_s);
            let nrm = vec_s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "radial eigenvector failure at m = {m}, n = {j}"
                )));
            }
            for x in vec_s.iter_mut() {
                *x /= nrm;
            }
        }

        // R(r) = s/√r on cell centers, resampled onto a uniform table.
        let r_values: Vec<f64> =
            vec_s.iter().zip(&centers).map(|(&s, &r)| s / r.sqrt()).collect();
        let npts = 2048usize;
        let table_dr = rmax / (npts - 1) as f64;
        let mut values = Vec::with_capacity(npts);
        for p in 0..npts {
            let r = p as f64 * table_dr;
            let t = r / dr - 0.5;
            let v = if t <= 0.0 {
                // Quadratic axis extrapolation through the first two cells
                // (even for m = 0; zero on-axis otherwise).
                if m == 0 {
                    (9.0 * r_values[0] - r_values[1]) / 8.0
                        + (r * r) * (r_values[1] - r_values[0])
                            / (centers[1] * centers[1] - centers[0] * centers[0])
                } else {
                    r_values[0] * (r / centers[0]).powi(m.min(6) as i32)
                }
            } else if t >= (n - 1) as f64 {
                // Fade to zero between the last cell center and the edge.
                let fade = (1.0 - 2.0 * (t - (n - 1) as f64)).clamp(0.0, 1.0);
                r_values[n - 1] * fade
            } else {
                let k = t.floor() as usize;
                let frac = t - k as f64;
                r_values[k] * (1.0 - frac) + r_values[k + 1] * frac
            };
            // Dirichlet cap at the domain edge.
            values.push(if p == npts - 1 { 0.0 } else { v });
        }
        // Canonical sign: positive at the innermost antinode.
        let lead = values.iter().find(|v| v.abs() > 1e-12).copied().unwrap_or(1.0);
        if lead < 0.0 {
            for v in values.iter_mut() {
                *v = -*v;
            }
        }
        normalize_radial(&mut values, table_dr, m);
        let radial = RadialProfile { dr_um: table_dr, values };

        let nodes = radial.interior_zero_crossings();
        if nodes != j {
            return Err(Error::NonConvergence(format!(
                "radial order mismatch at m = {m}: expected {j} nodes, found {nodes}"
            )));
        }
        out.push((m, j as u32, n_eff, radial));
    }
    Ok(out)
}
