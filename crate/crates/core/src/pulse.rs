//! Autocorrelation-trace analysis: shape fitting in autocorrelation space,
//! RMSE model selection and link bandwidth by spectral deconvolution of the
//! fitted shapes.

use std::io::{BufRead, BufReader, Read};

use crate::fit::{levenberg_marquardt, LmOptions};
use crate::{Error, Result};

/// Candidate pulse shapes with analytic intensity autocorrelations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    Sech2,
    Gaussian,
    Lorentzian,
}

impl PulseShape {
    pub const ALL: [PulseShape; 3] = [PulseShape::Sech2, PulseShape::Gaussian, PulseShape::Lorentzian];

    pub fn name(self) -> &'static str {
        match self {
            PulseShape::Sech2 => "sech2",
            PulseShape::Gaussian => "gaussian",
            PulseShape::Lorentzian => "lorentzian",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "sech2" => Ok(PulseShape::Sech2),
            "gaussian" => Ok(PulseShape::Gaussian),
            "lorentzian" => Ok(PulseShape::Lorentzian),
            other => Err(Error::invalid(format!("unknown pulse shape {other:?}"))),
        }
    }

    /// FWHM of the intensity autocorrelation divided by the pulse FWHM.
    pub fn autocorrelation_width_ratio(self) -> f64 {
        match self {
            // Half-width of 3(x·cosh x − sinh x)/sinh³x at one half, over
            // the sech² half-width ln(1+√2).
            PulseShape::Sech2 => SECH2_AC_RATIO,
            PulseShape::Gaussian => std::f64::consts::SQRT_2,
            PulseShape::Lorentzian => 2.0,
        }
    }
}

/// x with (x·cosh x − sinh x)/sinh³x = 1/6 (autocorrelation half maximum).
const SECH2_AC_HALF_X: f64 = 1.3597924763052964;
/// ln(1 + √2): half-width of sech² at half maximum.
const SECH2_HALF_X: f64 = 0.881_373_587_019_543;
const SECH2_AC_RATIO: f64 = SECH2_AC_HALF_X / SECH2_HALF_X;

/// Unit-peak, unit-FWHM autocorrelation form of each shape.
fn ac_shape(shape: PulseShape, z: f64) -> f64 {
    match shape {
        PulseShape::Gaussian => (-4.0 * 2.0f64.ln() * z * z).exp(),
        PulseShape::Lorentzian => 1.0 / (1.0 + 4.0 * z * z),
        PulseShape::Sech2 => {
            let x = 2.0 * SECH2_AC_HALF_X * z;
            let ax = x.abs();
            if ax < 1e-3 {
                // Series of 3(x cosh x − sinh x)/sinh³x near zero.
                1.0 - 0.4 * x * x
            } else if ax > 350.0 {
                0.0
            } else {
                3.0 * (ax * ax.cosh() - ax.sinh()) / ax.sinh().powi(3)
            }
        }
    }
}

/// A measured autocorrelation trace: strictly increasing delays,
/// non-negative amplitudes, at least 16 samples.
#[derive(Debug, Clone)]
pub struct Trace {
    delay_ps: Vec<f64>,
    amplitude: Vec<f64>,
}

impl Trace {
    pub fn new(delay_ps: Vec<f64>, amplitude: Vec<f64>) -> Result<Self> {
        if delay_ps.len() != amplitude.len() {
            return Err(Error::invalid("delay and amplitude lengths differ"));
        }
        if delay_ps.len() < 16 {
            return Err(Error::invalid(format!(
                "trace needs at least 16 samples, got {}",
                delay_ps.len()
            )));
        }
        for w in delay_ps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid("trace delays must be strictly increasing"));
            }
        }
        for &a in &amplitude {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::invalid(format!("trace amplitude {a} must be >= 0")));
            }
        }
        Ok(Trace { delay_ps, amplitude })
    }

    pub fn delay_ps(&self) -> &[f64] {
        &self.delay_ps
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    /// Reads the trace CSV (`delay_ps,amplitude` header then rows).
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut delays = Vec::new();
        let mut amps = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if k == 0 && line.starts_with("delay_ps") {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let (Some(d), Some(a)) = (it.next(), it.next()) else {
                return Err(Error::Parse(format!("trace line {}: expected two columns", k + 1)));
            };
            let d: f64 = d
                .parse()
                .map_err(|_| Error::Parse(format!("trace line {}: bad delay {d:?}", k + 1)))?;
            let a: f64 = a
                .parse()
                .map_err(|_| Error::Parse(format!("trace line {}: bad amplitude {a:?}", k + 1)))?;
            delays.push(d);
            amps.push(a);
        }
        Trace::new(delays, amps)
    }
}

/// Result of fitting one trace: the minimum-RMSE shape with its deconvolved
/// pulse width.
#[derive(Debug, Clone)]
pub struct PulseFit {
    pub shape: PulseShape,
    /// Deconvolved pulse FWHM (autocorrelation width over the shape ratio).
    pub pulse_fwhm_ps: f64,
    pub amplitude_scale: f64,
    pub baseline: f64,
    pub center_ps: f64,
    pub rmse: f64,
}

/// Least-squares fit of the three analytic autocorrelation forms; returns
/// the minimum-RMSE shape.
pub fn fit_autocorrelation(trace: &Trace) -> Result<PulseFit> {
    let t = trace.delay_ps();
    let a = trace.amplitude();
    let n = t.len();

    let (mut imax, mut amax) = (0usize, f64::NEG_INFINITY);
    let mut amin = f64::INFINITY;
    for (i, &v) in a.iter().enumerate() {
        if v > amax {
            amax = v;
            imax = i;
        }
        amin = amin.min(v);
    }
    if !(amax > amin) {
        return Err(Error::invalid("degenerate flat trace"));
    }
    if imax == 0 || imax == n - 1 {
        return Err(Error::invalid("trace peak must be interior to the delay range"));
    }

    // Initial width from the half-maximum crossings around the peak.
    let half = amin + 0.5 * (amax - amin);
    let mut left = t[0];
    for i in (0..imax).rev() {
        if a[i] <= half {
            let f = (half - a[i]) / (a[i + 1] - a[i]).max(1e-300);
            left = t[i] + f * (t[i + 1] - t[i]);
            break;
        }
    }
    let mut right = t[n - 1];
    for i in imax..n - 1 {
        if a[i + 1] <= half {
            let f = (a[i] - half) / (a[i] - a[i + 1]).max(1e-300);
            right = t[i] + f * (t[i + 1] - t[i]);
            break;
        }
    }
    let width0 = (right - left).max(2.0 * (t[1] - t[0]));

    let mut best: Option<PulseFit> = None;
    for shape in PulseShape::ALL {
        // Parameters: [scale, center, ac_fwhm, baseline].
        let p0 = [amax - amin, t[imax], width0, amin];
        let fit = levenberg_marquardt(
            |p, out| {
                let wac = p[2].abs().max(1e-12);
                for (i, (&ti, &ai)) in t.iter().zip(a).enumerate() {
                    let z = (ti - p[1]) / wac;
                    out[i] = p[3] + p[0] * ac_shape(shape, z) - ai;
                }
            },
            n,
            &p0,
            &LmOptions::default(),
        );
        if !fit.converged || !fit.rmse.is_finite() {
            continue;
        }
        let wac = fit.params[2].abs();
        if !(wac > 0.0) {
            continue;
        }
        let candidate = PulseFit {
            shape,
            pulse_fwhm_ps: wac / shape.autocorrelation_width_ratio(),
            amplitude_scale: fit.params[0],
            baseline: fit.params[3],
            center_ps: fit.params[1],
            rmse: fit.rmse,
        };
        if best.as_ref().map_or(true, |b| candidate.rmse < b.rmse) {
            best = Some(candidate);
        }
    }
    best.ok_or_else(|| Error::NonConvergence("no pulse shape fit converged".into()))
}

/// Normalized power spectrum |P(f)|/|P(0)| of a fitted pulse shape
/// (frequency in THz = 1/ps).
pub fn power_spectrum(shape: PulseShape, fwhm_ps: f64, f_thz: f64) -> f64 {
    let f = f_thz.abs();
    match shape {
        PulseShape::Gaussian => {
            let sigma = fwhm_ps / (8.0 * 2.0f64.ln()).sqrt();
            (-2.0 * std::f64::consts::PI.powi(2) * f * f * sigma * sigma).exp()
        }
        PulseShape::Sech2 => {
            let t0 = fwhm_ps / (2.0 * SECH2_HALF_X);
            let x = std::f64::consts::PI.powi(2) * f * t0;
            if x < 1e-8 {
                1.0
            } else if x > 700.0 {
                0.0
            } else {
                x / x.sinh()
            }
        }
        PulseShape::Lorentzian => {
            let gamma = fwhm_ps / 2.0;
            (-2.0 * std::f64::consts::PI * gamma * f).exp()
        }
    }
}

/// Options of [`link_bandwidth`].
#[derive(Debug, Clone)]
pub struct DeconvolutionOptions {
    /// Stop dividing once the back-to-back spectrum falls below this
    /// fraction of its peak.
    pub spectrum_floor: f64,
    /// −3 dB threshold on the optical-power response (0.5 by convention).
    pub threshold: f64,
}

impl Default for DeconvolutionOptions {
    fn default() -> Self {
        DeconvolutionOptions { spectrum_floor: 1e-3, threshold: 0.5 }
    }
}

/// Waveguide −3 dB bandwidth (GHz) from fitted back-to-back and output
/// pulses: `H(f) = P_out(f)/P_b2b(f)`, threshold crossing by bisection.
/// Returns ∞ when the pulses have equal widths or the response never falls
/// to the threshold before the regularization floor.
pub fn link_bandwidth(b2b: &PulseFit, out: &PulseFit, opts: &DeconvolutionOptions) -> Result<f64> {
    let wb = b2b.pulse_fwhm_ps;
    let wo = out.pulse_fwhm_ps;
    if !(wb > 0.0) || !(wo > 0.0) {
        return Err(Error::invalid("pulse widths must be positive"));
    }
    if wo < wb * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "nonphysical narrowing: output pulse {wo} ps is narrower than the \
             back-to-back pulse {wb} ps"
        )));
    }
    if (wo - wb).abs() <= 1e-12 * wb {
        return Ok(f64::INFINITY);
    }

    let h = |f: f64| -> Option<f64> {
        let pb = power_spectrum(b2b.shape, wb, f);
        if pb < opts.spectrum_floor {
            return None;
        }
        Some(power_spectrum(out.shape, wo, f) / pb)
    };

    // March outward until the response crosses the threshold or the floor
    // cuts the division off.
    let df = 1.0 / (200.0 * wo);
    let mut f_lo = 0.0f64;
    let mut f_hi = None;
    let mut f = df;
    for _ in 0..4_000_000 {
        match h(f) {
            None => break,
            Some(v) if v < opts.threshold => {
                f_hi = Some(f);
                break;
            }
            Some(_) => {
                f_lo = f;
                f += df;
            }
        }
    }
    let Some(mut hi) = f_hi else {
        return Ok(f64::INFINITY);
    };
    let mut lo = f_lo;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match h(mid) {
            Some(v) if v >= opts.threshold => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi) * 1000.0)
}
