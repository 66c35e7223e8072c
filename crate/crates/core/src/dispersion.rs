//! Modal dispersion: delays, binned impulse responses, −3 dB bandwidth,
//! bandwidth-length products, offset scans and the step loss-model fit.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::launch::{coupling_matrix, waveguide_mpd, LaunchSpec, ModePowerDistribution};
use crate::modesolver::{group_indices, solve_modes_with, GroupIndexOptions, SolverOptions, WaveguideModeSet};
use crate::profile::IndexProfile;
use crate::{Error, Result, SPEED_OF_LIGHT_M_PER_S};

/// Step mode-selective loss: the first `cutoff_index` modes (ordered by
/// descending n_eff) survive, the rest are removed. Emulates bend-induced
/// filtering of higher-order modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossModel {
    /// Number of surviving low-order modes.
    pub cutoff_index: usize,
}

impl LossModel {
    pub fn step(cutoff_index: usize) -> Self {
        LossModel { cutoff_index }
    }

    /// No mode-selective loss.
    pub fn unrestricted() -> Self {
        LossModel { cutoff_index: usize::MAX }
    }

    /// Per-mode transmission factor a ∈ {0, 1}.
    pub fn transmission(&self, mode_index: usize) -> f64 {
        if mode_index < self.cutoff_index {
            1.0
        } else {
            0.0
        }
    }
}

/// Propagation delays `t_i = L·n_group/c` in picoseconds.
pub fn delays(n_group: &[f64], length_m: f64) -> Vec<f64> {
    n_group.iter().map(|&ng| length_m * ng * 1e12 / SPEED_OF_LIGHT_M_PER_S).collect()
}

/// Default impulse-response bin width for a delay spread, ps.
pub fn default_bin_width(spread_ps: f64) -> f64 {
    (spread_ps / 2048.0).max(0.01)
}

/// Controls of the frequency-response computation.
#[derive(Debug, Clone)]
pub struct BandwidthOptions {
    /// Normalized-|H| threshold defining the bandwidth: 0.5 is the −3 dB
    /// optical-power convention; 1/√2 gives the electrical convention.
    pub threshold: f64,
    /// Zero-padding factor over the impulse-response support (at least 8).
    pub padding_factor: usize,
    /// Lower bound on the FFT size, for fine frequency interpolation.
    pub min_fft: usize,
}

impl Default for BandwidthOptions {
    fn default() -> Self {
        BandwidthOptions { threshold: 0.5, padding_factor: 16, min_fft: 65536 }
    }
}

/// A simulated channel: binned impulse response, frequency response and the
/// bandwidth figures.
#[derive(Debug, Clone)]
pub struct ChannelResponse {
    pub bin_width_ps: f64,
    /// Power per time bin; bin k is centered on t = k·bin_width (the
    /// earliest surviving delay is shifted to t = 0).
    pub h: Vec<f64>,
    /// Frequency samples of `spectrum`, GHz, up to the bin Nyquist.
    pub f_ghz: Vec<f64>,
    /// Complex frequency response H(f); |H(0)| equals the surviving power.
    pub spectrum: Vec<Complex64>,
    /// −3 dB bandwidth, GHz; +∞ when the response never crosses the
    /// threshold below the Nyquist frequency.
    pub f3db_ghz: f64,
    pub nyquist_limited: bool,
    pub length_m: f64,
    /// Bandwidth-length product, GHz·m.
    pub blp_ghz_m: f64,
    /// Power captured by guided modes, before mode-selective loss.
    pub coupled_power: f64,
    /// Power carried to the output (equals Σh).
    pub surviving_power: f64,
}

impl ChannelResponse {
    /// Bins surviving mode powers at their delays. `bin_width_ps = None`
    /// picks the default from the delay spread.
    pub fn from_impulse(
        powers: &ModePowerDistribution,
        loss: &LossModel,
        delays_ps: &[f64],
        bin_width_ps: Option<f64>,
        length_m: f64,
    ) -> Result<Self> {
        let p = powers.powers();
        if p.len() != delays_ps.len() {
            return Err(Error::invalid(format!(
                "{} mode powers but {} delays",
                p.len(),
                delays_ps.len()
            )));
        }
        let surviving: Vec<(f64, f64)> = p
            .iter()
            .enumerate()
            .filter(|(i, &pi)| loss.transmission(*i) > 0.0 && pi > 0.0)
            .map(|(i, &pi)| (delays_ps[i], pi))
            .collect();
        let total: f64 = surviving.iter().map(|(_, pi)| pi).sum();
        if surviving.is_empty() || !(total > 0.0) {
            return Err(Error::NoPropagatingPower);
        }
        let t_min = surviving.iter().map(|(t, _)| *t).fold(f64::INFINITY, f64::min);
        let t_max = surviving.iter().map(|(t, _)| *t).fold(f64::NEG_INFINITY, f64::max);
        let bin = match bin_width_ps {
            Some(b) if b > 0.0 => b,
            Some(b) => return Err(Error::invalid(format!("bin width {b} must be positive"))),
            None => default_bin_width(t_max - t_min),
        };
        let n_bins = ((t_max - t_min) / bin).round() as usize + 1;
        if n_bins > 4_000_000 {
            return Err(Error::invalid(format!(
                "bin width {bin} ps needs {n_bins} bins over a {} ps spread",
                t_max - t_min
            )));
        }
        let mut h = vec![0.0f64; n_bins];
        for (t, pi) in surviving {
            let idx = ((t - t_min) / bin).round() as usize;
            h[idx.min(n_bins - 1)] += pi;
        }
        Ok(ChannelResponse {
            bin_width_ps: bin,
            h,
            f_ghz: Vec::new(),
            spectrum: Vec::new(),
            f3db_ghz: f64::NAN,
            nyquist_limited: false,
            length_m,
            blp_ghz_m: f64::NAN,
            coupled_power: powers.total(),
            surviving_power: total,
        })
    }

    /// Fourier transform of the zero-padded impulse response: fills the
    /// spectrum, the −3 dB bandwidth (threshold crossing located by linear
    /// interpolation) and the bandwidth-length product. Returns f3dB in GHz.
    pub fn fill_bandwidth(&mut self, opts: &BandwidthOptions) -> Result<f64> {
        if self.h.is_empty() {
            return Err(Error::invalid("impulse response is empty"));
        }
        if !(opts.threshold > 0.0 && opts.threshold < 1.0) {
            return Err(Error::invalid("bandwidth threshold must be in (0, 1)"));
        }
        let support = self.h.len().max(1);
        let n_fft = (opts.padding_factor.max(8) * support)
            .max(opts.min_fft)
            .next_power_of_two();
        let mut buf: Vec<Complex64> =
            self.h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(n_fft, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

        let half = n_fft / 2;
        let df_ghz = 1000.0 / (n_fft as f64 * self.bin_width_ps);
        let mag0 = buf[0].norm();
        if !(mag0 > 0.0) {
            return Err(Error::NoPropagatingPower);
        }

        self.f_ghz = (0..=half).map(|k| k as f64 * df_ghz).collect();
        self.spectrum = buf[..=half].to_vec();

        let mut f3 = f64::INFINITY;
        let mut limited = true;
        let mut prev = 1.0f64;
        for k in 1..=half {
            let r = buf[k].norm() / mag0;
            if r < opts.threshold {
                let frac = (prev - opts.threshold) / (prev - r);
                f3 = ((k - 1) as f64 + frac) * df_ghz;
                limited = false;
                break;
            }
            prev = r;
        }
        self.f3db_ghz = f3;
        self.nyquist_limited = limited;
        self.blp_ghz_m = if f3.is_finite() { f3 * self.length_m } else { f64::INFINITY };
        Ok(self.f3db_ghz)
    }
}

/// End-to-end simulation settings.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub solver: SolverOptions,
    pub group: GroupIndexOptions,
    pub bandwidth: BandwidthOptions,
    /// Fixed impulse bin width; `None` derives one from the delay spread.
    pub bin_width_ps: Option<f64>,
}

/// Upper bound on the number of guided modes requested from the solver.
pub const DEFAULT_MAX_MODES: usize = 400;

/// Solves modes and group indices for a profile at one wavelength; the
/// returned set is ready for [`simulate_with_modes`] and offset scans.
pub fn prepare_modes(
    profile: &IndexProfile,
    wavelength_um: f64,
    max_modes: usize,
    opts: &SimOptions,
) -> Result<WaveguideModeSet> {
    let set = solve_modes_with(profile, wavelength_um, max_modes, &opts.solver)?;
    group_indices(profile, wavelength_um, set, &opts.solver, &opts.group)
}

/// Pushes one launch through a prepared mode set: coupling, loss, impulse
/// response and bandwidth.
pub fn simulate_with_modes(
    modes: &WaveguideModeSet,
    launch: &LaunchSpec,
    loss: &LossModel,
    length_m: f64,
    opts: &SimOptions,
) -> Result<ChannelResponse> {
    let n_group = modes
        .n_group
        .as_ref()
        .ok_or_else(|| Error::invalid("mode set is missing group indices"))?;
    let c = coupling_matrix(modes, launch)?;
    let source = ModePowerDistribution::new(launch.source_powers())?;
    let coupled = waveguide_mpd(&c, &source)?;
    let t = delays(n_group, length_m);
    let mut resp =
        ChannelResponse::from_impulse(&coupled.mpd, loss, &t, opts.bin_width_ps, length_m)?;
    resp.coupled_power = coupled.total;
    resp.fill_bandwidth(&opts.bandwidth)?;
    Ok(resp)
}

/// Full pipeline from a profile: solve modes, group indices, couple the
/// launch, bin delays and transform.
pub fn simulate_link(
    profile: &IndexProfile,
    wavelength_um: f64,
    length_m: f64,
    launch: &LaunchSpec,
    loss: &LossModel,
    opts: &SimOptions,
) -> Result<ChannelResponse> {
    let modes = prepare_modes(profile, wavelength_um, DEFAULT_MAX_MODES, opts)?;
    simulate_with_modes(&modes, launch, loss, length_m, opts)
}

/// One row of an offset scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub offset_um: (f64, f64),
    pub f3db_ghz: f64,
    pub nyquist_limited: bool,
    pub blp_ghz_m: f64,
    /// Received power relative to the scan maximum, dB.
    pub coupled_power_db: f64,
    /// Absolute received (post-loss) power fraction.
    pub received_power: f64,
}

/// Runs the launch across a list of offsets against one prepared mode set.
/// Rows come back in input order; received power is normalized to the scan
/// maximum.
pub fn scan_offsets(
    modes: &WaveguideModeSet,
    launch_template: &LaunchSpec,
    loss: &LossModel,
    length_m: f64,
    offsets: &[(f64, f64)],
    opts: &SimOptions,
) -> Result<Vec<ScanRow>> {
    if offsets.is_empty() {
        return Err(Error::invalid("offset scan needs at least one offset"));
    }
    let results: Vec<Result<ScanRow>> = offsets
        .par_iter()
        .map(|&offset| {
            let launch = launch_template.with_offset(offset);
            let resp = simulate_with_modes(modes, &launch, loss, length_m, opts)?;
            Ok(ScanRow {
                offset_um: offset,
                f3db_ghz: resp.f3db_ghz,
                nyquist_limited: resp.nyquist_limited,
                blp_ghz_m: resp.blp_ghz_m,
                coupled_power_db: f64::NAN,
                received_power: resp.surviving_power,
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    let pmax = rows.iter().map(|r| r.received_power).fold(0.0f64, f64::max);
    if !(pmax > 0.0) {
        return Err(Error::NoPropagatingPower);
    }
    for r in &mut rows {
        r.coupled_power_db = if r.received_power > 0.0 {
            10.0 * (r.received_power / pmax).log10()
        } else {
            f64::NEG_INFINITY
        };
    }
    Ok(rows)
}

/// Fits the step loss model to measured normalized received power versus
/// offset: grid search over the cutoff count, minimum RMSE in dB, ties to
/// the lowest cutoff. Returns the model and its RMSE.
pub fn fit_loss_model(
    measured: &[((f64, f64), f64)],
    modes: &WaveguideModeSet,
    launch_template: &LaunchSpec,
    scan_range: &[(f64, f64)],
) -> Result<(LossModel, f64)> {
    if measured.len() < 3 {
        return Err(Error::invalid(format!(
            "loss fit needs at least 3 measured points, got {}",
            measured.len()
        )));
    }
    if scan_range.is_empty() {
        return Err(Error::invalid("empty scan range"));
    }
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in scan_range {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let eps = 1e-9;
    for &((x, y), _) in measured {
        if x < xmin - eps || x > xmax + eps || y < ymin - eps || y > ymax + eps {
            return Err(Error::invalid(format!(
                "measured offset ({x}, {y}) outside the scan range \
                 [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
    }

    let n = modes.len();
    if n == 0 {
        return Err(Error::invalid("mode set is empty"));
    }
    // Cumulative per-offset mode powers: received(k) = Σ_{i<k} p_i.
    let cumulative: Vec<Vec<f64>> = measured
        .par_iter()
        .map(|&((x, y), _)| {
            let launch = launch_template.with_offset((x, y));
            let c = coupling_matrix(modes, &launch)?;
            let source = ModePowerDistribution::new(launch.source_powers())?;
            let coupled = waveguide_mpd(&c, &source)?;
            let mut cum = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            cum.push(0.0);
            for &p in coupled.mpd.powers() {
                acc += p;
                cum.push(acc);
            }
            Ok(cum)
        })
        .collect::<Vec<Result<Vec<f64>>>>()
        .into_iter()
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let meas_max =
        measured.iter().map(|&(_, db)| db).fold(f64::NEG_INFINITY, f64::max);
    let meas_norm: Vec<f64> = measured.iter().map(|&(_, db)| db - meas_max).collect();

    let floor_db = -300.0;
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=n {
        let powers: Vec<f64> = cumulative.iter().map(|cum| cum[k]).collect();
        let pmax = powers.iter().copied().fold(0.0f64, f64::max);
        if !(pmax > 0.0) {
            continue;
        }
        let mut se = 0.0;
        for (&p, &m_db) in powers.iter().zip(&meas_norm) {
            let sim_db = if p > 0.0 { 10.0 * (p / pmax).log10() } else { floor_db };
            let d = sim_db - m_db;
            se += d * d;
        }
        let rmse = (se / measured.len() as f64).sqrt();
        if best.map_or(true, |(_, b)| rmse < b) {
            best = Some((k, rmse));
        }
    }
    let (k, rmse) =
        best.ok_or_else(|| Error::NonConvergence("no cutoff yields received power".into()))?;
    Ok((LossModel::step(k), rmse))
}
