//! Command-line front end: scenario configs in, CSV/JSON reports out.

mod scenario;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use modalsim_core::budget;
use modalsim_core::dispersion::{fit_loss_model, prepare_modes, scan_offsets, simulate_with_modes};
use modalsim_core::error::ErrorClass;
use modalsim_core::fibermodes::{solve_lp_modes, Orientation};
use modalsim_core::pulse::{
    fit_autocorrelation, link_bandwidth, DeconvolutionOptions, PulseFit, PulseShape, Trace,
};

use scenario::{BudgetConfig, ConfigError, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "modalsim",
    version,
    about = "Modal-dispersion simulation for multimode optical waveguides"
)]
struct Cli {
    /// Cap the scan worker pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed for synthetic-trace generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve waveguide modes and export mode_index, n_eff, n_group CSV.
    Modes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump each mode field in the profile CSV grid format.
        #[arg(long)]
        fields_dir: Option<PathBuf>,
    },
    /// Solve LP modes of a circular fiber and export m, n, orientation, pmn, n_eff CSV.
    FiberModes {
        #[arg(long)]
        core_radius_um: f64,
        #[arg(long)]
        na: f64,
        #[arg(long, default_value_t = 1.4525)]
        n_clad: f64,
        /// Power-law exponent, or "step".
        #[arg(long, default_value = "2")]
        alpha: String,
        #[arg(long)]
        wavelength_um: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offset-scan map: offset_x_um, offset_y_um, f3db_ghz, blp_ghz_m, coupled_power_db.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-launch channel response report (JSON).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional impulse-response dump (t_ps, h).
        #[arg(long)]
        impulse_csv: Option<PathBuf>,
    },
    /// Fit the step loss model to measured received power versus offset.
    FitLoss {
        #[arg(long)]
        config: PathBuf,
        /// CSV: offset_x_um[,offset_y_um],power_db.
        #[arg(long)]
        measured: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an autocorrelation trace; optionally deconvolve a back-to-back
    /// trace into a link bandwidth.
    FitPulse {
        /// Trace CSV (delay_ps, amplitude).
        #[arg(long)]
        trace: PathBuf,
        /// Back-to-back trace CSV for link-bandwidth extraction.
        #[arg(long)]
        b2b: Option<PathBuf>,
        /// Flag fits whose RMSE exceeds this fraction of the fitted scale.
        #[arg(long, default_value_t = 0.25)]
        rmse_flag_threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Link power budget report from a JSON spec.
    Budget {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic autocorrelation trace (test utility).
    GenTrace {
        /// sech2 | gaussian | lorentzian
        #[arg(long)]
        shape: String,
        #[arg(long)]
        pulse_fwhm_ps: f64,
        /// Additive white noise level; omit for a clean trace.
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long, default_value_t = 0.3)]
        baseline: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum CliError {
    Config(ConfigError),
    Core(modalsim_core::Error),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation | ErrorClass::Io => 1,
                ErrorClass::Numerical => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}
impl From<modalsim_core::Error> for CliError {
    fn from(e: modalsim_core::Error) -> Self {
        CliError::Core(e)
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// f64 that serializes infinities as the strings "inf" / "-inf".
#[derive(Clone, Copy)]
struct MaybeInf(f64);

impl Serialize for MaybeInf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

fn fmt_maybe_inf(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    w.write_all(b"\n")?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Modes { config, out, fields_dir } => cmd_modes(config, out, fields_dir.as_ref()),
        Command::FiberModes { core_radius_um, na, n_clad, alpha, wavelength_um, out } => {
            cmd_fiber_modes(*core_radius_um, *na, *n_clad, alpha, *wavelength_um, out)
        }
        Command::Scan { config, out } => cmd_scan(config, out),
        Command::Simulate { config, out, impulse_csv } => {
            cmd_simulate(config, out, impulse_csv.as_ref())
        }
        Command::FitLoss { config, measured, out } => cmd_fit_loss(config, measured, out),
        Command::FitPulse { trace, b2b, rmse_flag_threshold, out } => {
            cmd_fit_pulse(trace, b2b.as_ref(), *rmse_flag_threshold, out)
        }
        Command::Budget { config, out } => cmd_budget(config, out),
        Command::GenTrace { shape, pulse_fwhm_ps, snr_db, samples, baseline, out } => {
            cmd_gen_trace(shape, *pulse_fwhm_ps, *snr_db, *samples, *baseline, cli.seed, out)
        }
    }
}

fn cmd_modes(
    config: &PathBuf,
    out: &PathBuf,
    fields_dir: Option<&PathBuf>,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let profile = cfg.build_profile()?;
    let opts = cfg.sim_options();
    let modes = prepare_modes(&profile, cfg.wavelength_um, cfg.solver.max_modes, &opts)?;
    let n_group = modes.n_group.as_ref().expect("prepared");

    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "mode_index,n_eff,n_group")?;
    for (m, ng) in modes.modes.iter().zip(n_group) {
        writeln!(w, "{},{},{}", m.index, m.n_eff, ng)?;
    }
    drop(w);

    if let Some(dir) = fields_dir {
        std::fs::create_dir_all(dir)?;
        let g = modes.grid();
        for m in &modes.modes {
            let path = dir.join(format!("mode_{:03}.csv", m.index));
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "# {},{},{},{},{}", g.x0, g.y0, g.dx, g.dy, cfg.wavelength_um)?;
            for row in m.field.rows() {
                let line =
                    row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
                writeln!(w, "{line}")?;
            }
        }
    }
    Ok(())
}

fn cmd_fiber_modes(
    core_radius_um: f64,
    na: f64,
    n_clad: f64,
    alpha: &str,
    wavelength_um: f64,
    out: &PathBuf,
) -> Result<(), CliError> {
    let grading = if alpha == "step" {
        modalsim_core::profile::Grading::Step
    } else {
        let a: f64 = alpha
            .parse()
            .map_err(|_| ConfigError(format!("alpha: expected a number or \"step\", got {alpha:?}")))?;
        modalsim_core::profile::Grading::Power(a)
    };
    let spec = modalsim_core::profile::RadialFiberSpec::new(core_radius_um, na, n_clad, grading)?;
    let set = solve_lp_modes(&spec, wavelength_um)?;
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "m,n,orientation,pmn,n_eff")?;
    for mode in &set.modes {
        let orient = match mode.orientation {
            Orientation::Cos => "cos",
            Orientation::Sin => "sin",
        };
        writeln!(w, "{},{},{},{},{}", mode.m, mode.n, orient, mode.pmn, mode.n_eff)?;
    }
    Ok(())
}

fn cmd_scan(config: &PathBuf, out: &PathBuf) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let profile = cfg.build_profile()?;
    let launch = cfg.build_launch()?;
    let loss = cfg.build_loss();
    let offsets = cfg.scan_offsets()?;
    let opts = cfg.sim_options();
    let modes = prepare_modes(&profile, cfg.wavelength_um, cfg.solver.max_modes, &opts)?;
    let rows = scan_offsets(&modes, &launch, &loss, cfg.length_m, &offsets, &opts)?;

    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "offset_x_um,offset_y_um,f3db_ghz,blp_ghz_m,coupled_power_db")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.offset_um.0,
            r.offset_um.1,
            fmt_maybe_inf(r.f3db_ghz),
            fmt_maybe_inf(r.blp_ghz_m),
            fmt_maybe_inf(r.coupled_power_db)
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport {
    wavelength_um: f64,
    length_m: f64,
    n_modes: usize,
    coupled_power: f64,
    surviving_power: f64,
    f3db_ghz: MaybeInf,
    blp_ghz_m: MaybeInf,
    nyquist_limited: bool,
    bin_width_ps: f64,
    delay_span_ps: f64,
}

fn cmd_simulate(
    config: &PathBuf,
    out: &PathBuf,
    impulse_csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let profile = cfg.build_profile()?;
    let launch = cfg.build_launch()?;
    let loss = cfg.build_loss();
    let opts = cfg.sim_options();
    let modes = prepare_modes(&profile, cfg.wavelength_um, cfg.solver.max_modes, &opts)?;
    let resp = simulate_with_modes(&modes, &launch, &loss, cfg.length_m, &opts)?;

    let report = SimulateReport {
        wavelength_um: cfg.wavelength_um,
        length_m: cfg.length_m,
        n_modes: modes.len(),
        coupled_power: resp.coupled_power,
        surviving_power: resp.surviving_power,
        f3db_ghz: MaybeInf(resp.f3db_ghz),
        blp_ghz_m: MaybeInf(resp.blp_ghz_m),
        nyquist_limited: resp.nyquist_limited,
        bin_width_ps: resp.bin_width_ps,
        delay_span_ps: resp.bin_width_ps * (resp.h.len().saturating_sub(1)) as f64,
    };
    write_json(out, &report)?;

    if let Some(path) = impulse_csv {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t_ps,h")?;
        for (k, v) in resp.h.iter().enumerate() {
            writeln!(w, "{},{}", k as f64 * resp.bin_width_ps, v)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FitLossReport {
    cutoff_index: usize,
    rmse_db: f64,
    n_points: usize,
}

fn cmd_fit_loss(config: &PathBuf, measured: &PathBuf, out: &PathBuf) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let profile = cfg.build_profile()?;
    let launch = cfg.build_launch()?;
    let offsets = cfg.scan_offsets()?;
    let opts = cfg.sim_options();

    let text = std::fs::read_to_string(measured)?;
    let mut points: Vec<((f64, f64), f64)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line.starts_with("offset")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|_| {
                CliError::Config(ConfigError(format!(
                    "measured line {}: {s:?} is not a number",
                    k + 1
                )))
            })
        };
        match cols.len() {
            2 => points.push(((parse(cols[0])?, 0.0), parse(cols[1])?)),
            3 => points.push(((parse(cols[0])?, parse(cols[1])?), parse(cols[2])?)),
            n => {
                return Err(CliError::Config(ConfigError(format!(
                    "measured line {}: expected 2 or 3 columns, got {n}",
                    k + 1
                ))))
            }
        }
    }

    let modes = prepare_modes(&profile, cfg.wavelength_um, cfg.solver.max_modes, &opts)?;
    let (loss, rmse) = fit_loss_model(&points, &modes, &launch, &offsets)?;
    write_json(
        out,
        &FitLossReport { cutoff_index: loss.cutoff_index, rmse_db: rmse, n_points: points.len() },
    )
}

#[derive(Serialize)]
struct PulseFitReport {
    shape: &'static str,
    pulse_fwhm_ps: f64,
    rmse: f64,
    baseline: f64,
    scale: f64,
    center_ps: f64,
    high_rmse: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    b2b: Option<Box<PulseFitReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    link_f3db_ghz: Option<MaybeInf>,
}

fn fit_report(fit: &PulseFit, rmse_threshold: f64) -> PulseFitReport {
    PulseFitReport {
        shape: fit.shape.name(),
        pulse_fwhm_ps: fit.pulse_fwhm_ps,
        rmse: fit.rmse,
        baseline: fit.baseline,
        scale: fit.amplitude_scale,
        center_ps: fit.center_ps,
        high_rmse: fit.rmse > rmse_threshold * fit.amplitude_scale.abs().max(1e-300),
        b2b: None,
        link_f3db_ghz: None,
    }
}

fn cmd_fit_pulse(
    trace: &PathBuf,
    b2b: Option<&PathBuf>,
    rmse_threshold: f64,
    out: &PathBuf,
) -> Result<(), CliError> {
    let t = Trace::read_csv(File::open(trace)?)?;
    let fit = fit_autocorrelation(&t)?;
    let mut report = fit_report(&fit, rmse_threshold);
    if let Some(b2b_path) = b2b {
        let tb = Trace::read_csv(File::open(b2b_path)?)?;
        let b2b_fit = fit_autocorrelation(&tb)?;
        let f3db = link_bandwidth(&b2b_fit, &fit, &DeconvolutionOptions::default())?;
        report.b2b = Some(Box::new(fit_report(&b2b_fit, rmse_threshold)));
        report.link_f3db_ghz = Some(MaybeInf(f3db));
    }
    write_json(out, &report)
}

#[derive(Serialize)]
struct BudgetReportJson {
    sensitivity_dbm: f64,
    budget_db: f64,
    path_loss_db: f64,
    margin_db: f64,
    feasible: bool,
}

fn cmd_budget(config: &PathBuf, out: &PathBuf) -> Result<(), CliError> {
    let cfg = BudgetConfig::load(config)?;
    let report = budget::budget(&cfg.to_spec())?;
    write_json(
        out,
        &BudgetReportJson {
            sensitivity_dbm: report.sensitivity_dbm,
            budget_db: report.budget_db,
            path_loss_db: report.path_loss_db,
            margin_db: report.margin_db,
            feasible: report.feasible,
        },
    )
}

fn cmd_gen_trace(
    shape: &str,
    pulse_fwhm_ps: f64,
    snr_db: Option<f64>,
    samples: usize,
    baseline: f64,
    seed: u64,
    out: &PathBuf,
) -> Result<(), CliError> {
    let shape = PulseShape::from_name(shape)?;
    if !(pulse_fwhm_ps > 0.0) {
        return Err(CliError::Config(ConfigError("pulse_fwhm_ps must be positive".into())));
    }
    if samples < 16 {
        return Err(CliError::Config(ConfigError("samples must be at least 16".into())));
    }
    let ac_fwhm = pulse_fwhm_ps * shape.autocorrelation_width_ratio();
    let span = 4.0 * ac_fwhm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_sigma = snr_db.map(|snr| 10f64.powf(-snr / 20.0));

    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "delay_ps,amplitude")?;
    for k in 0..samples {
        let t = -span + 2.0 * span * k as f64 / (samples - 1) as f64;
        let z = t / ac_fwhm;
        let mut v = baseline + ac_value(shape, z);
        if let Some(sigma) = noise_sigma {
            // Box-Muller white noise, amplitude relative to the unit peak.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            v += sigma * g;
        }
        writeln!(w, "{},{}", t, v.max(0.0))?;
    }
    Ok(())
}

/// Unit-peak autocorrelation value at z = delay / AC-FWHM.
fn ac_value(shape: PulseShape, z: f64) -> f64 {
    match shape {
        PulseShape::Gaussian => (-4.0 * 2.0f64.ln() * z * z).exp(),
        PulseShape::Lorentzian => 1.0 / (1.0 + 4.0 * z * z),
        PulseShape::Sech2 => {
            let x = 2.0 * 1.3597924763052964 * z;
            let ax = x.abs();
            if ax < 1e-3 {
                1.0 - 0.4 * x * x
            } else if ax > 350.0 {
                0.0
            } else {
                3.0 * (ax * ax.cosh() - ax.sinh()) / ax.sinh().powi(3)
            }
        }
    }
}
