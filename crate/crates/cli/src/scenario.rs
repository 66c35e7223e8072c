//! Scenario configuration: JSON schema and conversion into core types.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use modalsim_core::dispersion::{BandwidthOptions, LossModel, SimOptions};
use modalsim_core::fibermodes::solve_lp_modes;
use modalsim_core::launch::{mpd_preset, LaunchKind, LaunchSpec, ModePowerDistribution, MpdPreset};
use modalsim_core::modesolver::{GroupIndexOptions, SolverOptions};
use modalsim_core::profile::{
    synth_gi_profile, GiProfileSpec, Grading, GradingShape, IndexProfile, RadialFiberSpec,
};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn default_n_clad() -> f64 {
    1.51
}
fn default_step() -> f64 {
    0.25
}
fn default_margin() -> f64 {
    15.0
}
fn default_max_modes() -> usize {
    400
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProfileConfig {
    pub core_width_um: f64,
    pub core_height_um: f64,
    #[serde(default = "default_n_clad")]
    pub n_clad: f64,
    pub delta_n: f64,
    #[serde(default)]
    pub peak_offset_x_um: f64,
    #[serde(default)]
    pub peak_offset_y_um: f64,
    #[serde(default = "default_step")]
    pub step_um: f64,
    #[serde(default = "default_margin")]
    pub margin_um: f64,
}

/// Exactly one of `file` / `synthetic` must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSourceConfig {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticProfileConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub core_radius_um: f64,
    pub na: f64,
    #[serde(default = "default_fiber_n_clad")]
    pub n_clad: f64,
    /// Power-law exponent, or the string "step".
    #[serde(default = "default_alpha")]
    pub alpha: serde_json::Value,
}

fn default_fiber_n_clad() -> f64 {
    1.4525
}
fn default_alpha() -> serde_json::Value {
    serde_json::json!(2.0)
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            core_radius_um: 25.0,
            na: 0.2,
            n_clad: default_fiber_n_clad(),
            alpha: default_alpha(),
        }
    }
}

impl FiberConfig {
    pub fn to_spec(&self) -> Result<RadialFiberSpec, ConfigError> {
        let grading = match &self.alpha {
            serde_json::Value::String(s) if s == "step" => Grading::Step,
            serde_json::Value::Number(n) => {
                Grading::Power(n.as_f64().ok_or_else(|| {
                    ConfigError("fiber.alpha: not a finite number".into())
                })?)
            }
            other => {
                return Err(ConfigError(format!(
                    "fiber.alpha: expected a number or \"step\", got {other}"
                )))
            }
        };
        RadialFiberSpec::new(self.core_radius_um, self.na, self.n_clad, grading)
            .map_err(|e| ConfigError(format!("fiber: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LaunchConfig {
    Gaussian {
        fwhm_um: f64,
        #[serde(default)]
        offset_x_um: f64,
        #[serde(default)]
        offset_y_um: f64,
    },
    Fiber {
        /// "no_mm" or "mm".
        preset: String,
        #[serde(default)]
        fiber: FiberConfig,
        #[serde(default)]
        offset_x_um: f64,
        #[serde(default)]
        offset_y_um: f64,
    },
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    #[default]
    None,
    Step {
        cutoff_index: usize,
    },
}

/// `[start, stop, step]` in µm.
#[derive(Debug, Clone, Deserialize)]
pub struct RangeConfig(pub f64, pub f64, pub f64);

impl RangeConfig {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, ConfigError> {
        let RangeConfig(start, stop, step) = *self;
        if !(step > 0.0) {
            return Err(ConfigError(format!("{name}: step must be positive")));
        }
        if stop < start {
            return Err(ConfigError(format!("{name}: stop below start")));
        }
        let n = ((stop - start) / step).round() as usize + 1;
        Ok((0..n).map(|k| start + k as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub x_um: RangeConfig,
    #[serde(default = "default_y_range")]
    pub y_um: RangeConfig,
}

fn default_y_range() -> RangeConfig {
    RangeConfig(0.0, 0.0, 1.0)
}

impl ScanConfig {
    /// Offsets in row-major order (y outer, x fastest).
    pub fn offsets(&self) -> Result<Vec<(f64, f64)>, ConfigError> {
        let xs = self.x_um.values("scan.x_um")?;
        let ys = self.y_um.values("scan.y_um")?;
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                out.push((x, y));
            }
        }
        if out.is_empty() {
            return Err(ConfigError("scan: empty offset grid".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_modes: usize,
    pub eps_guided: f64,
    pub residual_tol: f64,
    pub clipping_check: bool,
    pub dlambda_um: f64,
    pub material_dn_dlambda: f64,
    pub bin_width_ps: Option<f64>,
    /// 0.5 = optical-power −3 dB convention; 1/√2 = electrical.
    pub bandwidth_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        let g = GroupIndexOptions::default();
        let b = BandwidthOptions::default();
        SolverConfig {
            max_modes: default_max_modes(),
            eps_guided: s.eps_guided,
            residual_tol: s.residual_tol,
            clipping_check: default_true(),
            dlambda_um: g.dlambda_um,
            material_dn_dlambda: 0.0,
            bin_width_ps: None,
            bandwidth_threshold: b.threshold,
        }
    }
}

/// Top-level scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub profile: ProfileSourceConfig,
    pub wavelength_um: f64,
    pub length_m: f64,
    pub launch: LaunchConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.profile.file, &self.profile.synthetic) {
            (Some(_), Some(_)) => {
                return Err(ConfigError(
                    "profile: give exactly one of profile.file / profile.synthetic, got both"
                        .into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError(
                    "profile: give exactly one of profile.file / profile.synthetic".into(),
                ))
            }
            _ => {}
        }
        if !(self.wavelength_um > 0.0) {
            return Err(ConfigError("wavelength_um: must be positive".into()));
        }
        if self.length_m < 0.0 {
            return Err(ConfigError("length_m: must be non-negative".into()));
        }
        match &self.launch {
            LaunchConfig::Gaussian { fwhm_um, .. } if !(*fwhm_um > 0.0) => {
                return Err(ConfigError("launch.fwhm_um: must be positive".into()))
            }
            LaunchConfig::Fiber { preset, .. }
                if preset != "no_mm" && preset != "mm" =>
            {
                return Err(ConfigError(format!(
                    "launch.preset: expected \"no_mm\" or \"mm\", got {preset:?}"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_profile(&self) -> Result<IndexProfile, ConfigError> {
        if let Some(path) = &self.profile.file {
            return IndexProfile::load(path)
                .map_err(|e| ConfigError(format!("profile.file: {e}")));
        }
        let syn = self.profile.synthetic.as_ref().expect("validated");
        synth_gi_profile(&GiProfileSpec {
            core_width_um: syn.core_width_um,
            core_height_um: syn.core_height_um,
            n_clad: syn.n_clad,
            delta_n: syn.delta_n,
            peak_offset_um: (syn.peak_offset_x_um, syn.peak_offset_y_um),
            shape: GradingShape::default(),
            step_um: syn.step_um,
            margin_um: syn.margin_um,
            wavelength_ref_um: self.wavelength_um,
        })
        .map_err(|e| ConfigError(format!("profile.synthetic: {e}")))
    }

    pub fn build_launch(&self) -> Result<LaunchSpec, ConfigError> {
        match &self.launch {
            LaunchConfig::Gaussian { fwhm_um, offset_x_um, offset_y_um } => Ok(LaunchSpec {
                kind: LaunchKind::Gaussian { fwhm_um: *fwhm_um },
                offset_um: (*offset_x_um, *offset_y_um),
            }),
            LaunchConfig::Fiber { preset, fiber, offset_x_um, offset_y_um } => {
                let spec = fiber.to_spec()?;
                let modes = solve_lp_modes(&spec, self.wavelength_um)
                    .map_err(|e| ConfigError(format!("launch.fiber: {e}")))?;
                let kind = match preset.as_str() {
                    "no_mm" => MpdPreset::NoMixer,
                    "mm" => MpdPreset::Mixer,
                    other => {
                        return Err(ConfigError(format!(
                            "launch.preset: expected \"no_mm\" or \"mm\", got {other:?}"
                        )))
                    }
                };
                let mpd: ModePowerDistribution = mpd_preset(kind, &modes)
                    .map_err(|e| ConfigError(format!("launch.preset: {e}")))?;
                Ok(LaunchSpec {
                    kind: LaunchKind::Fiber { modes, mpd },
                    offset_um: (*offset_x_um, *offset_y_um),
                })
            }
        }
    }

    pub fn build_loss(&self) -> LossModel {
        match &self.loss {
            LossConfig::None => LossModel::unrestricted(),
            LossConfig::Step { cutoff_index } => LossModel::step(*cutoff_index),
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            solver: SolverOptions {
                eps_guided: self.solver.eps_guided,
                residual_tol: self.solver.residual_tol,
                clipping_check: self.solver.clipping_check,
                ..SolverOptions::default()
            },
            group: GroupIndexOptions {
                dlambda_um: self.solver.dlambda_um,
                material_dn_dlambda: self.solver.material_dn_dlambda,
            },
            bandwidth: BandwidthOptions {
                threshold: self.solver.bandwidth_threshold,
                ..BandwidthOptions::default()
            },
            bin_width_ps: self.solver.bin_width_ps,
        }
    }

    pub fn scan_offsets(&self) -> Result<Vec<(f64, f64)>, ConfigError> {
        match &self.scan {
            Some(s) => s.offsets(),
            None => Err(ConfigError("scan: missing scan block".into())),
        }
    }
}

/// Budget configuration mirroring the report inputs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub launch_power_dbm: f64,
    pub nep_pw_sqrthz: f64,
    pub rx_bandwidth_ghz: f64,
    #[serde(default)]
    pub q_factor: Option<f64>,
    pub wg_loss_db_per_cm: f64,
    pub length_cm: f64,
    #[serde(default)]
    pub other_losses_db: f64,
}

impl BudgetConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn to_spec(&self) -> modalsim_core::budget::BudgetSpec {
        modalsim_core::budget::BudgetSpec {
            launch_power_dbm: self.launch_power_dbm,
            nep_pw_sqrthz: self.nep_pw_sqrthz,
            rx_bandwidth_ghz: self.rx_bandwidth_ghz,
            q_factor: self.q_factor.unwrap_or(modalsim_core::budget::DEFAULT_Q_FACTOR),
            wg_loss_db_per_cm: self.wg_loss_db_per_cm,
            length_cm: self.length_cm,
            other_losses_db: self.other_losses_db,
        }
    }
}
