//! Experiment configuration and derived run parameters.
//!
//! `ExperimentConfig` is the JSON-facing schema consumed by the CLI; defaults
//! reproduce the reference scenario (32 adjacent bands of 33 subcarriers at
//! 312.5 kHz spacing, 3 paths, SNR 10 and 20 dB, 1000 trials). `resolve`
//! validates invariants and fills in the derived grid sizes and tolerances.

use crate::error::{Error, Result};
use crate::signal::BandPlan;
use crate::solver::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandPlanConfig {
    pub num_bands: usize,
    pub subcarriers_per_band: usize,
    pub subcarrier_spacing_hz: f64,
    pub first_carrier_hz: f64,
    /// Explicit carrier list; overrides adjacency when present.
    pub carrier_freqs_hz: Option<Vec<f64>>,
}

impl Default for BandPlanConfig {
    fn default() -> Self {
        BandPlanConfig {
            num_bands: 32,
            subcarriers_per_band: 33,
            subcarrier_spacing_hz: 312_500.0,
            first_carrier_hz: 5.18e9,
            carrier_freqs_hz: None,
        }
    }
}

impl BandPlanConfig {
    pub fn build(&self) -> Result<BandPlan> {
        match &self.carrier_freqs_hz {
            Some(carriers) => BandPlan::new(
                self.subcarriers_per_band,
                self.subcarrier_spacing_hz,
                carriers.clone(),
            ),
            None => BandPlan::adjacent(
                self.num_bands,
                self.subcarriers_per_band,
                self.subcarrier_spacing_hz,
                self.first_carrier_hz,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub rel_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let base = SolverConfig::default();
        SolverSettings {
            max_iterations: base.max_iterations,
            rel_tolerance: base.rel_tolerance,
        }
    }
}

impl SolverSettings {
    pub fn build(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations,
            rel_tolerance: self.rel_tolerance,
            ..SolverConfig::default()
        }
    }
}

/// Regularizer multipliers; the physical regularizers scale these by the
/// noise level (`rho = c_rho * sigma * sqrt(2 ln L)` and analogues).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizerMultipliers {
    pub c_rho: f64,
    pub c_lambda: f64,
    pub c_lambda_b: f64,
}

impl Default for RegularizerMultipliers {
    fn default() -> Self {
        // Values picked by the calibrate subcommand on the default scenario.
        RegularizerMultipliers {
            c_rho: 0.5,
            c_lambda: 0.5,
            c_lambda_b: 0.5,
        }
    }
}

/// Either fixed multipliers or a request to calibrate them before running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegularizerSpec {
    Mode(String),
    Fixed(RegularizerMultipliers),
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        RegularizerSpec::Fixed(RegularizerMultipliers::default())
    }
}

impl RegularizerSpec {
    pub fn is_calibrate(&self) -> Result<bool> {
        match self {
            RegularizerSpec::Fixed(_) => Ok(false),
            RegularizerSpec::Mode(s) if s == "calibrate" => Ok(true),
            RegularizerSpec::Mode(other) => Err(Error::InvalidConfig(format!(
                "unknown regularizer mode {other:?}; use \"calibrate\" or an object with c_rho/c_lambda/c_lambda_b"
            ))),
        }
    }

    pub fn multipliers(&self) -> RegularizerMultipliers {
        match self {
            RegularizerSpec::Fixed(m) => *m,
            RegularizerSpec::Mode(_) => RegularizerMultipliers::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GridSettings {
    /// Per-band delay dictionary size L; default 3 N.
    pub oversampling: Option<usize>,
    /// Lag grid size G; default 3 M N.
    pub autocorr: Option<usize>,
    /// Baseline grid size over [0, 2 tau_max]; default keeps 3 M points per
    /// baseline alias period, i.e. round(3 M * 2 tau_max * fs * N).
    pub baseline: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub band_plan: BandPlanConfig,
    pub num_paths: usize,
    pub tau_max_s: f64,
    /// Default 0.2 / fs.
    pub delta_max_s: Option<f64>,
    /// Power-delay decay constant; default tau_max / 2.
    pub decay_constant_s: Option<f64>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub solver: SolverSettings,
    pub regularizers: RegularizerSpec,
    pub grids: GridSettings,
    /// Support threshold as a fraction of the peak lag coefficient.
    pub support_threshold_frac: f64,
    /// Lag matching tolerance in units of the lag grid step.
    pub lag_tolerance_steps: f64,
    /// First-delay bound of the shift search; default tau_max.
    pub tau_bar_s: Option<f64>,
    /// Shift-search step as a fraction of the lag grid step.
    pub shift_step_divisor: f64,
    /// Peak threshold fraction of the baseline's first-component rule.
    pub baseline_peak_frac: f64,
    /// Compare squared spectra without the global-phase alignment.
    pub raw_shift_cost: bool,
    /// Training trials used by the calibrate subcommand.
    pub calibration_trials: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            band_plan: BandPlanConfig::default(),
            num_paths: 3,
            tau_max_s: 40e-9,
            delta_max_s: None,
            decay_constant_s: None,
            snr_db: vec![10.0, 20.0],
            trials: 1000,
            seed: 1,
            solver: SolverSettings::default(),
            regularizers: RegularizerSpec::default(),
            grids: GridSettings::default(),
            support_threshold_frac: 0.05,
            lag_tolerance_steps: 1.5,
            tau_bar_s: None,
            shift_step_divisor: 4.0,
            baseline_peak_frac: 0.1,
            raw_shift_cost: false,
            calibration_trials: 24,
        }
    }
}

/// Validated, fully derived run parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSetup {
    #[serde(skip)]
    pub plan: BandPlan,
    pub num_paths: usize,
    pub tau_max_s: f64,
    pub delta_max_s: f64,
    pub decay_constant_s: f64,
    pub oversampling: usize,
    pub autocorr_grid: usize,
    pub baseline_grid: usize,
    pub lag_grid_step_s: f64,
    pub eta_s: f64,
    pub tau_bar_s: f64,
    pub shift_step_s: f64,
    pub support_threshold_frac: f64,
    pub baseline_peak_frac: f64,
    pub phase_aligned: bool,
    pub multipliers: RegularizerMultipliers,
    #[serde(skip)]
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<ResolvedSetup> {
        let plan = self.band_plan.build()?;
        if self.num_paths == 0 {
            return Err(Error::InvalidConfig("num_paths must be at least 1".into()));
        }
        if !(self.tau_max_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_max must be positive, got {}",
                self.tau_max_s
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trial count must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("need at least one SNR value".into()));
        }
        if !(self.support_threshold_frac > 0.0 && self.support_threshold_frac < 1.0) {
            return Err(Error::InvalidConfig(
                "support_threshold_frac must lie in (0, 1)".into(),
            ));
        }

        let fs = plan.subcarrier_spacing_hz();
        let delta_max_s = self.delta_max_s.unwrap_or(0.2 / fs);
        if !(self.tau_max_s + delta_max_s < 1.0 / fs) {
            return Err(Error::InvalidConfig(format!(
                "tau_max + delta_max = {:e} s must stay below the symbol period {:e} s",
                self.tau_max_s + delta_max_s,
                1.0 / fs
            )));
        }
        let decay_constant_s = self.decay_constant_s.unwrap_or(self.tau_max_s / 2.0);
        if !(decay_constant_s > 0.0) {
            return Err(Error::InvalidConfig(
                "decay constant must be positive".into(),
            ));
        }

        let n = plan.subcarriers_per_band();
        let mn = plan.total_samples();
        let oversampling = self.grids.oversampling.unwrap_or(3 * n);
        if oversampling < n {
            return Err(Error::InvalidConfig(format!(
                "oversampling {oversampling} must be at least N = {n}"
            )));
        }
        let autocorr_grid = self.grids.autocorr.unwrap_or(3 * mn);
        if autocorr_grid < mn {
            return Err(Error::InvalidConfig(format!(
                "autocorr grid {autocorr_grid} must be at least M*N = {mn}"
            )));
        }
        let baseline_grid = self.grids.baseline.unwrap_or_else(|| {
            let periods = 2.0 * self.tau_max_s * fs * n as f64;
            ((3 * plan.num_bands()) as f64 * periods).round().max(plan.num_bands() as f64)
                as usize
        });

        let lag_grid_step_s = self.tau_max_s / autocorr_grid as f64;
        let eta_s = self.lag_tolerance_steps * lag_grid_step_s;
        let tau_bar_s = self.tau_bar_s.unwrap_or(self.tau_max_s);
        if !(tau_bar_s > 0.0) {
            return Err(Error::InvalidConfig("tau_bar must be positive".into()));
        }
        // The reciprocal vector samples the squared spectrum at the band
        // spacing, so shifts are only identifiable modulo 1 / (2 N fs) for
        // seamlessly tiled bands.
        let alias_period = 1.0 / (2.0 * n as f64 * fs);
        if self.band_plan.carrier_freqs_hz.is_none() && tau_bar_s > alias_period {
            log::warn!(
                "tau_bar {tau_bar_s:e} s exceeds the unambiguous shift window {alias_period:e} s; \
                 time-of-flight estimates will alias"
            );
        }
        let shift_step_s = lag_grid_step_s / self.shift_step_divisor;
        if !(shift_step_s > 0.0 && shift_step_s <= lag_grid_step_s) {
            return Err(Error::InvalidConfig(
                "shift_step_divisor must be at least 1".into(),
            ));
        }

        Ok(ResolvedSetup {
            plan,
            num_paths: self.num_paths,
            tau_max_s: self.tau_max_s,
            delta_max_s,
            decay_constant_s,
            oversampling,
            autocorr_grid,
            baseline_grid,
            lag_grid_step_s,
            eta_s,
            tau_bar_s,
            shift_step_s,
            support_threshold_frac: self.support_threshold_frac,
            baseline_peak_frac: self.baseline_peak_frac,
            phase_aligned: !self.raw_shift_cost,
            multipliers: self.regularizers.multipliers(),
            solver: self.solver.build(),
        })
    }

    /// Stable hash of the estimation-relevant fields, used to key persisted
    /// calibration records.
    pub fn calibration_key(&self) -> String {
        let plan = format!(
            "{}|{}|{}|{}|{:?}",
            self.band_plan.num_bands,
            self.band_plan.subcarriers_per_band,
            self.band_plan.subcarrier_spacing_hz,
            self.band_plan.first_carrier_hz,
            self.band_plan.carrier_freqs_hz
        );
        let body = format!(
            "{plan}|{}|{}|{:?}|{:?}|{:?}|{}|{}|{}|{}|{}",
            self.num_paths,
            self.tau_max_s,
            self.delta_max_s,
            self.decay_constant_s,
            self.grids,
            self.support_threshold_frac,
            self.lag_tolerance_steps,
            self.shift_step_divisor,
            self.baseline_peak_frac,
            self.solver.max_iterations,
        );
        // FNV-1a, stable across platforms.
        let mut hash: u64 = 0xcbf29ce484222325;
        for b in body.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        format!("{hash:016x}")
    }
}
