//! Experiment configuration files.
//!
//! A config is one JSON object: `problem`, `seed`, optional `output_dir` and a
//! problem-specific `settings` object. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use inversa_core::logistic::{FitMethod, FitOptions, LogisticParams, LossMode, NoiseSpec};
use inversa_core::pme::{BetaFitOptions, BetaMethod, FtcsBenchmark, HeatScheme, PmeSolver};
use inversa_pinn::experiments::{LogisticDirectPinn, LogisticInversePinn, PmePinn};
use inversa_pinn::loss::Exponent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.to_string(), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LogisticDirect,
    LogisticInverse,
    PmeDirect,
    PmeInverse,
    PinnLogisticDirect,
    PinnLogisticInverse,
    PinnPmeDirect,
    PinnPmeInverse,
    HeatBench,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    problem: ProblemKind,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default = "empty_object")]
    settings: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Forward solve by fixed-step RK4 and by adaptive DP45, both against the closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticDirectSettings {
    pub params: LogisticParams,
    pub t_end: f64,
    #[serde(default = "default_rk4_steps")]
    pub rk4_steps: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_rk4_steps() -> usize {
    100
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}

/// Parameter recovery from synthetic logistic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticInverseSettings {
    /// Generating parameters; `K`, `p0` and `t0` are also the model's known values.
    pub truth: LogisticParams,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub m: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_mode")]
    pub mode: LossMode,
    pub method: FitMethod,
    /// Starting point in the mode's coordinates.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    /// Alternative to `init`: start at `factor · r_true` with the true `K`
    /// (or `ln K`).
    #[serde(default)]
    pub init_factor: Option<f64>,
    #[serde(default)]
    pub options: FitOptions,
}

fn default_train_fraction() -> f64 {
    0.5
}
fn default_mode() -> LossMode {
    LossMode::ROnly
}

impl LogisticInverseSettings {
    pub fn initial_point(&self) -> Vec<f64> {
        if let Some(init) = &self.init {
            return init.clone();
        }
        let r = self.init_factor.unwrap_or(1.0) * self.truth.r;
        match self.mode {
            LossMode::ROnly => vec![r],
            LossMode::RAndK => vec![r, self.truth.k],
            LossMode::RAndLogK => vec![r, self.truth.k.ln()],
        }
    }
}

/// Implicit Newton PME solve with Barenblatt initial and boundary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmeDirectSettings {
    pub beta: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "default_pme_intervals")]
    pub n_intervals: usize,
    #[serde(default = "default_pme_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_jac_h")]
    pub jac_h: f64,
    /// Also solve the heat equation by backward Euler with the same data and
    /// report the largest difference (meaningful for `beta = 1`).
    #[serde(default)]
    pub compare_backward_euler: bool,
}

fn one() -> f64 {
    1.0
}
fn default_pme_intervals() -> usize {
    100
}
fn default_pme_dt() -> f64 {
    0.01
}
fn default_newton_tol() -> f64 {
    1e-6
}
fn default_newton_max_iter() -> usize {
    20
}
fn default_jac_h() -> f64 {
    1e-6
}

/// Field the exponent is recovered from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Exact Barenblatt profile (β = 3) on `[-1, 1] × [0, t_end]`.
    Barenblatt {
        #[serde(default = "one")]
        delta: f64,
        #[serde(default = "default_pme_intervals")]
        n_intervals: usize,
        #[serde(default = "default_pme_dt")]
        dt: f64,
        #[serde(default = "one")]
        t_end: f64,
    },
    /// Explicit-scheme run at a known exponent.
    Ftcs(FtcsBenchmark),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmeInverseSettings {
    pub reference: ReferenceSpec,
    pub beta0: f64,
    #[serde(default = "default_beta_bounds")]
    pub bounds: [f64; 2],
    #[serde(default = "PmeSolver::newton")]
    pub solver: PmeSolver,
    pub method: BetaMethod,
    #[serde(default)]
    pub options: BetaFitOptions,
}

fn default_beta_bounds() -> [f64; 2] {
    [1.1, 10.0]
}

/// Heat-scheme convergence and stability study on `sin(πx)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatBenchSettings {
    pub n_intervals: usize,
    pub t_end: f64,
    pub schemes: Vec<HeatScheme>,
    /// Coarsest time step; each further level halves it.
    pub tau: f64,
    pub levels: usize,
    /// Forward Euler runs at `τ = factor · h²`.
    pub fe_factors: Vec<f64>,
    pub fe_steps: usize,
}

impl Default for HeatBenchSettings {
    fn default() -> Self {
        Self {
            n_intervals: 50,
            t_end: 0.1,
            schemes: vec![HeatScheme::CrankNicolson, HeatScheme::BackwardEuler],
            tau: 0.01,
            levels: 3,
            fe_factors: vec![0.4, 0.6],
            fe_steps: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Settings {
    LogisticDirect(LogisticDirectSettings),
    LogisticInverse(LogisticInverseSettings),
    PmeDirect(PmeDirectSettings),
    PmeInverse(PmeInverseSettings),
    PinnLogisticDirect(LogisticDirectPinn),
    PinnLogisticInverse(LogisticInversePinn),
    PinnPme(PmePinn),
    HeatBench(HeatBenchSettings),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub settings: Settings,
}

fn parse_settings<T: DeserializeOwned>(value: &Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { "settings".to_string() } else { format!("settings.{inner}") };
        ConfigError::at(&path, e.into_inner().to_string())
    })
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::at(path, format!("must be positive and finite, got {v}")))
    }
}

fn core_check(path: &str, r: inversa_core::Result<()>) -> Result<(), ConfigError> {
    r.map_err(|e| ConfigError::at(path, e.to_string()))
}

/// Parses and validates a config value.
pub fn parse_config(value: &Value) -> Result<ExperimentConfig, ConfigError> {
    let env: Envelope = serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(&path, e.into_inner().to_string())
    })?;
    let s = &env.settings;
    let settings = match env.problem {
        ProblemKind::LogisticDirect => {
            let st: LogisticDirectSettings = parse_settings(s)?;
            core_check("settings.params", st.params.validate())?;
            if !(st.t_end > st.params.t0) {
                return Err(ConfigError::at("settings.t_end", "must exceed params.t0"));
            }
            if st.rk4_steps == 0 {
                return Err(ConfigError::at("settings.rk4_steps", "must be at least 1"));
            }
            positive("settings.rtol", st.rtol)?;
            positive("settings.atol", st.atol)?;
            Settings::LogisticDirect(st)
        }
        ProblemKind::LogisticInverse => {
            let st: LogisticInverseSettings = parse_settings(s)?;
            core_check("settings.truth", st.truth.validate())?;
            core_check("settings.noise", st.noise.validate())?;
            if st.init.is_some() && st.init_factor.is_some() {
                return Err(ConfigError::at("settings.init", "give either init or init_factor, not both"));
            }
            if let Some(init) = &st.init {
                if init.len() != st.mode.dim() {
                    return Err(ConfigError::at("settings.init", format!("mode needs {} entries", st.mode.dim())));
                }
            }
            if st.m < 2 {
                return Err(ConfigError::at("settings.m", "need at least 2 samples"));
            }
            if !(st.t_end > st.t_start) {
                return Err(ConfigError::at("settings.t_end", "must exceed t_start"));
            }
            if !(st.train_fraction > 0.0 && st.train_fraction <= 1.0) {
                return Err(ConfigError::at("settings.train_fraction", "must lie in (0, 1]"));
            }
            Settings::LogisticInverse(st)
        }
        ProblemKind::PmeDirect => {
            let st: PmeDirectSettings = parse_settings(s)?;
            positive("settings.beta", st.beta)?;
            positive("settings.delta", st.delta)?;
            positive("settings.dt", st.dt)?;
            positive("settings.t_end", st.t_end)?;
            if st.n_intervals < 2 {
                return Err(ConfigError::at("settings.n_intervals", "need at least 2 intervals"));
            }
            Settings::PmeDirect(st)
        }
        ProblemKind::PmeInverse => {
            let st: PmeInverseSettings = parse_settings(s)?;
            positive("settings.beta0", st.beta0)?;
            if !(st.bounds[0] < st.bounds[1]) {
                return Err(ConfigError::at("settings.bounds", "lower bound must be below upper bound"));
            }
            if let ReferenceSpec::Barenblatt { delta, dt, t_end, .. } = st.reference {
                positive("settings.reference.delta", delta)?;
                positive("settings.reference.dt", dt)?;
                positive("settings.reference.t_end", t_end)?;
            }
            Settings::PmeInverse(st)
        }
        ProblemKind::PinnLogisticDirect => {
            let mut st: LogisticDirectPinn = parse_settings(s)?;
            core_check("settings.params", st.params.validate())?;
            st.schedule.seed = env.seed;
            Settings::PinnLogisticDirect(st)
        }
        ProblemKind::PinnLogisticInverse => {
            let mut st: LogisticInversePinn = parse_settings(s)?;
            core_check("settings.params", st.params.validate())?;
            st.schedule.seed = env.seed;
            Settings::PinnLogisticInverse(st)
        }
        ProblemKind::PinnPmeDirect | ProblemKind::PinnPmeInverse => {
            let mut st: PmePinn = parse_settings(s)?;
            let trainable = matches!(st.exponent, Exponent::Trainable { .. });
            if trainable != (env.problem == ProblemKind::PinnPmeInverse) {
                return Err(ConfigError::at(
                    "settings.exponent",
                    "pinn_pme_inverse needs a trainable exponent, pinn_pme_direct a fixed one",
                ));
            }
            if trainable && st.measurements.is_none() {
                return Err(ConfigError::at("settings.measurements", "the inverse problem needs measurements"));
            }
            st.schedule.seed = env.seed;
            Settings::PinnPme(st)
        }
        ProblemKind::HeatBench => {
            let st: HeatBenchSettings = parse_settings(s)?;
            positive("settings.tau", st.tau)?;
            positive("settings.t_end", st.t_end)?;
            if st.levels < 2 {
                return Err(ConfigError::at("settings.levels", "need at least 2 levels for a ratio"));
            }
            Settings::HeatBench(st)
        }
    };
    if let Settings::PinnLogisticDirect(p) = &settings {
        check_schedule(&p.schedule)?;
    }
    if let Settings::PinnLogisticInverse(p) = &settings {
        check_schedule(&p.schedule)?;
    }
    if let Settings::PinnPme(p) = &settings {
        check_schedule(&p.schedule)?;
    }
    Ok(ExperimentConfig { problem: env.problem, seed: env.seed, output_dir: env.output_dir, settings })
}

fn check_schedule(s: &inversa_pinn::TrainSchedule) -> Result<(), ConfigError> {
    s.validate().map_err(|e| ConfigError::at("settings.schedule", e.to_string()))
}

pub fn read_config_value(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::at("", format!("not valid JSON: {e}")))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config(&read_config_value(path)?)
}
