//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::circulant_approx::{CirculantMethod, DEFAULT_WHITTLE_WINDOW};
use crate::error::{MsgpError, Result};
use crate::gp::{LcgConfig, OptimizerConfig};
use crate::kernels::{Hyperparameters, KernelFamily, KernelSpec};
use crate::projection::Normalization;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Stress1d,
    Accuracy,
    ProjectionRecovery,
    LogdetBenchmark,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Stress1d => "stress1d",
            ExperimentKind::Accuracy => "accuracy",
            ExperimentKind::ProjectionRecovery => "projection_recovery",
            ExperimentKind::LogdetBenchmark => "logdet_benchmark",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CirculantName {
    Whittle,
    Strang,
    Tchan,
    Tyrtyshnikov,
}

impl CirculantName {
    pub fn method(self, window: usize) -> CirculantMethod {
        match self {
            CirculantName::Whittle => CirculantMethod::Whittle { window },
            CirculantName::Strang => CirculantMethod::Strang,
            CirculantName::Tchan => CirculantMethod::TChan,
            CirculantName::Tyrtyshnikov => CirculantMethod::Tyrtyshnikov,
        }
    }
}

impl std::str::FromStr for CirculantName {
    type Err = MsgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whittle" => Ok(CirculantName::Whittle),
            "strang" => Ok(CirculantName::Strang),
            "tchan" => Ok(CirculantName::Tchan),
            "tyrtyshnikov" => Ok(CirculantName::Tyrtyshnikov),
            other => Err(MsgpError::Config(format!("unknown circulant method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = MsgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(MsgpError::Config(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Initial hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub alpha: f64,
    pub noise_std: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Se,
            lengthscale: 1.0,
            signal_variance: 1.0,
            alpha: 1.0,
            noise_std: 0.1,
        }
    }
}

impl KernelConfig {
    pub fn hyper(&self, dims: usize) -> Hyperparameters {
        let mut k = KernelSpec::new(self.family, &vec![self.lengthscale; dims], self.signal_variance);
        k.log_alpha = self.alpha.ln();
        Hyperparameters::new(k, self.noise_std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressConfig {
    /// Optimizer steps per training run; timing covers them and the precomputation.
    pub optimizer_iters: usize,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self { optimizer_iters: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyConfig {
    /// Hyperparameters are learned by the exact GP on a subset of this size
    /// and then shared by every model.
    pub exact_subsample: usize,
    pub slow: bool,
    pub slow_variance_points: usize,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            exact_subsample: 1000,
            slow: true,
            slow_variance_points: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Nodes per projected dimension.
    pub grid_size: usize,
    pub normalization: Normalization,
    /// Generating lengthscale is this times `√D`, so that the target varies
    /// on a unit scale along unit-norm projection directions.
    pub gen_lengthscale_factor: f64,
    /// Random projection initializations tried; the best after
    /// `screen_iters` steps is trained to completion.
    pub restarts: usize,
    pub screen_iters: usize,
    /// Subset size for learning the full-dimensional exact baseline.
    pub exact_subsample: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            grid_size: 50,
            normalization: Normalization::Unit,
            gen_lengthscale_factor: 1.0,
            restarts: 3,
            screen_iters: 15,
            exact_subsample: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogdetConfig {
    pub spacing: f64,
    pub families: Vec<KernelFamily>,
    pub lengthscales: Vec<f64>,
    pub noise_variances: Vec<f64>,
    /// Recompute the reference with a dense Cholesky factor.
    pub dense_reference: bool,
}

impl Default for LogdetConfig {
    fn default() -> Self {
        Self {
            spacing: 0.05,
            families: vec![KernelFamily::Se, KernelFamily::Matern32, KernelFamily::Rq],
            lengthscales: vec![0.5, 1.0],
            noise_variances: vec![0.01, 0.1, 1.0],
            dense_reference: true,
        }
    }
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match Either::deserialize(de)? {
        Either::One(v) => vec![v],
        Either::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n", deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    #[serde(default = "default_m", deserialize_with = "one_or_many")]
    pub m: Vec<usize>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(rename = "D", default = "default_big_d", deserialize_with = "one_or_many")]
    pub big_d: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Observation noise of the generated data.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default = "default_circulant", deserialize_with = "one_or_many")]
    pub circulant: Vec<CirculantName>,
    #[serde(default = "default_window")]
    pub whittle_window: usize,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub solver: LcgConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub stress: StressConfig,
    #[serde(default)]
    pub accuracy: AccuracyConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub logdet: LogdetConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_n() -> Vec<usize> {
    vec![1000]
}
fn default_m() -> Vec<usize> {
    vec![100]
}
fn default_n_test() -> usize {
    1000
}
fn default_n_s() -> usize {
    20
}
fn default_d() -> usize {
    2
}
fn default_big_d() -> Vec<usize> {
    vec![3]
}
fn default_repeats() -> usize {
    1
}
fn default_noise_std() -> f64 {
    0.05
}
fn default_circulant() -> Vec<CirculantName> {
    vec![CirculantName::Whittle]
}
fn default_window() -> usize {
    DEFAULT_WHITTLE_WINDOW
}

/// Command-line replacements for config values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub n: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub n_s: Option<usize>,
    pub seed: Option<u64>,
    pub circulant: Option<CirculantName>,
    pub whittle_window: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self::from_toml_str(&format!("experiment = \"{}\"", experiment.name())).expect("defaults are valid")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| MsgpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| MsgpError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = &o.n {
            self.n = v.clone();
        }
        if let Some(v) = &o.m {
            self.m = v.clone();
        }
        if let Some(v) = o.n_s {
            self.n_s = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.circulant {
            self.circulant = vec![v];
        }
        if let Some(v) = o.whittle_window {
            self.whittle_window = v;
        }
        if let Some(v) = &o.out {
            self.output.path = Some(v.clone());
        }
        if let Some(v) = o.format {
            self.output.format = v;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MsgpError::Config(msg));
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must be a non-empty list of positive sizes".into());
        }
        if self.m.is_empty() || self.m.iter().any(|&m| m < 4) {
            return bad("m must be a non-empty list of sizes of at least 4".into());
        }
        if self.n_test == 0 || self.n_s == 0 || self.d == 0 || self.repeats == 0 {
            return bad("n_test, n_s, d and repeats must be positive".into());
        }
        if self.big_d.is_empty() || self.big_d.iter().any(|&bd| bd < self.d) {
            return bad(format!("every D must be at least d = {}", self.d));
        }
        if self.circulant.is_empty() {
            return bad("at least one circulant method is required".into());
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative".into());
        }
        let k = &self.kernel;
        if !(k.lengthscale > 0.0 && k.signal_variance > 0.0 && k.alpha > 0.0 && k.noise_std > 0.0) {
            return bad("kernel lengthscale, signal_variance, alpha and noise_std must be positive".into());
        }
        if !(self.solver.rel_tol > 0.0) {
            return bad("solver.rel_tol must be positive".into());
        }
        if self.projection.grid_size < 4 || self.projection.restarts == 0 {
            return bad("projection.grid_size must be at least 4 and restarts positive".into());
        }
        let l = &self.logdet;
        if !(l.spacing > 0.0) || l.families.is_empty() || l.lengthscales.is_empty() || l.noise_variances.is_empty() {
            return bad("logdet needs a positive spacing and non-empty families, lengthscales and noise_variances".into());
        }
        if l.lengthscales.iter().chain(&l.noise_variances).any(|v| !(*v > 0.0)) {
            return bad("logdet lengthscales and noise variances must be positive".into());
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<CirculantMethod> {
        self.circulant.iter().map(|c| c.method(self.whittle_window)).collect()
    }
}
