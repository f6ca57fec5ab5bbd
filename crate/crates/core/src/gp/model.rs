//! Hyperparameter learning and the trained, serializable model.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lcg::lcg_solve;
use super::likelihood::{nll_grad, SkiConfig};
use super::optimize::{minimize, OptimizerConfig, StopReason};
use super::ski::{grid_covariance, SkiOperator};
use crate::error::{check_len, MsgpError, Result};
use crate::interpolation::{interp_weights, InducingGrid};
use crate::kernels::Hyperparameters;
use crate::prediction::{estimate_nu_hat, GridSqrt, VarianceEstimatorConfig};
use crate::projection::Normalization;

pub const MODEL_FORMAT: &str = "msgp-model";
pub const MODEL_VERSION: u32 = 1;

/// Where the inducing grid comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    Fixed(InducingGrid),
    /// Bounding box of the (projected) inputs widened by `margin` spacings.
    /// With a normalized projection the box is `[-R, R]^d`, `R = max ‖x_i‖`,
    /// which contains every projection the optimizer can reach.
    Covering { sizes: Vec<usize>, margin: f64 },
}

impl GridSpec {
    pub fn covering(sizes: &[usize]) -> Self {
        GridSpec::Covering {
            sizes: sizes.to_vec(),
            margin: 3.0,
        }
    }

    pub fn build(&self, hyper: &Hyperparameters, x: &DMatrix<f64>) -> Result<InducingGrid> {
        match self {
            GridSpec::Fixed(g) => Ok(g.clone()),
            GridSpec::Covering { sizes, margin } => match &hyper.projection {
                Some(p) if p.normalization != Normalization::None => {
                    let r = (0..x.nrows()).map(|i| x.row(i).norm()).fold(0.0, f64::max);
                    let d = p.output_dim();
                    let corners = DMatrix::from_fn(2, d, |i, _| if i == 0 { -r } else { r });
                    InducingGrid::covering(&corners, sizes, *margin)
                }
                Some(p) => InducingGrid::covering(&p.project(x)?, sizes, *margin),
                None => InducingGrid::covering(x, sizes, *margin),
            },
        }
    }
}

/// Inclusive bounds on the log parameters during learning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterBounds {
    pub log_lengthscale: (f64, f64),
    pub log_signal_variance: (f64, f64),
    pub log_alpha: (f64, f64),
    pub log_noise: (f64, f64),
    pub projection: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            log_lengthscale: (-6.0, 6.0),
            log_signal_variance: (-12.0, 12.0),
            log_alpha: (-5.0, 5.0),
            log_noise: (1e-3f64.ln(), 5.0),
            projection: (-1e3, 1e3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub ski: SkiConfig,
    pub optimizer: OptimizerConfig,
    pub variance: VarianceEstimatorConfig,
    pub bounds: ParameterBounds,
    pub learn_kernel: bool,
    pub learn_noise: bool,
    /// Ignored without a projection.
    pub learn_projection: bool,
    /// Skip the stochastic variance precomputation.
    pub skip_variance: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ski: SkiConfig::default(),
            optimizer: OptimizerConfig::default(),
            variance: VarianceEstimatorConfig::default(),
            bounds: ParameterBounds::default(),
            learn_kernel: true,
            learn_noise: true,
            learn_projection: true,
            skip_variance: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub nll: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: Option<StopReason>,
    pub history: Vec<f64>,
    /// Conjugate-gradient iterations of the final solve for `α̃`.
    pub solve_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub hyper: Hyperparameters,
    pub grid: InducingGrid,
    pub ski: SkiConfig,
    pub mean_const: f64,
    /// `(W K_UU Wᵀ + σ² I)⁻¹ (y − mean_const)`.
    pub alpha_tilde: Vec<f64>,
    /// `K_UU Wᵀ α̃`.
    pub fast_mean_vector: Vec<f64>,
    /// Estimated explained variance on the grid, clipped at zero.
    pub nu_hat_u: Vec<f64>,
    pub variance: VarianceEstimatorConfig,
    pub training: TrainingSummary,
}

// Learned coordinates: kernel params, then log σ, then raw projection entries.
struct Layout {
    kernel: bool,
    noise: bool,
    projection: Option<(usize, usize)>,
}

impl Layout {
    fn pack(&self, h: &Hyperparameters) -> Vec<f64> {
        let mut v = Vec::new();
        if self.kernel {
            v.extend(h.kernel.params());
        }
        if self.noise {
            v.push(h.log_noise);
        }
        if let (Some(_), Some(p)) = (self.projection, &h.projection) {
            v.extend(p.raw.transpose().iter());
        }
        v
    }

    fn unpack(&self, base: &Hyperparameters, v: &[f64]) -> Result<Hyperparameters> {
        let mut h = base.clone();
        let mut at = 0;
        if self.kernel {
            let np = h.kernel.num_params();
            h.kernel = h.kernel.with_params(&v[at..at + np])?;
            at += np;
        }
        if self.noise {
            h.log_noise = v[at];
            at += 1;
        }
        if let (Some((d, big_d)), Some(p)) = (self.projection, &h.projection) {
            let raw = DMatrix::from_row_slice(d, big_d, &v[at..at + d * big_d]);
            h.projection = Some(p.with_raw(raw)?);
        }
        Ok(h)
    }

    fn gradient(&self, g: &super::likelihood::NllGradient) -> Vec<f64> {
        let mut v = Vec::new();
        if self.kernel {
            v.extend(&g.kernel);
        }
        if self.noise {
            v.push(g.log_noise);
        }
        if let (Some(_), Some(p)) = (self.projection, &g.projection) {
            v.extend(p.transpose().iter());
        }
        v
    }

    fn bounds(&self, h: &Hyperparameters, b: &ParameterBounds) -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        if self.kernel {
            for name in h.kernel.param_names() {
                v.push(if name.starts_with("log_lengthscale") {
                    b.log_lengthscale
                } else if name == "log_alpha" {
                    b.log_alpha
                } else {
                    b.log_signal_variance
                });
            }
        }
        if self.noise {
            v.push(b.log_noise);
        }
        if let Some((d, big_d)) = self.projection {
            v.extend(std::iter::repeat(b.projection).take(d * big_d));
        }
        v
    }
}

fn check_data(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    check_len(x.nrows(), y.len())?;
    if y.is_empty() {
        return Err(MsgpError::InvalidArgument("need at least one observation".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MsgpError::NonFinite("training data".into()));
    }
    Ok(())
}

/// Learns hyperparameters by minimizing the interpolated negative log marginal
/// likelihood, then precomputes everything prediction needs.
pub fn train(x: &DMatrix<f64>, y: &[f64], grid: &GridSpec, init: &Hyperparameters, cfg: &TrainConfig) -> Result<TrainedModel> {
    check_data(x, y)?;
    if let Some(p) = &init.projection {
        check_len(p.input_dim(), x.ncols())?;
    }
    let grid = grid.build(init, x)?;
    let mean_const = y.iter().sum::<f64>() / y.len() as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - mean_const).collect();

    let layout = Layout {
        kernel: cfg.learn_kernel,
        noise: cfg.learn_noise,
        projection: match &init.projection {
            Some(p) if cfg.learn_projection => Some((p.output_dim(), p.input_dim())),
            _ => None,
        },
    };
    let x0 = layout.pack(init);
    let mut hyper = init.clone();
    let mut summary = TrainingSummary {
        nll: f64::NAN,
        iterations: 0,
        evaluations: 0,
        stop: None,
        history: Vec::new(),
        solve_iterations: 0,
    };
    if !x0.is_empty() && cfg.optimizer.max_iters > 0 {
        let bounds = layout.bounds(init, &cfg.bounds);
        let objective = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
            let h = layout.unpack(init, v)?;
            let g = nll_grad(&h, x, &yc, &grid, &cfg.ski)?;
            Ok((g.value.nll, layout.gradient(&g)))
        };
        let out = minimize(objective, &x0, Some(&bounds), &cfg.optimizer)?;
        if out.history.windows(2).any(|w| w[1] > w[0]) {
            log::warn!("negative log likelihood rose on an accepted step");
        }
        log::info!(
            "training stopped after {} steps ({:?}), nll {:.6}",
            out.iterations,
            out.stop,
            out.value
        );
        hyper = layout.unpack(init, &out.x)?;
        summary.nll = out.value;
        summary.iterations = out.iterations;
        summary.evaluations = out.evaluations;
        summary.stop = Some(out.stop);
        summary.history = out.history;
    }
    finish(x, &yc, mean_const, hyper, grid, cfg, summary)
}

/// Precomputations at fixed hyperparameters, without learning.
pub fn fit_fixed(x: &DMatrix<f64>, y: &[f64], grid: &GridSpec, hyper: &Hyperparameters, cfg: &TrainConfig) -> Result<TrainedModel> {
    let cfg = TrainConfig {
        learn_kernel: false,
        learn_noise: false,
        learn_projection: false,
        ..cfg.clone()
    };
    train(x, y, grid, hyper, &cfg)
}

fn finish(
    x: &DMatrix<f64>,
    yc: &[f64],
    mean_const: f64,
    hyper: Hyperparameters,
    grid: InducingGrid,
    cfg: &TrainConfig,
    mut summary: TrainingSummary,
) -> Result<TrainedModel> {
    let u = match &hyper.projection {
        Some(p) => p.project(x)?,
        None => x.clone(),
    };
    let w = interp_weights(&grid, &u, cfg.ski.clamp)?;
    let kuu = grid_covariance(&hyper.kernel, &grid, cfg.ski.structure)?;
    let a = SkiOperator::new(w, kuu, hyper.noise_variance())?;
    let sol = lcg_solve(&a, yc, &cfg.ski.lcg)?;
    summary.solve_iterations = sol.iterations;
    if summary.nll.is_nan() {
        summary.nll = super::likelihood::nll(&hyper, x, yc, &grid, &cfg.ski)?.nll;
    }
    let fast_mean_vector = a.cross_apply(&sol.x)?;
    let nu_hat_u = if cfg.skip_variance {
        Vec::new()
    } else {
        let sqrt = GridSqrt::new(&hyper.kernel, &grid, cfg.ski.structure, cfg.ski.whittle_window, cfg.variance.dense_eigen_limit)?;
        estimate_nu_hat(&a, &sqrt, &cfg.ski.lcg, &cfg.variance)?
    };
    Ok(TrainedModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        hyper,
        grid,
        ski: cfg.ski.clone(),
        mean_const,
        alpha_tilde: sol.x,
        fast_mean_vector,
        nu_hat_u,
        variance: cfg.variance.clone(),
        training: summary,
    })
}

impl TrainedModel {
    /// Inputs mapped into the grid space.
    pub fn grid_inputs(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.hyper.projection {
            Some(p) => p.project(x),
            None => {
                check_len(self.grid.dim(), x.ncols())?;
                Ok(x.clone())
            }
        }
    }

    pub fn has_variance(&self) -> bool {
        !self.nu_hat_u.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(MsgpError::Config(format!(
                "unsupported model format {} version {}",
                model.format, model.version
            )));
        }
        let m = model.grid.total();
        check_len(m, model.fast_mean_vector.len())?;
        if model.has_variance() {
            check_len(m, model.nu_hat_u.len())?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
