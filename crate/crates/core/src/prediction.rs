//! Constant-time predictive mean and variance from precomputed grid vectors,
//! the stochastic explained-variance estimator, and a slower baseline that
//! evaluates test-to-grid covariances exactly.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circulant_approx::bccb_whittle_column;
use crate::error::{check_len, MsgpError, Result};
use crate::fft::{spectral_apply, FftNd};
use crate::gp::{grid_covariance, lcg_solve, GridStructure, LcgConfig, SkiOperator, TrainedModel};
use crate::interpolation::{interp_weights, InducingGrid};
use crate::kernels::KernelSpec;
use crate::linalg::{unravel, CirculantOperator, DenseOperator, KroneckerOperator, LinearOperator, StructuredOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceEstimatorConfig {
    pub n_s: usize,
    pub seed: u64,
    /// Grid factors up to this size get a dense eigendecomposition for the
    /// `K_UU^{1/2}` sampler; larger ones use their Whittle circulant.
    pub dense_eigen_limit: usize,
}

impl Default for VarianceEstimatorConfig {
    fn default() -> Self {
        Self {
            n_s: 20,
            seed: 0,
            dense_eigen_limit: 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub mean: Vec<f64>,
    /// Latent variance; add the noise variance for observations.
    pub variance: Option<Vec<f64>>,
}

/// Symmetric square root of `K_UU` (or of its circulant approximation).
#[derive(Clone, Debug)]
pub enum GridSqrt {
    Kronecker(StructuredOperator),
    Spectral { plan: FftNd, spectrum: Vec<Complex64> },
}

const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-10;

fn dense_sqrt(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = t.clone().symmetric_eigen();
    let peak = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut root = eig.eigenvalues.clone();
    for (i, v) in root.iter_mut().enumerate() {
        if *v < -NEGATIVE_EIGEN_TOLERANCE * peak {
            return Err(MsgpError::NonPositiveEigenvalue { index: i, value: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&root) * v.transpose())
}

/// `√max(0, λ)` after averaging each eigenvalue with its mirror `λ_{-k}`, so
/// rounding near zero cannot break the symmetry the square root relies on.
fn symmetric_root(lam: &[f64], shape: &[usize]) -> Vec<f64> {
    let mut idx = vec![0usize; shape.len()];
    (0..lam.len())
        .map(|k| {
            unravel(k, shape, &mut idx);
            let mirror = idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + (n - i) % n);
            (0.5 * (lam[k] + lam[mirror])).max(0.0).sqrt()
        })
        .collect()
}

fn circulant_sqrt(col: &[f64]) -> Result<StructuredOperator> {
    let lam = CirculantOperator::new(col.to_vec())?.eigenvalues()?;
    Ok(CirculantOperator::from_eigenvalues(&symmetric_root(&lam, &[lam.len()]))?.into())
}

impl GridSqrt {
    pub fn new(kernel: &KernelSpec, grid: &InducingGrid, structure: GridStructure, window: usize, dense_limit: usize) -> Result<Self> {
        match structure.resolve(kernel, grid.dim())? {
            GridStructure::Kronecker => {
                let s = kernel.signal_variance().sqrt();
                let mut factors = Vec::with_capacity(grid.dim());
                for p in 0..grid.dim() {
                    let m = grid.size(p);
                    let h = grid.spacing(p);
                    let lag = |j: f64| kernel.factor_lag(p, j * h);
                    let mut op = if m <= dense_limit {
                        let t = DMatrix::from_fn(m, m, |i, j| lag(i as f64 - j as f64));
                        StructuredOperator::from(DenseOperator::new(dense_sqrt(&t)?)?)
                    } else {
                        let col = crate::circulant_approx::whittle_column(&lag, 1.0, m, window);
                        circulant_sqrt(&col)?
                    };
                    if p == 0 {
                        op = scaled(op, s)?;
                    }
                    factors.push(op);
                }
                let op = if factors.len() == 1 {
                    factors.pop().expect("one factor")
                } else {
                    KroneckerOperator::new(factors)?.into()
                };
                Ok(GridSqrt::Kronecker(op))
            }
            _ => {
                let col = bccb_whittle_column(&|o| kernel.eval_offset(o), grid, window);
                let plan = FftNd::new(grid.sizes());
                let lam: Vec<f64> = plan.forward_real(&col).iter().map(|c| c.re).collect();
                let spectrum = symmetric_root(&lam, grid.sizes()).into_iter().map(|r| Complex64::new(r, 0.0)).collect();
                Ok(GridSqrt::Spectral { plan, spectrum })
            }
        }
    }
}

fn scaled(op: StructuredOperator, s: f64) -> Result<StructuredOperator> {
    Ok(match op {
        StructuredOperator::Dense(d) => DenseOperator::new(d.matrix() * s)?.into(),
        StructuredOperator::Circulant(c) => CirculantOperator::new(c.first_column().iter().map(|v| v * s).collect())?.into(),
        other => other,
    })
}

impl LinearOperator for GridSqrt {
    fn dim(&self) -> usize {
        match self {
            GridSqrt::Kronecker(op) => op.dim(),
            GridSqrt::Spectral { plan, .. } => plan.len(),
        }
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            GridSqrt::Kronecker(op) => op.apply(v),
            GridSqrt::Spectral { plan, spectrum } => spectral_apply(plan, spectrum, v),
        }
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `ν̂_U = (1/n_s) Σ_i (K_UU Wᵀ r_i)²` with `A r_i = W K_UU^{1/2} g_i + σ ε_i`,
/// an unbiased estimate of `diag(K_UU Wᵀ A⁻¹ W K_UU)`.
pub fn estimate_nu_hat(a: &SkiOperator, sqrt: &dyn LinearOperator, lcg: &LcgConfig, cfg: &VarianceEstimatorConfig) -> Result<Vec<f64>> {
    if cfg.n_s == 0 {
        return Err(MsgpError::InvalidArgument("variance estimator needs at least one sample".into()));
    }
    let m = a.kuu().dim();
    check_len(m, sqrt.dim())?;
    let n = a.dim();
    let sigma = a.sigma2().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = vec![0.0; m];
    for _ in 0..cfg.n_s {
        let gm = normals(&mut rng, m);
        let gn = normals(&mut rng, n);
        let mut rhs = a.w().apply(&sqrt.apply(&gm)?)?;
        rhs.iter_mut().zip(&gn).for_each(|(r, e)| *r += sigma * e);
        let r = lcg_solve(a, &rhs, lcg)?.x;
        for (s, v) in acc.iter_mut().zip(a.cross_apply(&r)?) {
            *s += v * v;
        }
    }
    Ok(acc.into_iter().map(|s| (s / cfg.n_s as f64).max(0.0)).collect())
}

/// Dense `diag(K_UU Wᵀ A⁻¹ W K_UU)` for small problems.
pub fn explained_variance_dense(a: &SkiOperator) -> Result<Vec<f64>> {
    let kuu = a.kuu().to_dense();
    let w = a.w().to_dense();
    let cross = &w * &kuu;
    let chol = crate::linalg::DenseCholesky::new(&a.to_dense())
        .ok_or_else(|| MsgpError::NotPositiveDefinite("interpolated covariance".into()))?;
    let solved = chol.solve(&cross);
    Ok((0..kuu.nrows()).map(|j| cross.column(j).dot(&solved.column(j))).collect())
}

/// `mean_const + W_* K_UU Wᵀ α̃`.
pub fn predict_mean(model: &TrainedModel, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
    let u = model.grid_inputs(x_star)?;
    let w = interp_weights(&model.grid, &u, model.ski.clamp)?;
    let mut out = w.apply(&model.fast_mean_vector)?;
    out.iter_mut().for_each(|v| *v += model.mean_const);
    Ok(out)
}

/// `max(0, k(x*, x*) − W_* ν̂_U)`.
pub fn predict_variance(model: &TrainedModel, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !model.has_variance() {
        return Err(MsgpError::InvalidArgument("model was trained without variance precomputation".into()));
    }
    let u = model.grid_inputs(x_star)?;
    let w = interp_weights(&model.grid, &u, model.ski.clamp)?;
    let prior = model.hyper.kernel.eval_offset(&vec![0.0; u.ncols()]);
    Ok(w.apply(&model.nu_hat_u)?.into_iter().map(|v| (prior - v).max(0.0)).collect())
}

pub fn predict(model: &TrainedModel, x_star: &DMatrix<f64>) -> Result<PredictionResult> {
    let mean = predict_mean(model, x_star)?;
    let variance = if model.has_variance() {
        Some(predict_variance(model, x_star)?)
    } else {
        None
    };
    Ok(PredictionResult { mean, variance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlowPredictConfig {
    pub variance: bool,
    /// Per-point variance solves are refused beyond this many test points.
    pub max_variance_points: usize,
    pub lcg: LcgConfig,
}

impl Default for SlowPredictConfig {
    fn default() -> Self {
        Self {
            variance: true,
            max_variance_points: 2000,
            lcg: LcgConfig::default(),
        }
    }
}

/// Predictions with exact test-to-grid covariances `K_{*,U}` in place of the
/// interpolated `W_* K_UU`, re-solving against `y` on the interpolated
/// training covariance. Cost grows with `n` and `n_*`.
pub fn predict_slow(
    model: &TrainedModel,
    x: &DMatrix<f64>,
    y: &[f64],
    x_star: &DMatrix<f64>,
    cfg: &SlowPredictConfig,
) -> Result<PredictionResult> {
    check_len(x.nrows(), y.len())?;
    let kernel = &model.hyper.kernel;
    let u = model.grid_inputs(x)?;
    let us = model.grid_inputs(x_star)?;
    let w = interp_weights(&model.grid, &u, model.ski.clamp)?;
    let kuu = grid_covariance(kernel, &model.grid, model.ski.structure)?;
    let a = SkiOperator::new(w, kuu, model.hyper.noise_variance())?;
    let yc: Vec<f64> = y.iter().map(|v| v - model.mean_const).collect();
    let alpha = lcg_solve(&a, &yc, &cfg.lcg)?.x;
    let z = a.w().apply_transpose(&alpha)?;
    let nodes = model.grid.points();
    let d = us.ncols();
    let mut row = vec![0.0; d];
    let mut cross_row = |i: usize| -> Result<Vec<f64>> {
        for (p, r) in row.iter_mut().enumerate() {
            *r = us[(i, p)];
        }
        nodes.iter().map(|g| kernel.eval(&row, g)).collect()
    };
    let ns = us.nrows();
    let want_var = cfg.variance;
    if want_var && ns > cfg.max_variance_points {
        return Err(MsgpError::InvalidArgument(format!(
            "slow variance limited to {} test points, got {ns}",
            cfg.max_variance_points
        )));
    }
    let prior = kernel.eval_offset(&vec![0.0; d]);
    let mut mean = Vec::with_capacity(ns);
    let mut variance = Vec::with_capacity(if want_var { ns } else { 0 });
    for i in 0..ns {
        let k = cross_row(i)?;
        mean.push(model.mean_const + k.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>());
        if want_var {
            let wk = a.w().apply(&k)?;
            let s = lcg_solve(&a, &wk, &cfg.lcg)?.x;
            let explained: f64 = wk.iter().zip(&s).map(|(a, b)| a * b).sum();
            variance.push((prior - explained).max(0.0));
        }
    }
    Ok(PredictionResult {
        mean,
        variance: want_var.then_some(variance),
    })
}
