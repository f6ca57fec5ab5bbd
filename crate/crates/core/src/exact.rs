//! Dense Cholesky Gaussian process, the reference for every structured path.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, MsgpError, Result};
use crate::gp::{minimize, OptimizeOutcome, OptimizerConfig, ParameterBounds};
use crate::kernels::{Hyperparameters, KernelSpec};
use crate::linalg::DenseCholesky;
use crate::prediction::PredictionResult;

/// Largest training set accepted by [`DenseGp::fit`].
pub const EXACT_MAX_N: usize = 5000;

#[derive(Clone, Debug)]
pub struct DenseGp {
    kernel: KernelSpec,
    sigma2: f64,
    mean_const: f64,
    points: Vec<Vec<f64>>,
    chol: DenseCholesky,
    alpha: DVector<f64>,
    jitter: f64,
    y_centered: DVector<f64>,
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

fn gram(kernel: &KernelSpec, pts: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = pts.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&pts[i], &pts[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Cholesky of `k`, retried once with `1e-8 · trace/n` added to the diagonal.
fn factor(mut k: DMatrix<f64>) -> Result<(DenseCholesky, f64)> {
    let n = k.nrows();
    if let Some(c) = DenseCholesky::new(&k) {
        return Ok((c, 0.0));
    }
    let jitter = 1e-8 * k.trace() / n as f64;
    log::warn!("Cholesky failed; retrying with jitter {jitter:e}");
    for i in 0..n {
        k[(i, i)] += jitter;
    }
    DenseCholesky::new(&k).map(|c| (c, jitter)).ok_or_else(|| {
        MsgpError::NotPositiveDefinite(format!(
            "dense covariance even after jitter {jitter:e}; increase the noise variance or add jitter"
        ))
    })
}

/// Zero prior mean.
pub fn fit_exact(kernel: &KernelSpec, sigma2: f64, x: &DMatrix<f64>, y: &[f64]) -> Result<DenseGp> {
    DenseGp::fit(kernel, sigma2, x, y, 0.0)
}

impl DenseGp {
    pub fn fit(kernel: &KernelSpec, sigma2: f64, x: &DMatrix<f64>, y: &[f64], mean_const: f64) -> Result<Self> {
        let n = y.len();
        check_len(x.nrows(), n)?;
        if n == 0 {
            return Err(MsgpError::InvalidArgument("need at least one observation".into()));
        }
        if n > EXACT_MAX_N {
            return Err(MsgpError::InvalidArgument(format!("dense GP limited to {EXACT_MAX_N} points, got {n}")));
        }
        if !(sigma2 >= 0.0) {
            return Err(MsgpError::InvalidArgument(format!("noise variance must be non-negative, got {sigma2}")));
        }
        let points = rows(x);
        let mut k = gram(kernel, &points)?;
        for i in 0..n {
            k[(i, i)] += sigma2;
        }
        let (chol, jitter) = factor(k)?;
        let y_centered = DVector::from_iterator(n, y.iter().map(|v| v - mean_const));
        let alpha = chol.solve_vec(&y_centered);
        Ok(Self {
            kernel: kernel.clone(),
            sigma2,
            mean_const,
            points,
            chol,
            alpha,
            jitter,
            y_centered,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor of `K + σ² I`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn logdet(&self) -> f64 {
        self.chol.logdet()
    }

    pub fn nll(&self) -> f64 {
        let n = self.points.len() as f64;
        0.5 * (self.y_centered.dot(&self.alpha) + self.logdet() + n * (2.0 * PI).ln())
    }

    fn cross(&self, x_star: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let stars = rows(x_star);
        let mut k = DMatrix::zeros(self.points.len(), stars.len());
        for (j, s) in stars.iter().enumerate() {
            for (i, p) in self.points.iter().enumerate() {
                k[(i, j)] = self.kernel.eval(p, s)?;
            }
        }
        Ok(k)
    }

    /// Predictive mean and latent variance.
    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<PredictionResult> {
        let ks = self.cross(x_star)?;
        let mean = (ks.tr_mul(&self.alpha)).iter().map(|v| v + self.mean_const).collect();
        let v = self.chol.solve_lower(&ks);
        let stars = rows(x_star);
        let variance = stars
            .iter()
            .enumerate()
            .map(|(j, s)| Ok((self.kernel.eval(s, s)? - v.column(j).norm_squared()).max(0.0)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(PredictionResult {
            mean,
            variance: Some(variance),
        })
    }

    pub fn predict_mean(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        let ks = self.cross(x_star)?;
        Ok(ks.tr_mul(&self.alpha).iter().map(|v| v + self.mean_const).collect())
    }
}

/// Exact nll with gradients over the kernel's log parameters and `log σ`,
/// via `½ tr((K⁻¹ − ααᵀ) ∂K)`. `y` is used as given.
pub fn exact_nll_grad(kernel: &KernelSpec, log_noise: f64, x: &DMatrix<f64>, y: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let n = y.len();
    check_len(x.nrows(), n)?;
    let sigma2 = (2.0 * log_noise).exp();
    let pts = rows(x);
    let np = kernel.num_params();
    let mut k = DMatrix::zeros(n, n);
    let mut dk: Vec<DMatrix<f64>> = (0..np).map(|_| DMatrix::zeros(n, n)).collect();
    for i in 0..n {
        for j in 0..=i {
            let (v, g) = kernel.eval_grad(&pts[i], &pts[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
            for (d, gv) in dk.iter_mut().zip(g) {
                d[(i, j)] = gv;
                d[(j, i)] = gv;
            }
        }
        k[(i, i)] += sigma2;
    }
    let (chol, _) = factor(k)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve_vec(&yv);
    let logdet = chol.logdet();
    let nll = 0.5 * (yv.dot(&alpha) + logdet + n as f64 * (2.0 * PI).ln());
    let inner = chol.inverse() - &alpha * alpha.transpose();
    let grads = dk.iter().map(|d| 0.5 * inner.component_mul(d).sum()).collect();
    let dnoise = sigma2 * inner.trace();
    Ok((nll, grads, dnoise))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactTrainConfig {
    pub optimizer: OptimizerConfig,
    pub bounds: ParameterBounds,
    /// Learn hyperparameters on a random subset of this size.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for ExactTrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig {
                method: crate::gp::OptimizerMethod::Lbfgs,
                max_iters: 100,
                ..OptimizerConfig::default()
            },
            bounds: ParameterBounds::default(),
            subsample: None,
            seed: 0,
        }
    }
}

/// Learns kernel and noise by exact marginal likelihood, then fits on all
/// data with the empirical mean as prior mean.
pub fn train_exact(init: &Hyperparameters, x: &DMatrix<f64>, y: &[f64], cfg: &ExactTrainConfig) -> Result<(DenseGp, Hyperparameters, OptimizeOutcome)> {
    check_len(x.nrows(), y.len())?;
    if init.projection.is_some() {
        return Err(MsgpError::InvalidArgument("exact GP takes projected inputs directly".into()));
    }
    let n = y.len();
    let mean_const = y.iter().sum::<f64>() / n as f64;
    let (xs, ys) = match cfg.subsample {
        Some(s) if s < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut idx = sample(&mut rng, n, s).into_vec();
            idx.sort_unstable();
            let xs = DMatrix::from_fn(s, x.ncols(), |i, j| x[(idx[i], j)]);
            let ys: Vec<f64> = idx.iter().map(|&i| y[i] - mean_const).collect();
            (xs, ys)
        }
        _ => (x.clone(), y.iter().map(|v| v - mean_const).collect()),
    };
    let np = init.kernel.num_params();
    let mut x0 = init.kernel.params();
    x0.push(init.log_noise);
    let mut bounds: Vec<(f64, f64)> = init
        .kernel
        .param_names()
        .iter()
        .map(|name| {
            if name.starts_with("log_lengthscale") {
                cfg.bounds.log_lengthscale
            } else if name == "log_alpha" {
                cfg.bounds.log_alpha
            } else {
                cfg.bounds.log_signal_variance
            }
        })
        .collect();
    bounds.push(cfg.bounds.log_noise);
    let out = minimize(
        |v| {
            let kernel = init.kernel.with_params(&v[..np])?;
            let (f, mut g, gn) = exact_nll_grad(&kernel, v[np], &xs, &ys)?;
            g.push(gn);
            Ok((f, g))
        },
        &x0,
        Some(&bounds),
        &cfg.optimizer,
    )?;
    let mut hyper = init.clone();
    hyper.kernel = init.kernel.with_params(&out.x[..np])?;
    hyper.log_noise = out.x[np];
    let gp = DenseGp::fit(&hyper.kernel, hyper.noise_variance(), x, y, mean_const)?;
    Ok((gp, hyper, out))
}
