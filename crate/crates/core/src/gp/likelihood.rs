//! Negative log marginal likelihood of the interpolated model, with the
//! circulant log-determinant surrogate, and its gradient.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lcg::{lcg_solve, LcgConfig};
use super::ski::{grid_covariance, grid_covariance_derivatives, GridStructure, SkiOperator};
use crate::circulant_approx::{bccb_whittle_column, whittle_sum_column, DEFAULT_WHITTLE_WINDOW};
use crate::error::{check_len, MsgpError, Result};
use crate::fft::FftNd;
use crate::interpolation::{interp_weights, interp_weights_with_gradient, InducingGrid};
use crate::kernels::{Hyperparameters, KernelSpec};
use crate::linalg::{outer_product, LinearOperator};

/// How the `m` grid eigenvalues stand in for the `n` eigenvalues of `W K_UU Wᵀ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMapping {
    /// The `min(n, m)` largest grid eigenvalues scaled by `n/m`; the rest are zero.
    #[default]
    TopRank,
    /// Every index `i = 1..n` takes the grid eigenvalue `⌈i m / n⌉` scaled by `n/m`.
    Replicate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkiConfig {
    #[serde(default)]
    pub lcg: LcgConfig,
    #[serde(default = "default_window")]
    pub whittle_window: usize,
    #[serde(default)]
    pub structure: GridStructure,
    #[serde(default)]
    pub eigen_mapping: EigenMapping,
    /// Clamp points that fall outside the grid instead of failing.
    #[serde(default)]
    pub clamp: bool,
}

fn default_window() -> usize {
    DEFAULT_WHITTLE_WINDOW
}

impl Default for SkiConfig {
    fn default() -> Self {
        Self {
            lcg: LcgConfig::default(),
            whittle_window: DEFAULT_WHITTLE_WINDOW,
            structure: GridStructure::Auto,
            eigen_mapping: EigenMapping::TopRank,
            clamp: false,
        }
    }
}

/// Thresholded Whittle eigenvalues of `K_UU` (flat grid order) and their
/// derivatives with respect to each kernel parameter.
#[derive(Clone, Debug)]
pub struct GridSpectrum {
    pub values: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
    pub clipped_count: usize,
}

fn real_spectrum(plan: &FftNd, col: &[f64]) -> Vec<f64> {
    plan.forward_real(col).iter().map(|c| c.re).collect()
}

// Columns are symmetric, so their transforms are real up to rounding.
fn whittle_spectrum_1d(col: &[f64], dcols: &[&[f64]]) -> (Vec<f64>, Vec<Vec<f64>>, usize) {
    let plan = FftNd::new(&[col.len()]);
    let mut lam = real_spectrum(&plan, col);
    let mut grads: Vec<Vec<f64>> = dcols.iter().map(|d| real_spectrum(&plan, d)).collect();
    let mut clipped = 0;
    for k in 0..lam.len() {
        if lam[k] < 0.0 {
            lam[k] = 0.0;
            clipped += 1;
            grads.iter_mut().for_each(|g| g[k] = 0.0);
        }
    }
    (lam, grads, clipped)
}

pub fn grid_spectrum(kernel: &KernelSpec, grid: &InducingGrid, structure: GridStructure, window: usize) -> Result<GridSpectrum> {
    let d = grid.dim();
    let np = kernel.num_params();
    let spectrum = match structure.resolve(kernel, d)? {
        GridStructure::Kronecker => {
            let s2 = kernel.signal_variance();
            let mut lam = Vec::with_capacity(d);
            let mut dell = Vec::with_capacity(d);
            let mut dalpha = Vec::with_capacity(d);
            for p in 0..d {
                let m = grid.size(p);
                let h = grid.spacing(p);
                let f = |j: i64| kernel.factor_lag_grad(p, j as f64 * h);
                let col = whittle_sum_column(m, window, &|j| f(j).0);
                let ce = whittle_sum_column(m, window, &|j| f(j).1);
                let ca = whittle_sum_column(m, window, &|j| f(j).2);
                let (l, g, _) = whittle_spectrum_1d(&col, &[&ce, &ca]);
                lam.push(l);
                let mut g = g.into_iter();
                dell.push(g.next().expect("lengthscale derivative"));
                dalpha.push(g.next().expect("alpha derivative"));
            }
            let unit = outer_product(&lam);
            let values: Vec<f64> = unit.iter().map(|v| s2 * v).collect();
            let mut grads = vec![vec![0.0; values.len()]; np];
            for p in 0..d {
                let mut parts = lam.clone();
                parts[p] = dell[p].clone();
                let term = outer_product(&parts);
                let slot = &mut grads[kernel.lengthscale_param(p)];
                slot.iter_mut().zip(&term).for_each(|(g, t)| *g += s2 * t);
                if let Some(a) = kernel.alpha_param() {
                    let mut parts = lam.clone();
                    parts[p] = dalpha[p].clone();
                    let term = outer_product(&parts);
                    grads[a].iter_mut().zip(&term).for_each(|(g, t)| *g += s2 * t);
                }
            }
            grads[kernel.signal_param()] = values.clone();
            let clipped_count = values.iter().filter(|&&v| v == 0.0).count();
            GridSpectrum {
                values,
                grads,
                clipped_count,
            }
        }
        _ => {
            let col = bccb_whittle_column(&|o| kernel.eval_offset(o), grid, window);
            let plan = FftNd::new(grid.sizes());
            let mut values = real_spectrum(&plan, &col);
            let mut grads: Vec<Vec<f64>> = (0..np)
                .map(|k| {
                    let dc = bccb_whittle_column(&|o| kernel.eval_offset_grad(o).1[k], grid, window);
                    real_spectrum(&plan, &dc)
                })
                .collect();
            let mut clipped_count = 0;
            for i in 0..values.len() {
                if values[i] < 0.0 {
                    values[i] = 0.0;
                    clipped_count += 1;
                    grads.iter_mut().for_each(|g| g[i] = 0.0);
                }
            }
            GridSpectrum {
                values,
                grads,
                clipped_count,
            }
        }
    };
    if spectrum.values.iter().any(|v| !v.is_finite()) {
        return Err(MsgpError::NonFinite("grid spectrum".into()));
    }
    Ok(spectrum)
}

/// Surrogate `log|W K_UU Wᵀ + σ² I|` and its derivatives.
#[derive(Clone, Debug)]
pub struct LogDetSurrogate {
    pub value: f64,
    pub dkernel: Vec<f64>,
    pub dsigma2: f64,
}

pub fn logdet_surrogate(spec: &GridSpectrum, n: usize, sigma2: f64, mapping: EigenMapping) -> Result<LogDetSurrogate> {
    if !(sigma2 > 0.0) {
        return Err(MsgpError::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    let m = spec.values.len();
    let scale = n as f64 / m as f64;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| spec.values[b].total_cmp(&spec.values[a]).then(a.cmp(&b)));
    // Multiplicity of each sorted grid eigenvalue in the n-term sum.
    let counts: Vec<usize> = match mapping {
        EigenMapping::TopRank => (0..m).map(|k| usize::from(k < n)).collect(),
        EigenMapping::Replicate => {
            let mut c = vec![0usize; m];
            for i in 1..=n {
                let k = (i * m).div_ceil(n) - 1;
                c[k] += 1;
            }
            c
        }
    };
    let used: usize = counts.iter().sum();
    let mut value = (n - used) as f64 * sigma2.ln();
    let mut dsigma2 = (n - used) as f64 / sigma2;
    let mut dkernel = vec![0.0; spec.grads.len()];
    for (rank, &idx) in order.iter().enumerate() {
        let c = counts[rank];
        if c == 0 {
            continue;
        }
        let mu = scale * spec.values[idx] + sigma2;
        value += c as f64 * mu.ln();
        dsigma2 += c as f64 / mu;
        for (dk, g) in dkernel.iter_mut().zip(&spec.grads) {
            *dk += c as f64 * scale * g[idx] / mu;
        }
    }
    Ok(LogDetSurrogate { value, dkernel, dsigma2 })
}

#[derive(Clone, Debug)]
pub struct NllValue {
    pub nll: f64,
    pub data_fit: f64,
    pub logdet: f64,
    pub iterations: usize,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct NllGradient {
    pub value: NllValue,
    /// With respect to the kernel's log parameters, in `KernelSpec::params` order.
    pub kernel: Vec<f64>,
    /// With respect to `log σ`.
    pub log_noise: f64,
    /// With respect to the raw projection matrix, when one is used.
    pub projection: Option<DMatrix<f64>>,
}

fn inputs(hyper: &Hyperparameters, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match &hyper.projection {
        Some(p) => p.project(x),
        None => Ok(x.clone()),
    }
}

fn data_fit(a: &SkiOperator, y: &[f64], cfg: &LcgConfig) -> Result<(f64, Vec<f64>, usize)> {
    let sol = lcg_solve(a, y, cfg)?;
    // 2 yᵀx − xᵀ A x equals yᵀA⁻¹y up to a term quadratic in the solve error.
    let ax = a.apply(&sol.x)?;
    let fit: f64 = sol.x.iter().zip(y).zip(&ax).map(|((xi, yi), ai)| xi * (2.0 * yi - ai)).sum();
    Ok((fit, sol.x, sol.iterations))
}

/// `½[yᵀ(K + σ²I)⁻¹y + log|K + σ²I| + n log 2π]` under the interpolated
/// covariance. `y` is used as given (subtract any prior mean first); `grid`
/// lives in the projected space when `hyper` has a projection.
pub fn nll(hyper: &Hyperparameters, x: &DMatrix<f64>, y: &[f64], grid: &InducingGrid, cfg: &SkiConfig) -> Result<NllValue> {
    let n = y.len();
    check_len(x.nrows(), n)?;
    if n == 0 {
        return Err(MsgpError::InvalidArgument("need at least one observation".into()));
    }
    let u = inputs(hyper, x)?;
    let sigma2 = hyper.noise_variance();
    let w = interp_weights(grid, &u, cfg.clamp)?;
    let kuu = grid_covariance(&hyper.kernel, grid, cfg.structure)?;
    let a = SkiOperator::new(w, kuu, sigma2)?;
    let (fit, alpha, iterations) = data_fit(&a, y, &cfg.lcg)?;
    let spec = grid_spectrum(&hyper.kernel, grid, cfg.structure, cfg.whittle_window)?;
    let ld = logdet_surrogate(&spec, n, sigma2, cfg.eigen_mapping)?;
    Ok(NllValue {
        nll: 0.5 * (fit + ld.value + n as f64 * (2.0 * PI).ln()),
        data_fit: fit,
        logdet: ld.value,
        iterations,
        alpha,
    })
}

pub fn nll_grad(hyper: &Hyperparameters, x: &DMatrix<f64>, y: &[f64], grid: &InducingGrid, cfg: &SkiConfig) -> Result<NllGradient> {
    let n = y.len();
    check_len(x.nrows(), n)?;
    if n == 0 {
        return Err(MsgpError::InvalidArgument("need at least one observation".into()));
    }
    let u = inputs(hyper, x)?;
    let sigma2 = hyper.noise_variance();
    let wg = interp_weights_with_gradient(grid, &u, cfg.clamp)?;
    let kuu = grid_covariance(&hyper.kernel, grid, cfg.structure)?;
    let a = SkiOperator::new(wg.weights, kuu, sigma2)?;
    let (fit, alpha, iterations) = data_fit(&a, y, &cfg.lcg)?;
    let spec = grid_spectrum(&hyper.kernel, grid, cfg.structure, cfg.whittle_window)?;
    let ld = logdet_surrogate(&spec, n, sigma2, cfg.eigen_mapping)?;

    let z = a.w().apply_transpose(&alpha)?;
    let derivs = grid_covariance_derivatives(&hyper.kernel, grid, cfg.structure)?;
    let mut kernel_grad = Vec::with_capacity(derivs.len());
    for (k, terms) in derivs.iter().enumerate() {
        let mut quad = 0.0;
        for t in terms {
            quad += t.apply(&z)?.iter().zip(&z).map(|(p, q)| p * q).sum::<f64>();
        }
        kernel_grad.push(0.5 * (ld.dkernel[k] - quad));
    }
    let alpha_sq: f64 = alpha.iter().map(|v| v * v).sum();
    let log_noise = sigma2 * (ld.dsigma2 - alpha_sq);

    let projection = match &hyper.projection {
        Some(p) => {
            let b = a.kuu().apply(&z)?;
            let d = u.ncols();
            let mut g = DMatrix::zeros(n, d);
            let w = a.w();
            for i in 0..n {
                let r = w.row_ptr()[i]..w.row_ptr()[i + 1];
                for q in 0..d {
                    let s: f64 = r.clone().map(|kk| wg.derivatives[q][kk] * b[w.col_idx()[kk]]).sum();
                    g[(i, q)] = -alpha[i] * s;
                }
            }
            Some(p.grad_transform(&(g.transpose() * x))?)
        }
        None => None,
    };

    Ok(NllGradient {
        value: NllValue {
            nll: 0.5 * (fit + ld.value + n as f64 * (2.0 * PI).ln()),
            data_fit: fit,
            logdet: ld.value,
            iterations,
            alpha,
        },
        kernel: kernel_grad,
        log_noise,
        projection,
    })
}
