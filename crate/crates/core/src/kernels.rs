//! Stationary covariance functions with analytic gradients in log space.
//!
//! Parameters are ordered `[log ℓ_1, ..., log ℓ_L, log s², (log α)]` where
//! `L` is either 1 (shared lengthscale) or the input dimension.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, MsgpError, Result};
use crate::interpolation::InducingGrid;
use crate::projection::ProjectionMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Se,
    Matern12,
    Matern32,
    Matern52,
    Rq,
}

/// How a multidimensional kernel is built from the 1D profile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Composition {
    /// `s² ∏_p f(|δ_p| / ℓ_p)`; always separable.
    #[default]
    Product,
    /// `s² f(‖δ / ℓ‖)`; separable only for SE.
    Radial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default)]
    pub composition: Composition,
    pub log_lengthscales: Vec<f64>,
    pub log_signal_variance: f64,
    /// Only used by the rational quadratic family.
    #[serde(default)]
    pub log_alpha: f64,
}

/// Kernel hyperparameters plus observation noise and an optional input projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub kernel: KernelSpec,
    /// `σ = exp(log_noise)`.
    pub log_noise: f64,
    #[serde(default)]
    pub projection: Option<ProjectionMatrix>,
}

impl Hyperparameters {
    pub fn new(kernel: KernelSpec, noise_std: f64) -> Self {
        Self {
            kernel,
            log_noise: noise_std.ln(),
            projection: None,
        }
    }

    pub fn noise_variance(&self) -> f64 {
        (2.0 * self.log_noise).exp()
    }
}

// Unit-variance 1D profile f(r).
fn profile(family: KernelFamily, alpha: f64, r: f64) -> f64 {
    match family {
        KernelFamily::Se => (-0.5 * r * r).exp(),
        KernelFamily::Matern12 => (-r).exp(),
        KernelFamily::Matern32 => {
            let s = 3f64.sqrt() * r;
            (1.0 + s) * (-s).exp()
        }
        KernelFamily::Matern52 => {
            let s = 5f64.sqrt() * r;
            (1.0 + s + s * s / 3.0) * (-s).exp()
        }
        KernelFamily::Rq => (1.0 + r * r / (2.0 * alpha)).powf(-alpha),
    }
}

// -f'(r) / r. For Matérn-1/2 this is singular at 0; callers only use it
// multiplied by a squared scaled offset, whose product vanishes there.
fn profile_slope(family: KernelFamily, alpha: f64, r: f64) -> f64 {
    match family {
        KernelFamily::Se => (-0.5 * r * r).exp(),
        KernelFamily::Matern12 => {
            if r == 0.0 {
                0.0
            } else {
                (-r).exp() / r
            }
        }
        KernelFamily::Matern32 => 3.0 * (-(3f64.sqrt()) * r).exp(),
        KernelFamily::Matern52 => {
            let s = 5f64.sqrt() * r;
            5.0 / 3.0 * (1.0 + s) * (-s).exp()
        }
        KernelFamily::Rq => (1.0 + r * r / (2.0 * alpha)).powf(-alpha - 1.0),
    }
}

// ∂f/∂log α for the RQ profile.
fn profile_dlog_alpha(alpha: f64, r: f64) -> f64 {
    let q = r * r / (2.0 * alpha);
    profile(KernelFamily::Rq, alpha, r) * alpha * (q / (1.0 + q) - q.ln_1p())
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: &[f64], signal_variance: f64) -> Self {
        Self {
            family,
            composition: Composition::Product,
            log_lengthscales: lengthscales.iter().map(|l| l.ln()).collect(),
            log_signal_variance: signal_variance.ln(),
            log_alpha: 0.0,
        }
    }

    pub fn se(lengthscales: &[f64], signal_variance: f64) -> Self {
        Self::new(KernelFamily::Se, lengthscales, signal_variance)
    }

    pub fn rq(lengthscales: &[f64], signal_variance: f64, alpha: f64) -> Self {
        let mut k = Self::new(KernelFamily::Rq, lengthscales, signal_variance);
        k.log_alpha = alpha.ln();
        k
    }

    pub fn with_composition(mut self, composition: Composition) -> Self {
        self.composition = composition;
        self
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn lengthscale(&self, p: usize) -> f64 {
        if self.log_lengthscales.len() == 1 {
            self.log_lengthscales[0].exp()
        } else {
            self.log_lengthscales[p].exp()
        }
    }

    fn has_alpha(&self) -> bool {
        self.family == KernelFamily::Rq
    }

    pub fn num_params(&self) -> usize {
        self.log_lengthscales.len() + 1 + usize::from(self.has_alpha())
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.log_lengthscales.clone();
        p.push(self.log_signal_variance);
        if self.has_alpha() {
            p.push(self.log_alpha);
        }
        p
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        check_len(self.num_params(), params.len())?;
        if params.iter().any(|x| !x.is_finite()) {
            return Err(MsgpError::NonFinite("kernel hyperparameters".into()));
        }
        let l = self.log_lengthscales.len();
        let mut out = self.clone();
        out.log_lengthscales.copy_from_slice(&params[..l]);
        out.log_signal_variance = params[l];
        if self.has_alpha() {
            out.log_alpha = params[l + 1];
        }
        Ok(out)
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.log_lengthscales.len()).map(|p| format!("log_lengthscale[{p}]")).collect();
        names.push("log_signal_variance".into());
        if self.has_alpha() {
            names.push("log_alpha".into());
        }
        names
    }

    /// Index of the lengthscale parameter used by input dimension `p`.
    pub fn lengthscale_param(&self, p: usize) -> usize {
        if self.log_lengthscales.len() == 1 {
            0
        } else {
            p
        }
    }

    pub fn alpha_param(&self) -> Option<usize> {
        self.has_alpha().then(|| self.log_lengthscales.len() + 1)
    }

    pub fn signal_param(&self) -> usize {
        self.log_lengthscales.len()
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.log_lengthscales.len() == 1 || self.log_lengthscales.len() == d {
            Ok(())
        } else {
            Err(MsgpError::DimensionMismatch {
                expected: self.log_lengthscales.len(),
                got: d,
            })
        }
    }

    /// True when `K_UU` factors into a Kronecker product over grid dimensions.
    pub fn is_separable(&self, d: usize) -> bool {
        d == 1 || self.composition == Composition::Product || self.family == KernelFamily::Se
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        check_len(x.len(), z.len())?;
        self.check_dim(x.len())?;
        let delta: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        Ok(self.eval_offset(&delta))
    }

    pub fn eval_grad(&self, x: &[f64], z: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len(x.len(), z.len())?;
        self.check_dim(x.len())?;
        let delta: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        Ok(self.eval_offset_grad(&delta))
    }

    /// `k(δ)` without dimension checks.
    pub fn eval_offset(&self, delta: &[f64]) -> f64 {
        let s2 = self.signal_variance();
        let alpha = self.alpha();
        match self.composition {
            Composition::Product => {
                s2 * delta
                    .iter()
                    .enumerate()
                    .map(|(p, d)| profile(self.family, alpha, d.abs() / self.lengthscale(p)))
                    .product::<f64>()
            }
            Composition::Radial => s2 * profile(self.family, alpha, self.scaled_norm(delta)),
        }
    }

    fn scaled_norm(&self, delta: &[f64]) -> f64 {
        delta
            .iter()
            .enumerate()
            .map(|(p, d)| (d / self.lengthscale(p)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn eval_offset_grad(&self, delta: &[f64]) -> (f64, Vec<f64>) {
        let s2 = self.signal_variance();
        let alpha = self.alpha();
        let mut grad = vec![0.0; self.num_params()];
        let scaled: Vec<f64> = delta.iter().enumerate().map(|(p, d)| d.abs() / self.lengthscale(p)).collect();
        let value = match self.composition {
            Composition::Product => {
                let f: Vec<f64> = scaled.iter().map(|&a| profile(self.family, alpha, a)).collect();
                let value = s2 * f.iter().product::<f64>();
                for p in 0..scaled.len() {
                    let others: f64 = s2 * f.iter().enumerate().filter(|(q, _)| *q != p).map(|(_, v)| v).product::<f64>();
                    let a = scaled[p];
                    grad[self.lengthscale_param(p)] += others * profile_slope(self.family, alpha, a) * a * a;
                    if let Some(ai) = self.alpha_param() {
                        grad[ai] += others * profile_dlog_alpha(alpha, a);
                    }
                }
                value
            }
            Composition::Radial => {
                let r = scaled.iter().map(|a| a * a).sum::<f64>().sqrt();
                let slope = s2 * profile_slope(self.family, alpha, r);
                for (p, a) in scaled.iter().enumerate() {
                    grad[self.lengthscale_param(p)] += slope * a * a;
                }
                if let Some(ai) = self.alpha_param() {
                    grad[ai] = s2 * profile_dlog_alpha(alpha, r);
                }
                s2 * profile(self.family, alpha, r)
            }
        };
        grad[self.signal_param()] = value;
        (value, grad)
    }

    /// Unit-variance 1D factor for dimension `p` at lag `tau`.
    pub fn factor_lag(&self, p: usize, tau: f64) -> f64 {
        profile(self.family, self.alpha(), tau.abs() / self.lengthscale(p))
    }

    /// `(f, ∂f/∂log ℓ_p, ∂f/∂log α)` for the unit-variance 1D factor.
    pub fn factor_lag_grad(&self, p: usize, tau: f64) -> (f64, f64, f64) {
        let alpha = self.alpha();
        let a = tau.abs() / self.lengthscale(p);
        let dalpha = if self.has_alpha() { profile_dlog_alpha(alpha, a) } else { 0.0 };
        (
            profile(self.family, alpha, a),
            profile_slope(self.family, alpha, a) * a * a,
            dalpha,
        )
    }

    /// First Toeplitz column per grid dimension, such that
    /// `K_UU = T_1 ⊗ ... ⊗ T_D`. The signal variance sits in the first factor.
    pub fn product_column(&self, grid: &InducingGrid) -> Result<Vec<Vec<f64>>> {
        let d = grid.dim();
        self.check_dim(d)?;
        if !self.is_separable(d) {
            return Err(MsgpError::NonSeparable);
        }
        let s2 = self.signal_variance();
        Ok((0..d)
            .map(|p| {
                let h = grid.spacing(p);
                let scale = if p == 0 { s2 } else { 1.0 };
                (0..grid.size(p)).map(|j| scale * self.factor_lag(p, j as f64 * h)).collect()
            })
            .collect())
    }
}
