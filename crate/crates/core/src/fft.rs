//! FFT backend used by every spectral operator in the crate.
//!
//! Higher modules only see [`FftPlan`] (one dimension) and [`FftNd`]
//! (row-major tensors); the concrete library behind them is `rustfft`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, MsgpError, Result};

/// Relative bound on the imaginary part left over after an inverse transform
/// that is expected to produce a real signal.
pub const IMAG_TOLERANCE: f64 = 1e-10;

/// Forward and inverse plans for one transform length.
#[derive(Clone)]
pub struct FftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftPlan").field("len", &self.len).finish()
    }
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward DFT, `X_k = sum_j x_j exp(-2 pi i jk / n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        if self.len > 1 {
            self.forward.process(buf);
        }
    }

    /// Inverse DFT including the `1/n` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        if self.len > 1 {
            self.inverse.process(buf);
        }
        let scale = 1.0 / self.len as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}

/// Multidimensional DFT over a row-major tensor (last axis fastest),
/// i.e. `F = F_1 ⊗ ... ⊗ F_D`.
#[derive(Clone, Debug)]
pub struct FftNd {
    shape: Vec<usize>,
    plans: Vec<FftPlan>,
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            plans: shape.iter().map(|&n| FftPlan::new(n)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.len());
        let mut fibre = Vec::new();
        for (axis, plan) in self.plans.iter().enumerate() {
            let n = self.shape[axis];
            if n == 1 {
                continue;
            }
            let right: usize = self.shape[axis + 1..].iter().product();
            let left: usize = self.shape[..axis].iter().product();
            fibre.resize(n, Complex64::new(0.0, 0.0));
            for l in 0..left {
                let base = l * n * right;
                for r in 0..right {
                    for (i, f) in fibre.iter_mut().enumerate() {
                        *f = buf[base + i * right + r];
                    }
                    if inverse {
                        plan.inverse(&mut fibre);
                    } else {
                        plan.forward(&mut fibre);
                    }
                    for (i, f) in fibre.iter().enumerate() {
                        buf[base + i * right + r] = *f;
                    }
                }
            }
        }
    }
}

/// Applies `F^{-1} diag(spectrum) F` to a real tensor of the plan's shape and
/// returns the real part, rejecting results whose imaginary residual exceeds
/// [`IMAG_TOLERANCE`] relative to the result norm.
///
/// The reference norm is floored at `1e-2 * ||v|| * max|spectrum|`, so a
/// result that cancels to numerical zero is judged against the input scale
/// rather than against its own rounding noise.
pub(crate) fn spectral_apply(plan: &FftNd, spectrum: &[Complex64], v: &[f64]) -> Result<Vec<f64>> {
    check_len(plan.len(), v.len())?;
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    plan.forward(&mut buf);
    for (b, s) in buf.iter_mut().zip(spectrum) {
        *b *= s;
    }
    plan.inverse(&mut buf);
    real_part_checked(&buf, v, spectrum)
}

pub(crate) fn real_part_checked(buf: &[Complex64], input: &[f64], spectrum: &[Complex64]) -> Result<Vec<f64>> {
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("spectral product".into()));
    }
    let peak = spectrum.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let reference = l2(&out).max(1e-2 * l2(input) * peak);
    let tolerance = IMAG_TOLERANCE * reference;
    let imag = buf.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if imag > tolerance {
        return Err(MsgpError::ImaginaryResidual { residual: imag, tolerance });
    }
    Ok(out)
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
