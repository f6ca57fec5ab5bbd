use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use super::{wrap, LinearOperator};
use crate::error::{check_len, MsgpError, Result};
use crate::fft::{real_part_checked, spectral_apply, FftNd, IMAG_TOLERANCE};

/// Circulant matrix defined by its first column, `C[i, j] = c[(i - j) mod a]`.
///
/// The spectrum `F c` is computed at construction; for symmetric `c`
/// (`c[k] == c[a - k]`) it is real and equals the eigenvalues of `C`.
#[derive(Clone, Debug)]
pub struct CirculantOperator {
    first_column: Vec<f64>,
    spectrum: Vec<Complex64>,
    plan: FftNd,
}

impl CirculantOperator {
    pub fn new(first_column: Vec<f64>) -> Result<Self> {
        if first_column.is_empty() {
            return Err(MsgpError::InvalidArgument("empty circulant column".into()));
        }
        if first_column.iter().any(|x| !x.is_finite()) {
            return Err(MsgpError::NonFinite("circulant column".into()));
        }
        let plan = FftNd::new(&[first_column.len()]);
        let spectrum = plan.forward_real(&first_column);
        Ok(Self {
            first_column,
            spectrum,
            plan,
        })
    }

    /// Builds the circulant directly from a real, symmetric spectrum
    /// (eigenvalues in Fourier order).
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Result<Self> {
        let a = eigenvalues.len();
        let plan = FftNd::new(&[a]);
        let mut buf: Vec<Complex64> = eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        plan.inverse(&mut buf);
        let spectrum: Vec<Complex64> = eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let column = real_part_checked(&buf, eigenvalues, &spectrum)?;
        Ok(Self {
            first_column: column,
            spectrum,
            plan,
        })
    }

    pub fn first_column(&self) -> &[f64] {
        &self.first_column
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn is_symmetric(&self) -> bool {
        let a = self.first_column.len();
        let scale = self.first_column.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (1..a).all(|k| (self.first_column[k] - self.first_column[a - k]).abs() <= 1e-10 * scale)
    }

    /// Real eigenvalues in Fourier order. Errors for asymmetric columns.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_symmetric() {
            return Err(MsgpError::NotSymmetric(
                "circulant first column must satisfy c[k] = c[a-k]".into(),
            ));
        }
        let norm = self.spectrum.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
        let imag = self.spectrum.iter().map(|s| s.im * s.im).sum::<f64>().sqrt();
        if imag > IMAG_TOLERANCE * norm.max(f64::MIN_POSITIVE) {
            return Err(MsgpError::ImaginaryResidual {
                residual: imag,
                tolerance: IMAG_TOLERANCE * norm,
            });
        }
        Ok(self.spectrum.iter().map(|s| s.re).collect())
    }
}

impl LinearOperator for CirculantOperator {
    fn dim(&self) -> usize {
        self.first_column.len()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        spectral_apply(&self.plan, &self.spectrum, v)
    }

    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        let conj: Vec<Complex64> = self.spectrum.iter().map(|s| s.conj()).collect();
        spectral_apply(&self.plan, &conj, v)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let a = self.dim();
        DMatrix::from_fn(a, a, |i, j| self.first_column[wrap(i as isize - j as isize, a)])
    }
}
