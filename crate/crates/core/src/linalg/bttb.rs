use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use super::{unravel, wrap, LinearOperator};
use crate::error::{check_len, MsgpError, Result};
use crate::fft::{spectral_apply, FftNd, IMAG_TOLERANCE};

/// Symmetric block-Toeplitz matrix with Toeplitz blocks on an
/// `n_1 × ... × n_D` grid, `B[i, j] = g(i - j)` for a generator `g` over
/// signed multi-offsets.
///
/// The generator is stored directly as the first column of the dimension-wise
/// circulant embedding of shape `(2n_1 - 1) × ... × (2n_D - 1)`: offset `δ`
/// lives at index `δ mod (2n_p - 1)` along each axis. Storing every sign
/// combination is what lets non-separable kernels (whose blocks are not
/// symmetric) be represented.
#[derive(Clone, Debug)]
pub struct BttbOperator {
    shape: Vec<usize>,
    embed_shape: Vec<usize>,
    generator: Vec<f64>,
    spectrum: Vec<Complex64>,
    plan: FftNd,
}

impl BttbOperator {
    /// Evaluates `g` at every signed offset `δ` with `|δ_p| < n_p`.
    /// `g(δ)` must equal `g(-δ)`.
    pub fn from_offsets<F>(shape: &[usize], mut g: F) -> Result<Self>
    where
        F: FnMut(&[isize]) -> f64,
    {
        if shape.is_empty() || shape.iter().any(|&n| n == 0) {
            return Err(MsgpError::InvalidArgument("BTTB shape must be non-empty".into()));
        }
        let embed_shape: Vec<usize> = shape.iter().map(|&n| 2 * n - 1).collect();
        let total: usize = embed_shape.iter().product();
        let mut generator = vec![0.0; total];
        let mut idx = vec![0usize; shape.len()];
        let mut offset = vec![0isize; shape.len()];
        for (flat, g_out) in generator.iter_mut().enumerate() {
            unravel(flat, &embed_shape, &mut idx);
            for p in 0..shape.len() {
                let n = shape[p] as isize;
                let i = idx[p] as isize;
                offset[p] = if i < n { i } else { i - (2 * n - 1) };
            }
            *g_out = g(&offset);
        }
        Self::from_embedded(shape, generator)
    }

    /// Generator block `n_1 × ... × n_D` holding `k(u_i - u_0)` for
    /// non-negative offsets; values at other sign combinations are mirrored.
    /// Only valid for kernels that are even in every coordinate separately.
    pub fn from_symmetric_block(shape: &[usize], block: &[f64]) -> Result<Self> {
        check_len(shape.iter().product(), block.len())?;
        let strides = row_major_strides(shape);
        Self::from_offsets(shape, |offset| {
            let flat: usize = offset.iter().zip(&strides).map(|(o, s)| o.unsigned_abs() * s).sum();
            block[flat]
        })
    }

    fn from_embedded(shape: &[usize], generator: Vec<f64>) -> Result<Self> {
        if generator.iter().any(|x| !x.is_finite()) {
            return Err(MsgpError::NonFinite("BTTB generator".into()));
        }
        let embed_shape: Vec<usize> = shape.iter().map(|&n| 2 * n - 1).collect();
        let plan = FftNd::new(&embed_shape);
        let spectrum = plan.forward_real(&generator);
        let op = Self {
            shape: shape.to_vec(),
            embed_shape,
            generator,
            spectrum,
            plan,
        };
        if !op.generator_is_even() {
            return Err(MsgpError::NotSymmetric("BTTB generator must satisfy g(δ) = g(-δ)".into()));
        }
        Ok(op)
    }

    fn generator_is_even(&self) -> bool {
        let scale = self.generator.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let d = self.shape.len();
        let mut idx = vec![0usize; d];
        let strides = row_major_strides(&self.embed_shape);
        (0..self.generator.len()).all(|flat| {
            unravel(flat, &self.embed_shape, &mut idx);
            let mirrored: usize = idx
                .iter()
                .zip(&self.embed_shape)
                .zip(&strides)
                .map(|((&i, &n), &s)| ((n - i) % n) * s)
                .sum();
            (self.generator[flat] - self.generator[mirrored]).abs() <= 1e-12 * scale
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Value of the generator at a signed offset.
    pub fn generator_at(&self, offset: &[isize]) -> f64 {
        let strides = row_major_strides(&self.embed_shape);
        let flat: usize = offset
            .iter()
            .zip(&self.embed_shape)
            .zip(&strides)
            .map(|((&o, &n), &s)| wrap(o, n) * s)
            .sum();
        self.generator[flat]
    }
}

impl LinearOperator for BttbOperator {
    fn dim(&self) -> usize {
        self.shape.iter().product()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        let d = self.shape.len();
        let embed_strides = row_major_strides(&self.embed_shape);
        let mut idx = vec![0usize; d];
        let mut padded = vec![0.0; self.generator.len()];
        let mut positions = Vec::with_capacity(v.len());
        for (flat, &x) in v.iter().enumerate() {
            unravel(flat, &self.shape, &mut idx);
            let pos: usize = idx.iter().zip(&embed_strides).map(|(i, s)| i * s).sum();
            padded[pos] = x;
            positions.push(pos);
        }
        let full = spectral_apply(&self.plan, &self.spectrum, &padded)?;
        Ok(positions.into_iter().map(|p| full[p]).collect())
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let d = self.shape.len();
        let mut a = vec![0usize; d];
        let mut b = vec![0usize; d];
        let mut offset = vec![0isize; d];
        DMatrix::from_fn(n, n, |i, j| {
            unravel(i, &self.shape, &mut a);
            unravel(j, &self.shape, &mut b);
            for p in 0..d {
                offset[p] = a[p] as isize - b[p] as isize;
            }
            self.generator_at(&offset)
        })
    }
}

/// Block-circulant matrix with circulant blocks, defined by its first column
/// reshaped to an `n_1 × ... × n_D` tensor: `C[i, j] = c[(i - j) mod n]`.
/// Diagonalized by `F = F_1 ⊗ ... ⊗ F_D`.
#[derive(Clone, Debug)]
pub struct BccbOperator {
    shape: Vec<usize>,
    first_column: Vec<f64>,
    spectrum: Vec<Complex64>,
    plan: FftNd,
}

impl BccbOperator {
    pub fn new(shape: &[usize], first_column: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&n| n == 0) {
            return Err(MsgpError::InvalidArgument("BCCB shape must be non-empty".into()));
        }
        check_len(shape.iter().product(), first_column.len())?;
        if first_column.iter().any(|x| !x.is_finite()) {
            return Err(MsgpError::NonFinite("BCCB column".into()));
        }
        let plan = FftNd::new(shape);
        let spectrum = plan.forward_real(&first_column);
        Ok(Self {
            shape: shape.to_vec(),
            first_column,
            spectrum,
            plan,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn first_column(&self) -> &[f64] {
        &self.first_column
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.first_column.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let strides = row_major_strides(&self.shape);
        let mut idx = vec![0usize; self.shape.len()];
        (0..self.first_column.len()).all(|flat| {
            unravel(flat, &self.shape, &mut idx);
            let mirrored: usize = idx
                .iter()
                .zip(&self.shape)
                .zip(&strides)
                .map(|((&i, &n), &s)| ((n - i) % n) * s)
                .sum();
            (self.first_column[flat] - self.first_column[mirrored]).abs() <= 1e-10 * scale
        })
    }

    /// Real eigenvalues in multidimensional Fourier order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_symmetric() {
            return Err(MsgpError::NotSymmetric(
                "BCCB column must satisfy c[k] = c[-k mod n] in every dimension".into(),
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

impl LinearOperator for BccbOperator {
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
        let n = self.dim();
        let d = self.shape.len();
        let strides = row_major_strides(&self.shape);
        let mut a = vec![0usize; d];
        let mut b = vec![0usize; d];
        DMatrix::from_fn(n, n, |i, j| {
            unravel(i, &self.shape, &mut a);
            unravel(j, &self.shape, &mut b);
            let flat: usize = (0..d)
                .map(|p| wrap(a[p] as isize - b[p] as isize, self.shape[p]) * strides[p])
                .sum();
            self.first_column[flat]
        })
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for p in (0..shape.len().saturating_sub(1)).rev() {
        strides[p] = strides[p + 1] * shape[p + 1];
    }
    strides
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::*;
    use crate::linalg::ToeplitzOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Full-covariance SE: exp(-0.5 δᵀ Σ⁻¹ δ) with correlated axes, so blocks are not symmetric.
    fn correlated_se(offset: &[f64]) -> f64 {
        let (a, b) = (offset[0], offset[1]);
        (-0.5 * (a * a / 1.5 + b * b / 0.8 - 2.0 * 0.6 * a * b / (1.5f64 * 0.8).sqrt())).exp()
    }

    #[test]
    fn one_dimensional_equals_toeplitz() {
        let col: Vec<f64> = (0..9).map(|i| (-(i as f64) / 3.0).exp()).collect();
        let b = BttbOperator::from_symmetric_block(&[9], &col).unwrap();
        let t = ToeplitzOperator::new(col).unwrap();
        let v: Vec<f64> = (0..9).map(|i| (i as f64).cos()).collect();
        assert!(rel_err(&b.apply(&v).unwrap(), &t.apply(&v).unwrap()) < 1e-12);
    }

    #[test]
    fn non_separable_3x3_matches_direct_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = [0.7, 0.4];
        let b = BttbOperator::from_offsets(&[3, 3], |o| correlated_se(&[o[0] as f64 * h[0], o[1] as f64 * h[1]]))
            .unwrap();
        // Direct Gram matrix over grid points, row-major.
        let pts: Vec<[f64; 2]> = (0..9).map(|f| [(f / 3) as f64 * h[0], (f % 3) as f64 * h[1]]).collect();
        let gram = DMatrix::from_fn(9, 9, |i, j| correlated_se(&[pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]]));
        assert!((b.to_dense() - &gram).amax() < 1e-14);
        let v = random_vec(&mut rng, 9);
        assert!(rel_err(&b.apply(&v).unwrap(), &dense_mul(&gram, &v)) < 1e-10);
    }

    #[test]
    fn delta_generator_is_identity() {
        let b = BttbOperator::from_offsets(&[4, 3, 2], |o| if o.iter().all(|&x| x == 0) { 1.0 } else { 0.0 }).unwrap();
        let v: Vec<f64> = (0..24).map(|i| i as f64 * 0.5 - 3.0).collect();
        assert!(rel_err(&b.apply(&v).unwrap(), &v) < 1e-12);
    }

    #[test]
    fn three_dimensional_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let b = BttbOperator::from_offsets(&[3, 4, 2], |o| {
            let r2 = (o[0] * o[0]) as f64 / 2.0 + (o[1] * o[1]) as f64 / 3.0 + (o[2] * o[2]) as f64 + 0.3 * (o[0] * o[1]) as f64;
            (-0.5 * r2).exp()
        })
        .unwrap();
        let v = random_vec(&mut rng, 24);
        assert!(rel_err(&b.apply(&v).unwrap(), &dense_mul(&b.to_dense(), &v)) < 1e-10);
    }

    #[test]
    fn odd_generator_rejected() {
        assert!(BttbOperator::from_offsets(&[3], |o| o[0] as f64).is_err());
    }

    #[test]
    fn bccb_all_ones() {
        let c = BccbOperator::new(&[2, 2], vec![1.0; 4]).unwrap();
        let ev = sorted(c.eigenvalues().unwrap());
        assert!(rel_err(&ev, &[0.0, 0.0, 0.0, 4.0]) < 1e-15);
        assert!((c.to_dense() - DMatrix::from_element(4, 4, 1.0)).amax() == 0.0);
    }

    #[test]
    fn bccb_delta() {
        let mut col = vec![0.0; 12];
        col[0] = 1.0;
        let c = BccbOperator::new(&[3, 4], col).unwrap();
        assert!(c.eigenvalues().unwrap().iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn bccb_random_symmetric_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let shape = [4, 4];
        let mut col = vec![0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                let v: f64 = rng.gen_range(-1.0..1.0);
                let (mi, mj) = ((4 - i) % 4, (4 - j) % 4);
                if (mi, mj) < (i, j) {
                    continue;
                }
                col[i * 4 + j] = v;
                col[mi * 4 + mj] = v;
            }
        }
        let c = BccbOperator::new(&shape, col).unwrap();
        let dense = c.to_dense();
        let fast = sorted(c.eigenvalues().unwrap());
        let slow = sorted(dense.clone().symmetric_eigen().eigenvalues.data.into());
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-8);
        }
        let v = random_vec(&mut rng, 16);
        assert!(rel_err(&c.apply(&v).unwrap(), &dense_mul(&dense, &v)) < 1e-10);
    }

    #[test]
    fn bccb_broken_symmetry_rejected() {
        let c = BccbOperator::new(&[3], vec![1.0, 0.5, 0.2]).unwrap();
        assert!(matches!(c.eigenvalues(), Err(MsgpError::NotSymmetric(_))));
    }
}
