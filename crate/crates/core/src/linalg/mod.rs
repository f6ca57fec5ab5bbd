//! Structured covariance operators with fast matrix-vector products.
//!
//! Every operator implements [`LinearOperator`] and can be materialized with
//! [`LinearOperator::to_dense`], which is what the tests use as an oracle.
//! Operators are immutable after construction; spectra are computed eagerly.

mod bttb;
mod circulant;
mod dense;
mod kronecker;
mod toeplitz;

pub use bttb::{BccbOperator, BttbOperator};
pub use circulant::CirculantOperator;
pub use dense::DenseCholesky;
pub use kronecker::{KroneckerEigen, KroneckerOperator};
pub(crate) use kronecker::outer_product;
pub use toeplitz::ToeplitzOperator;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, MsgpError, Result};

/// A square real linear operator exposing matrix-vector products.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;

    /// `Aᵀ v`. Symmetric operators keep the default.
    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply(v)
    }

    /// Materializes the operator column by column. Only meant for small sizes.
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e).expect("unit vector has operator dimension");
            out.set_column(j, &DVector::from_vec(col));
            e[j] = 0.0;
        }
        out
    }
}

/// Approximate inverse used to precondition conjugate gradients.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>>;
}

/// Diagonal (Jacobi) preconditioner.
#[derive(Clone, Debug)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(diag: &[f64]) -> Result<Self> {
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, d)| **d <= 0.0 || !d.is_finite()) {
            return Err(MsgpError::NonPositiveEigenvalue { index, value });
        }
        Ok(Self {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.inv_diag.len(), v.len())?;
        Ok(v.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect())
    }
}

/// Plain dense matrix; serves as the fallback and as the in-tree oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(MsgpError::InvalidArgument(format!(
                "dense operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.matrix.amax().max(f64::MIN_POSITIVE);
        (&self.matrix - self.matrix.transpose()).amax() <= tol * scale
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        Ok((&self.matrix * DVector::from_column_slice(v)).data.into())
    }

    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        Ok((self.matrix.tr_mul(&DVector::from_column_slice(v))).data.into())
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

/// Closed set of operator kinds used for grid covariances.
#[derive(Clone, Debug)]
pub enum StructuredOperator {
    Dense(DenseOperator),
    Toeplitz(ToeplitzOperator),
    Circulant(CirculantOperator),
    Kronecker(KroneckerOperator),
    Bttb(BttbOperator),
    Bccb(BccbOperator),
    /// `inner + shift * I`.
    Shifted { inner: Box<StructuredOperator>, shift: f64 },
}

impl StructuredOperator {
    pub fn shifted(self, shift: f64) -> Self {
        StructuredOperator::Shifted {
            inner: Box::new(self),
            shift,
        }
    }

    fn as_dyn(&self) -> &dyn LinearOperator {
        match self {
            StructuredOperator::Dense(op) => op,
            StructuredOperator::Toeplitz(op) => op,
            StructuredOperator::Circulant(op) => op,
            StructuredOperator::Kronecker(op) => op,
            StructuredOperator::Bttb(op) => op,
            StructuredOperator::Bccb(op) => op,
            StructuredOperator::Shifted { .. } => unreachable!("handled by caller"),
        }
    }
}

impl LinearOperator for StructuredOperator {
    fn dim(&self) -> usize {
        match self {
            StructuredOperator::Shifted { inner, .. } => inner.dim(),
            other => other.as_dyn().dim(),
        }
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            StructuredOperator::Shifted { inner, shift } => {
                let mut out = inner.apply(v)?;
                for (o, x) in out.iter_mut().zip(v) {
                    *o += shift * x;
                }
                Ok(out)
            }
            other => other.as_dyn().apply(v),
        }
    }

    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            StructuredOperator::Shifted { inner, shift } => {
                let mut out = inner.apply_transpose(v)?;
                for (o, x) in out.iter_mut().zip(v) {
                    *o += shift * x;
                }
                Ok(out)
            }
            other => other.as_dyn().apply_transpose(v),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            StructuredOperator::Shifted { inner, shift } => {
                let n = inner.dim();
                inner.to_dense() + DMatrix::identity(n, n) * *shift
            }
            other => other.as_dyn().to_dense(),
        }
    }
}

impl From<DenseOperator> for StructuredOperator {
    fn from(op: DenseOperator) -> Self {
        StructuredOperator::Dense(op)
    }
}

impl From<ToeplitzOperator> for StructuredOperator {
    fn from(op: ToeplitzOperator) -> Self {
        StructuredOperator::Toeplitz(op)
    }
}

impl From<CirculantOperator> for StructuredOperator {
    fn from(op: CirculantOperator) -> Self {
        StructuredOperator::Circulant(op)
    }
}

impl From<KroneckerOperator> for StructuredOperator {
    fn from(op: KroneckerOperator) -> Self {
        StructuredOperator::Kronecker(op)
    }
}

impl From<BttbOperator> for StructuredOperator {
    fn from(op: BttbOperator) -> Self {
        StructuredOperator::Bttb(op)
    }
}

impl From<BccbOperator> for StructuredOperator {
    fn from(op: BccbOperator) -> Self {
        StructuredOperator::Bccb(op)
    }
}

/// Index of `offset` (possibly negative) in a wrap-around buffer of length `len`.
#[inline]
pub(crate) fn wrap(offset: isize, len: usize) -> usize {
    offset.rem_euclid(len as isize) as usize
}

/// Row-major multi-index of a flat index.
pub(crate) fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for (o, &n) in out.iter_mut().zip(shape).rev() {
        *o = flat % n;
        flat /= n;
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::DMatrix;
    use rand::Rng;

    pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    pub fn dense_mul(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (m * nalgebra::DVector::from_column_slice(v)).data.into()
    }

    pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    pub fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }
}
