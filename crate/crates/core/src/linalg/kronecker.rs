use nalgebra::DMatrix;

use super::{DenseOperator, LinearOperator, StructuredOperator};
use crate::error::{check_len, MsgpError, Result};

/// `K_1 ⊗ ... ⊗ K_P` over a row-major index, so the last factor varies fastest.
#[derive(Clone, Debug)]
pub struct KroneckerOperator {
    factors: Vec<StructuredOperator>,
    sizes: Vec<usize>,
}

/// Eigendecomposition `K = Q diag(values) Qᵀ` with `Q` kept in Kronecker form.
#[derive(Clone, Debug)]
pub struct KroneckerEigen {
    pub vectors: KroneckerOperator,
    /// All products of factor eigenvalues, in the same row-major order as `vectors`.
    pub values: Vec<f64>,
    pub factor_values: Vec<Vec<f64>>,
}

impl KroneckerOperator {
    pub fn new(factors: Vec<StructuredOperator>) -> Result<Self> {
        if factors.is_empty() {
            return Err(MsgpError::InvalidArgument("Kronecker product needs at least one factor".into()));
        }
        let sizes = factors.iter().map(|f| f.dim()).collect();
        Ok(Self { factors, sizes })
    }

    pub fn factors(&self) -> &[StructuredOperator] {
        &self.factors
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn apply_with(&self, v: &[f64], transpose: bool) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        let mut x = v.to_vec();
        let mut fibre = Vec::new();
        for (p, factor) in self.factors.iter().enumerate() {
            let n = self.sizes[p];
            if n == 1 {
                let scale = factor.apply(&[1.0])?[0];
                x.iter_mut().for_each(|e| *e *= scale);
                continue;
            }
            let right: usize = self.sizes[p + 1..].iter().product();
            let left: usize = self.sizes[..p].iter().product();
            fibre.resize(n, 0.0);
            for l in 0..left {
                let base = l * n * right;
                for r in 0..right {
                    for (i, f) in fibre.iter_mut().enumerate() {
                        *f = x[base + i * right + r];
                    }
                    let out = if transpose {
                        factor.apply_transpose(&fibre)?
                    } else {
                        factor.apply(&fibre)?
                    };
                    for (i, o) in out.into_iter().enumerate() {
                        x[base + i * right + r] = o;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Per-factor symmetric eigendecomposition, assembled into Kronecker form.
    pub fn eigendecomposition(&self) -> Result<KroneckerEigen> {
        let mut vectors = Vec::with_capacity(self.factors.len());
        let mut factor_values = Vec::with_capacity(self.factors.len());
        for (p, factor) in self.factors.iter().enumerate() {
            let dense = DenseOperator::new(factor.to_dense())?;
            if !dense.is_symmetric(1e-10) {
                return Err(MsgpError::NotSymmetric(format!("Kronecker factor {p}")));
            }
            let eig = dense.matrix().clone().symmetric_eigen();
            factor_values.push(eig.eigenvalues.data.as_vec().clone());
            vectors.push(StructuredOperator::Dense(DenseOperator::new(eig.eigenvectors)?));
        }
        let values = outer_product(&factor_values);
        Ok(KroneckerEigen {
            vectors: KroneckerOperator::new(vectors)?,
            values,
            factor_values,
        })
    }
}

/// Row-major outer product of the given vectors, flattened.
pub(crate) fn outer_product(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for part in parts {
        let mut next = Vec::with_capacity(out.len() * part.len());
        for &a in &out {
            for &b in part {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

impl LinearOperator for KroneckerOperator {
    fn dim(&self) -> usize {
        self.sizes.iter().product()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_with(v, false)
    }

    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_with(v, true)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::from_element(1, 1, 1.0);
        for f in &self.factors {
            out = out.kronecker(&f.to_dense());
        }
        out
    }
}

impl KroneckerEigen {
    /// `Q diag(values) Qᵀ v`.
    pub fn reconstruct_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut w = self.vectors.apply_transpose(v)?;
        w.iter_mut().zip(&self.values).for_each(|(x, l)| *x *= l);
        self.vectors.apply(&w)
    }
}
