//! Linear input projections `u = Q x` with `Q` a normalized version of a
//! free `d × D` matrix `P`, and the chain rule through the normalization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MsgpError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    /// Rows of `Q` have unit norm.
    #[default]
    Unit,
    /// `Q Qᵀ = I`.
    Orthonormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    pub raw: DMatrix<f64>,
    pub normalization: Normalization,
}

fn check_rank(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() == 0 || p.nrows() > p.ncols() {
        return Err(MsgpError::InvalidArgument(format!(
            "projection must be d x D with 1 <= d <= D, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("projection matrix".into()));
    }
    let sv = p.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 1e-10 * hi) {
        return Err(MsgpError::RankDeficient(format!(
            "projection singular values range over [{lo:e}, {hi:e}]"
        )));
    }
    Ok(())
}

/// `diag(p) P` with `p_i = 1 / ‖P_i‖`.
pub fn normalize_unit(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut q = p.clone();
    for (i, mut row) in q.row_iter_mut().enumerate() {
        let norm = row.norm();
        if !(norm > 0.0) {
            return Err(MsgpError::RankDeficient(format!("projection row {i} is zero")));
        }
        row /= norm;
    }
    Ok(q)
}

// P = U Σ Wᵀ gives P Pᵀ = U Σ² Uᵀ; returns (U, Σ). The SVD keeps U
// orthonormal to rounding, which the symmetric eigensolver does not always.
fn gram_sqrt(p: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let svd = p.clone().svd(true, false);
    let s = svd.singular_values;
    let max = s.max();
    if let Some(&value) = s.iter().find(|&&v| !(v > 1e-10 * max) || max <= 0.0) {
        return Err(MsgpError::RankDeficient(format!("P has singular value {value:e}")));
    }
    Ok((svd.u.expect("requested"), s))
}

/// `(P Pᵀ)^{-1/2} P`, computed as `U Wᵀ` from `P = U Σ Wᵀ`.
pub fn normalize_orthonormal(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    gram_sqrt(p)?;
    let svd = p.clone().svd(true, true);
    Ok(svd.u.expect("requested") * svd.v_t.expect("requested"))
}

/// Gradient with respect to `P` given the gradient `g` with respect to
/// `Q = diag(p) P`.
pub fn grad_transform_unit(g: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    shapes_match(g, p)?;
    let mut out = DMatrix::zeros(p.nrows(), p.ncols());
    for i in 0..p.nrows() {
        let row = p.row(i);
        let norm = row.norm();
        if !(norm > 0.0) {
            return Err(MsgpError::RankDeficient(format!("projection row {i} is zero")));
        }
        let pi = 1.0 / norm;
        let gp = g.row(i).dot(&row);
        out.set_row(i, &(g.row(i) * pi - row * (gp * pi.powi(3))));
    }
    Ok(out)
}

/// Gradient with respect to `P` given the gradient `g` with respect to
/// `Q = (P Pᵀ)^{-1/2} P`.
pub fn grad_transform_orthonormal(g: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    shapes_match(g, p)?;
    let (v, s) = gram_sqrt(p)?;
    let s_inv = &v * DMatrix::from_diagonal(&s.map(|x| 1.0 / x)) * v.transpose();
    let sym = g * p.transpose() + p * g.transpose();
    let mut a = v.transpose() * &s_inv * sym * &s_inv * &v;
    let d = s.len();
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] /= s[i] + s[j];
        }
    }
    Ok(&s_inv * g - &v * a * v.transpose() * p)
}

fn shapes_match(g: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<()> {
    if g.shape() != p.shape() {
        return Err(MsgpError::InvalidArgument(format!(
            "gradient shape {:?} does not match projection shape {:?}",
            g.shape(),
            p.shape()
        )));
    }
    Ok(())
}

/// Orthogonal projector onto the row space of `p`.
fn row_space_projector(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rank(p)?;
    let q = normalize_orthonormal(p)?;
    Ok(q.transpose() * q)
}

/// `‖G_1 − G_2‖_2` for the orthogonal projectors onto the row spaces.
pub fn subspace_dist(p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<f64> {
    if p1.shape() != p2.shape() {
        return Err(MsgpError::InvalidArgument(format!(
            "subspace distance needs equal shapes, got {:?} and {:?}",
            p1.shape(),
            p2.shape()
        )));
    }
    let diff = row_space_projector(p1)? - row_space_projector(p2)?;
    let eig = diff.symmetric_eigen().eigenvalues;
    Ok(eig.iter().fold(0.0f64, |m, x| m.max(x.abs())).min(1.0))
}

impl ProjectionMatrix {
    pub fn new(raw: DMatrix<f64>, normalization: Normalization) -> Result<Self> {
        check_rank(&raw)?;
        Ok(Self { raw, normalization })
    }

    /// Standard normal entries scaled by `1/√D`.
    pub fn random(d: usize, big_d: usize, normalization: Normalization, rng: &mut impl Rng) -> Result<Self> {
        let scale = 1.0 / (big_d as f64).sqrt();
        let raw = DMatrix::from_fn(d, big_d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        Self::new(raw, normalization)
    }

    pub fn output_dim(&self) -> usize {
        self.raw.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.raw.ncols()
    }

    pub fn normalized(&self) -> Result<DMatrix<f64>> {
        match self.normalization {
            Normalization::None => {
                check_rank(&self.raw)?;
                Ok(self.raw.clone())
            }
            Normalization::Unit => normalize_unit(&self.raw),
            Normalization::Orthonormal => normalize_orthonormal(&self.raw),
        }
    }

    /// Projects the rows of `x` (n × D) to n × d.
    pub fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(MsgpError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        check_rank(&self.raw)?;
        Ok(x * self.normalized()?.transpose())
    }

    /// Gradient with respect to the raw matrix from the gradient with respect
    /// to the normalized one.
    pub fn grad_transform(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self.normalization {
            Normalization::None => {
                shapes_match(g, &self.raw)?;
                Ok(g.clone())
            }
            Normalization::Unit => grad_transform_unit(g, &self.raw),
            Normalization::Orthonormal => grad_transform_orthonormal(g, &self.raw),
        }
    }

    pub fn with_raw(&self, raw: DMatrix<f64>) -> Result<Self> {
        Self::new(raw, self.normalization)
    }
}
