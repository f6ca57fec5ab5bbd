//! Structured grid covariance `K_UU` and the interpolated operator
//! `W K_UU Wᵀ + σ² I`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, MsgpError, Result};
use crate::interpolation::{InducingGrid, SparseInterpolation};
use crate::kernels::KernelSpec;
use crate::linalg::{BttbOperator, KroneckerOperator, LinearOperator, StructuredOperator, ToeplitzOperator};

/// Which structure to exploit in `K_UU`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridStructure {
    /// Kronecker of Toeplitz when the kernel is separable, BTTB otherwise.
    #[default]
    Auto,
    Kronecker,
    Bttb,
}

impl GridStructure {
    pub fn resolve(self, kernel: &KernelSpec, d: usize) -> Result<GridStructure> {
        match self {
            GridStructure::Auto => Ok(if kernel.is_separable(d) {
                GridStructure::Kronecker
            } else {
                GridStructure::Bttb
            }),
            GridStructure::Kronecker if !kernel.is_separable(d) => Err(MsgpError::NonSeparable),
            other => Ok(other),
        }
    }
}

// Unit-variance factor columns and their derivatives, one per dimension.
pub(crate) struct FactorColumns {
    pub value: Vec<Vec<f64>>,
    pub dlog_ell: Vec<Vec<f64>>,
    pub dlog_alpha: Vec<Vec<f64>>,
}

pub(crate) fn factor_columns(kernel: &KernelSpec, grid: &InducingGrid) -> FactorColumns {
    let d = grid.dim();
    let mut out = FactorColumns {
        value: Vec::with_capacity(d),
        dlog_ell: Vec::with_capacity(d),
        dlog_alpha: Vec::with_capacity(d),
    };
    for p in 0..d {
        let h = grid.spacing(p);
        let (mut v, mut de, mut da) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..grid.size(p) {
            let (f, fe, fa) = kernel.factor_lag_grad(p, j as f64 * h);
            v.push(f);
            de.push(fe);
            da.push(fa);
        }
        out.value.push(v);
        out.dlog_ell.push(de);
        out.dlog_alpha.push(da);
    }
    out
}

fn kronecker_of(columns: Vec<Vec<f64>>, scale: f64) -> Result<StructuredOperator> {
    let mut factors = Vec::with_capacity(columns.len());
    for (p, mut c) in columns.into_iter().enumerate() {
        if p == 0 {
            c.iter_mut().for_each(|x| *x *= scale);
        }
        factors.push(StructuredOperator::from(ToeplitzOperator::new(c)?));
    }
    if factors.len() == 1 {
        return Ok(factors.pop().expect("one factor"));
    }
    Ok(KroneckerOperator::new(factors)?.into())
}

fn bttb_generator(grid: &InducingGrid, f: impl Fn(&[f64]) -> f64) -> Result<StructuredOperator> {
    let h: Vec<f64> = (0..grid.dim()).map(|p| grid.spacing(p)).collect();
    let mut buf = vec![0.0; grid.dim()];
    let op = BttbOperator::from_offsets(grid.sizes(), |o| {
        for (b, (&oi, hi)) in buf.iter_mut().zip(o.iter().zip(&h)) {
            *b = oi as f64 * hi;
        }
        f(&buf)
    })?;
    Ok(op.into())
}

/// `K_UU` for `kernel` on `grid`.
pub fn grid_covariance(kernel: &KernelSpec, grid: &InducingGrid, structure: GridStructure) -> Result<StructuredOperator> {
    match structure.resolve(kernel, grid.dim())? {
        GridStructure::Kronecker => kronecker_of(factor_columns(kernel, grid).value, kernel.signal_variance()),
        _ => bttb_generator(grid, |o| kernel.eval_offset(o)),
    }
}

/// `∂K_UU/∂θ_k` for every kernel parameter, each as a sum of structured terms.
pub fn grid_covariance_derivatives(
    kernel: &KernelSpec,
    grid: &InducingGrid,
    structure: GridStructure,
) -> Result<Vec<Vec<StructuredOperator>>> {
    let d = grid.dim();
    let mut out: Vec<Vec<StructuredOperator>> = (0..kernel.num_params()).map(|_| Vec::new()).collect();
    match structure.resolve(kernel, d)? {
        GridStructure::Kronecker => {
            let cols = factor_columns(kernel, grid);
            let s2 = kernel.signal_variance();
            for p in 0..d {
                let mut c = cols.value.clone();
                c[p] = cols.dlog_ell[p].clone();
                out[kernel.lengthscale_param(p)].push(kronecker_of(c, s2)?);
                if let Some(a) = kernel.alpha_param() {
                    let mut c = cols.value.clone();
                    c[p] = cols.dlog_alpha[p].clone();
                    out[a].push(kronecker_of(c, s2)?);
                }
            }
            out[kernel.signal_param()].push(kronecker_of(cols.value, s2)?);
        }
        _ => {
            for (k, slot) in out.iter_mut().enumerate() {
                slot.push(bttb_generator(grid, |o| kernel.eval_offset_grad(o).1[k])?);
            }
        }
    }
    Ok(out)
}

/// `W K_UU Wᵀ + σ² I`.
#[derive(Clone, Debug)]
pub struct SkiOperator {
    w: SparseInterpolation,
    kuu: StructuredOperator,
    sigma2: f64,
}

impl SkiOperator {
    pub fn new(w: SparseInterpolation, kuu: StructuredOperator, sigma2: f64) -> Result<Self> {
        check_len(w.cols(), kuu.dim())?;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(MsgpError::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self { w, kuu, sigma2 })
    }

    pub fn w(&self) -> &SparseInterpolation {
        &self.w
    }

    pub fn kuu(&self) -> &StructuredOperator {
        &self.kuu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `K_UU Wᵀ v`, the interpolated cross-covariance applied to `v`.
    pub fn cross_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.kuu.apply(&self.w.apply_transpose(v)?)
    }

    /// `W K_UU Wᵀ v` without the noise term.
    pub fn kernel_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.w.apply(&self.cross_apply(v)?)
    }
}

impl LinearOperator for SkiOperator {
    fn dim(&self) -> usize {
        self.w.rows()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.kernel_apply(v)?;
        for (o, x) in out.iter_mut().zip(v) {
            *o += self.sigma2 * x;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolation::interp_weights;
    use crate::kernels::{Composition, KernelFamily};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram(kernel: &KernelSpec, pts: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(pts.len(), pts.len(), |i, j| kernel.eval(&pts[i], &pts[j]).unwrap())
    }

    #[test]
    fn kuu_matches_gram_for_both_structures() {
        let grid = InducingGrid::new(&[0.0, -1.0], &[2.0, 1.0], &[6, 5]).unwrap();
        let pts = grid.points();
        let k = KernelSpec::se(&[0.7, 1.1], 1.4);
        let want = gram(&k, &pts);
        for s in [GridStructure::Kronecker, GridStructure::Bttb] {
            let kuu = grid_covariance(&k, &grid, s).unwrap();
            assert!((kuu.to_dense() - &want).amax() < 1e-12, "{s:?}");
        }
        let radial = KernelSpec::new(KernelFamily::Matern52, &[0.9], 1.0).with_composition(Composition::Radial);
        let kuu = grid_covariance(&radial, &grid, GridStructure::Auto).unwrap();
        assert!(matches!(kuu, StructuredOperator::Bttb(_)));
        assert!((kuu.to_dense() - gram(&radial, &pts)).amax() < 1e-12);
        assert!(grid_covariance(&radial, &grid, GridStructure::Kronecker).is_err());
    }

    #[test]
    fn derivative_operators_match_finite_differences() {
        let grid = InducingGrid::new(&[0.0, 0.0], &[1.5, 2.0], &[5, 6]).unwrap();
        let kernels = [
            KernelSpec::rq(&[0.6, 0.9], 1.3, 1.7),
            KernelSpec::rq(&[0.8], 1.1, 0.6).with_composition(Composition::Radial),
            KernelSpec::new(KernelFamily::Matern32, &[0.5, 1.2], 0.8),
        ];
        for k in &kernels {
            for s in [GridStructure::Kronecker, GridStructure::Bttb] {
                let Ok(derivs) = grid_covariance_derivatives(k, &grid, s) else {
                    continue;
                };
                let p0 = k.params();
                for (i, terms) in derivs.iter().enumerate() {
                    let analytic = terms.iter().map(|t| t.to_dense()).fold(DMatrix::zeros(30, 30), |a, b| a + b);
                    let h = 1e-6;
                    let mut pp = p0.clone();
                    pp[i] += h;
                    let up = grid_covariance(&k.with_params(&pp).unwrap(), &grid, s).unwrap().to_dense();
                    pp[i] -= 2.0 * h;
                    let dn = grid_covariance(&k.with_params(&pp).unwrap(), &grid, s).unwrap().to_dense();
                    let fd = (up - dn) / (2.0 * h);
                    assert!((analytic - &fd).amax() < 1e-7 * fd.amax().max(1.0), "{k:?} {s:?} param {i}");
                }
            }
        }
    }

    #[test]
    fn ski_is_symmetric_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let grid = InducingGrid::new(&[0.0], &[10.0], &[40]).unwrap();
        let x = DMatrix::from_fn(80, 1, |_, _| rng.gen_range(0.5..9.5));
        let w = interp_weights(&grid, &x, false).unwrap();
        let k = KernelSpec::se(&[1.0], 1.0);
        let a = SkiOperator::new(w, grid_covariance(&k, &grid, GridStructure::Auto).unwrap(), 0.1).unwrap();
        for _ in 0..100 {
            let v: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let av = a.apply(&v).unwrap();
            let au = a.apply(&u).unwrap();
            let lhs: f64 = av.iter().zip(&u).map(|(p, q)| p * q).sum();
            let rhs: f64 = au.iter().zip(&v).map(|(p, q)| p * q).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            assert!(av.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn on_grid_ski_is_exact() {
        let grid = InducingGrid::new(&[0.0, 0.0], &[3.0, 4.0], &[4, 5]).unwrap();
        let pts = grid.points();
        let picks = [0usize, 3, 7, 8, 12, 19, 11];
        let x = DMatrix::from_fn(picks.len(), 2, |i, p| pts[picks[i]][p]);
        let k = KernelSpec::new(KernelFamily::Matern32, &[1.3, 0.7], 2.0);
        let w = interp_weights(&grid, &x, false).unwrap();
        let a = SkiOperator::new(w, grid_covariance(&k, &grid, GridStructure::Auto).unwrap(), 1e-3).unwrap();
        let chosen: Vec<Vec<f64>> = picks.iter().map(|&i| pts[i].clone()).collect();
        let want = gram(&k, &chosen) + DMatrix::identity(picks.len(), picks.len()) * 1e-3;
        assert!((a.to_dense() - want).amax() < 1e-10);
    }
}
