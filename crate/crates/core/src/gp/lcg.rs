//! Linear conjugate gradients driven only by operator products.

use serde::{Deserialize, Serialize};

use crate::circulant_approx::{CirculantMethod, CirculantPreconditioner};
use crate::error::{check_len, MsgpError, Result};
use crate::linalg::{LinearOperator, Preconditioner, ToeplitzOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcgConfig {
    pub rel_tol: f64,
    /// Defaults to `min(n, 1000)`.
    #[serde(default)]
    pub max_iters: Option<usize>,
    /// Circulant preconditioner for Toeplitz systems.
    #[serde(default)]
    pub preconditioner: Option<CirculantMethod>,
}

impl Default for LcgConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_iters: None,
            preconditioner: None,
        }
    }
}

impl LcgConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iters.unwrap_or_else(|| n.min(1000)).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(MsgpError::InvalidArgument(format!("LCG tolerance must be positive, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖` from the recurrence.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn lcg_solve(a: &dyn LinearOperator, b: &[f64], cfg: &LcgConfig) -> Result<LcgOutcome> {
    solve(a, b, cfg, None)
}

pub fn lcg_solve_preconditioned(
    a: &dyn LinearOperator,
    b: &[f64],
    cfg: &LcgConfig,
    m: &dyn Preconditioner,
) -> Result<LcgOutcome> {
    check_len(a.dim(), m.dim())?;
    solve(a, b, cfg, Some(m))
}

/// Solves `(T + σ² I) x = b`, using the circulant preconditioner named in `cfg`
/// if any. `extension` supplies kernel values beyond the grid for Whittle.
pub fn solve_toeplitz(
    t: &ToeplitzOperator,
    sigma2: f64,
    b: &[f64],
    cfg: &LcgConfig,
    extension: Option<&dyn Fn(usize) -> f64>,
) -> Result<LcgOutcome> {
    let op = crate::linalg::StructuredOperator::from(t.clone()).shifted(sigma2);
    match cfg.preconditioner {
        Some(method) => {
            let pre = CirculantPreconditioner::for_toeplitz(t, method, extension, sigma2)?;
            lcg_solve_preconditioned(&op, b, cfg, &pre)
        }
        None => lcg_solve(&op, b, cfg),
    }
}

fn solve(a: &dyn LinearOperator, b: &[f64], cfg: &LcgConfig, m: Option<&dyn Preconditioner>) -> Result<LcgOutcome> {
    cfg.validate()?;
    let n = a.dim();
    check_len(n, b.len())?;
    if b.iter().any(|x| !x.is_finite()) {
        return Err(MsgpError::NonFinite("right-hand side".into()));
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(LcgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let precondition = |r: &[f64]| -> Result<Vec<f64>> {
        match m {
            Some(m) => m.apply_inverse(r),
            None => Ok(r.to_vec()),
        }
    };
    let cap = cfg.iteration_cap(n);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precondition(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 1..=cap {
        let ap = a.apply(&p)?;
        let pap = dot(&p, &ap);
        if !pap.is_finite() || !rz.is_finite() {
            return Err(MsgpError::NonFinite(format!("conjugate gradient iterate {it}")));
        }
        if pap <= 0.0 {
            return Err(MsgpError::NotPositiveDefinite(format!(
                "pᵀAp = {pap:e} at conjugate gradient iteration {it}"
            )));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        residual = dot(&r, &r).sqrt() / b_norm;
        if !residual.is_finite() {
            return Err(MsgpError::NonFinite(format!("conjugate gradient residual at iteration {it}")));
        }
        if residual <= cfg.rel_tol {
            return Ok(LcgOutcome {
                x,
                iterations: it,
                residual,
            });
        }
        z = precondition(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(MsgpError::NotConverged {
        iterations: cap,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseOperator, JacobiPreconditioner};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(m: DMatrix<f64>) -> DenseOperator {
        DenseOperator::new(m).unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let a = dense(DMatrix::identity(5, 5));
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let out = lcg_solve(&a, &b, &LcgConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.x.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn diagonal_system() {
        let a = dense(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 4.0])));
        let out = lcg_solve(&a, &[1.0, 2.0, 4.0], &LcgConfig::with_tol(1e-12)).unwrap();
        assert!(out.x.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let q = DMatrix::from_fn(50, 50, |_, _| rng.gen_range(-1.0..1.0));
        let a = dense(&q * q.transpose() + DMatrix::identity(50, 50) * 1e-3);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = LcgConfig {
            rel_tol: 1e-12,
            max_iters: Some(3),
            preconditioner: None,
        };
        match lcg_solve(&a, &b, &cfg) {
            Err(MsgpError::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn nan_is_reported() {
        let a = dense(DMatrix::from_element(2, 2, f64::NAN));
        assert!(matches!(lcg_solve(&a, &[1.0, 1.0], &LcgConfig::default()), Err(MsgpError::NonFinite(_))));
        let i = dense(DMatrix::identity(2, 2));
        assert!(lcg_solve(&i, &[f64::NAN, 1.0], &LcgConfig::default()).is_err());
    }

    #[test]
    fn zero_rhs() {
        let a = dense(DMatrix::identity(3, 3));
        let out = lcg_solve(&a, &[0.0; 3], &LcgConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, vec![0.0; 3]);
    }

    fn se_toeplitz(m: usize, ell: f64) -> (ToeplitzOperator, impl Fn(usize) -> f64) {
        let k = move |j: usize| (-0.5 * (j as f64 / ell).powi(2)).exp();
        (ToeplitzOperator::new((0..m).map(&k).collect()).unwrap(), k)
    }

    #[test]
    fn circulant_preconditioners_reduce_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        let (t, ext) = se_toeplitz(256, 8.0);
        let sigma2 = 1e-2;
        let b: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut cfg = LcgConfig {
            rel_tol: 1e-8,
            max_iters: Some(5000),
            preconditioner: None,
        };
        let plain = solve_toeplitz(&t, sigma2, &b, &cfg, None).unwrap();
        for method in [
            CirculantMethod::Strang,
            CirculantMethod::TChan,
            CirculantMethod::Tyrtyshnikov,
            CirculantMethod::default(),
        ] {
            cfg.preconditioner = Some(method);
            let pre = solve_toeplitz(&t, sigma2, &b, &cfg, Some(&ext)).unwrap();
            assert!(pre.iterations < plain.iterations, "{method}: {} vs {}", pre.iterations, plain.iterations);
            let diff: f64 = pre.x.iter().zip(&plain.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = plain.x.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-5);
        }
    }

    #[test]
    fn jacobi_gives_same_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let q = DMatrix::from_fn(30, 30, |_, _| rng.gen_range(-1.0..1.0));
        let d = DMatrix::from_diagonal(&DVector::from_fn(30, |i, _| 1.0 + i as f64));
        let m = &q * q.transpose() * 0.1 + d;
        let jac = JacobiPreconditioner::new(m.diagonal().as_slice()).unwrap();
        let a = dense(m);
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cfg = LcgConfig::with_tol(1e-10);
        let x1 = lcg_solve(&a, &b, &cfg).unwrap().x;
        let x2 = lcg_solve_preconditioned(&a, &b, &cfg, &jac).unwrap().x;
        assert!(x1.iter().zip(&x2).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}
