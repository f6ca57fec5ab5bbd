//! Synthetic data sets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MsgpError, Result};
use crate::exact::EXACT_MAX_N;
use crate::kernels::KernelSpec;

/// `sin(x) exp(−x²/50)`.
pub fn f_1d(x: f64) -> f64 {
    x.sin() * (-x * x / (2.0 * 25.0)).exp()
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Noise-free function values.
    pub f: Vec<f64>,
}

impl Dataset {
    /// Splits off the last `n_test` rows.
    pub fn split(&self, n_test: usize) -> Result<(Dataset, Dataset)> {
        let n = self.y.len();
        if n_test >= n {
            return Err(MsgpError::InvalidArgument(format!("cannot hold out {n_test} of {n} points")));
        }
        let k = n - n_test;
        let part = |lo: usize, hi: usize| Dataset {
            x: self.x.rows(lo, hi - lo).into_owned(),
            y: self.y[lo..hi].to_vec(),
            f: self.f[lo..hi].to_vec(),
        };
        Ok((part(0, k), part(k, n)))
    }
}

/// Inputs uniform on `[−10, 10]`, targets `f_1d(x) + N(0, noise_std²)`.
pub fn gen_1d(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(MsgpError::InvalidArgument("gen_1d needs n ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let f: Vec<f64> = xs.iter().map(|&x| f_1d(x)).collect();
    let y = f.iter().map(|v| v + noise_std * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(Dataset {
        x: DMatrix::from_vec(n, 1, xs),
        y,
        f,
    })
}

#[derive(Clone, Debug)]
pub struct ProjectionDataset {
    pub data: Dataset,
    pub p_true: DMatrix<f64>,
}

/// Standard normal inputs in `ℝ^D`, a standard normal `d × D` projection,
/// and a draw from a zero-mean SE process of unit variance and lengthscale
/// `lengthscale` on the projected inputs, plus `N(0, noise_std²)`.
pub fn gen_projection(n: usize, big_d: usize, d: usize, lengthscale: f64, noise_std: f64, seed: u64) -> Result<ProjectionDataset> {
    if d == 0 || d > big_d {
        return Err(MsgpError::InvalidArgument(format!("need 1 ≤ d ≤ D, got d = {d}, D = {big_d}")));
    }
    if n == 0 || n > EXACT_MAX_N {
        return Err(MsgpError::InvalidArgument(format!(
            "dense sampling supports 1 to {EXACT_MAX_N} points, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_true = DMatrix::from_fn(d, big_d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = DMatrix::from_fn(n, big_d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = &x * p_true.transpose();
    let f = sample_gp(&KernelSpec::se(&[lengthscale], 1.0), &u, &mut rng)?;
    let y = f.iter().map(|v| v + noise_std * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(ProjectionDataset {
        data: Dataset { x, y, f },
        p_true,
    })
}

/// One draw from `N(0, K(u, u))` via a jittered Cholesky factor.
pub fn sample_gp(kernel: &KernelSpec, u: &DMatrix<f64>, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let n = u.nrows();
    let pts: Vec<Vec<f64>> = (0..n).map(|i| u.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&pts[i], &pts[j])?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += 1e-8 * kernel.signal_variance();
    }
    let chol = crate::linalg::DenseCholesky::new(&k)
        .ok_or_else(|| MsgpError::NotPositiveDefinite("sampling covariance".into()))?;
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((chol.l() * z).data.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(f_1d(0.0), 0.0);
        let v = f_1d(std::f64::consts::FRAC_PI_2);
        assert!((v - (-std::f64::consts::PI.powi(2) / 200.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn gen_1d_is_deterministic_and_in_range() {
        let a = gen_1d(500, 0.05, 3).unwrap();
        let b = gen_1d(500, 0.05, 3).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert!(a.x.iter().all(|v| (-10.0..10.0).contains(v)));
        let resid: f64 = a.y.iter().zip(&a.f).map(|(y, f)| (y - f).powi(2)).sum::<f64>() / 500.0;
        assert!((resid.sqrt() - 0.05).abs() < 0.01);
        assert_ne!(gen_1d(500, 0.05, 4).unwrap().y, a.y);
    }

    #[test]
    fn projection_data_shapes_and_determinism() {
        let a = gen_projection(200, 5, 2, 1.0, 0.1, 9).unwrap();
        assert_eq!(a.data.x.shape(), (200, 5));
        assert_eq!(a.p_true.shape(), (2, 5));
        assert_eq!(a.data.y, gen_projection(200, 5, 2, 1.0, 0.1, 9).unwrap().data.y);
        assert!(gen_projection(200, 2, 3, 1.0, 0.1, 9).is_err());
        assert!(gen_projection(EXACT_MAX_N + 1, 3, 2, 1.0, 0.1, 9).is_err());
    }

    #[test]
    fn split_keeps_order() {
        let a = gen_1d(10, 0.0, 1).unwrap();
        let (tr, te) = a.split(3).unwrap();
        assert_eq!(tr.y.len(), 7);
        assert_eq!(te.y, a.y[7..].to_vec());
        assert_eq!(te.x[(0, 0)], a.x[(7, 0)]);
    }
}
