//! Dense Cholesky factorization for the reference paths.

use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_nalgebra(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.read(i, j))
}

/// `A = L Lᵀ` of a symmetric positive definite matrix; only the lower
/// triangle of `A` is read.
#[derive(Clone, Debug)]
pub struct DenseCholesky {
    l: Mat<f64>,
}

impl DenseCholesky {
    /// `None` when `a` is not numerically positive definite.
    pub fn new(a: &DMatrix<f64>) -> Option<Self> {
        let l = to_faer(a).cholesky(Side::Lower).ok()?.compute_l();
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> DMatrix<f64> {
        to_nalgebra(self.l.as_ref())
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l.read(i, i).ln()).sum::<f64>()
    }

    /// `A⁻¹ B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = to_faer(b);
        self.solve_in_place(&mut x);
        to_nalgebra(x.as_ref())
    }

    fn solve_in_place(&self, x: &mut Mat<f64>) {
        self.l.as_ref().solve_lower_triangular_in_place(x.as_mut());
        self.l.as_ref().transpose().solve_upper_triangular_in_place(x.as_mut());
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        self.solve_in_place(&mut x);
        DVector::from_fn(b.len(), |i, _| x.read(i, 0))
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = to_faer(b);
        self.l.as_ref().solve_lower_triangular_in_place(x.as_mut());
        to_nalgebra(x.as_ref())
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let mut x = Mat::identity(self.dim(), self.dim());
        self.solve_in_place(&mut x);
        to_nalgebra(x.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn matches_nalgebra() {
        for n in [1, 7, 60] {
            let a = spd(n, n as u64);
            let c = DenseCholesky::new(&a).unwrap();
            let want = a.clone().cholesky().unwrap();
            assert!((c.l() - want.l()).amax() < 1e-10);
            let b = DMatrix::from_fn(n, 3, |i, j| (i + 2 * j) as f64);
            assert!((c.solve(&b) - want.solve(&b)).amax() < 1e-8);
            assert!((&a * c.inverse() - DMatrix::identity(n, n)).amax() < 1e-8);
            assert!((want.l() * c.solve_lower(&b) - &b).amax() < 1e-8);
            let v = DVector::from_fn(n, |i, _| i as f64);
            assert!((&a * c.solve_vec(&v) - &v).amax() < 1e-8);
            let ld: f64 = 2.0 * want.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
            assert!((c.logdet() - ld).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(DenseCholesky::new(&a).is_none());
    }
}
