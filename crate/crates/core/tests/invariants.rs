use msgp::circulant_approx::{whittle_column, whittle_spectrum};
use msgp::gp::{lcg_solve, LcgConfig};
use msgp::interpolation::{interp_weights, InducingGrid};
use msgp::kernels::{KernelFamily, KernelSpec};
use msgp::linalg::{CirculantOperator, DenseOperator, KroneckerOperator, LinearOperator, StructuredOperator, ToeplitzOperator};
use msgp::projection::{subspace_dist, ProjectionMatrix, Normalization};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circulant_matches_dense(c in prop::collection::vec(-1.0f64..1.0, 1..80), seed in 0u64..1000) {
        let n = c.len();
        let op = CirculantOperator::new(c.clone()).unwrap();
        let dense = DMatrix::from_fn(n, n, |i, j| c[(i + n - j) % n]);
        let v: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let want = &dense * DVector::from_column_slice(&v);
        prop_assert!(close(&op.apply(&v).unwrap(), want.as_slice(), 1e-10));
        let want_t = dense.transpose() * DVector::from_column_slice(&v);
        prop_assert!(close(&op.apply_transpose(&v).unwrap(), want_t.as_slice(), 1e-10));
    }

    #[test]
    fn kronecker_of_toeplitz_matches_dense(a in prop::collection::vec(-1.0f64..1.0, 1..9), b in prop::collection::vec(-1.0f64..1.0, 1..9)) {
        let ta = ToeplitzOperator::new(a.clone()).unwrap();
        let da = DMatrix::from_fn(a.len(), a.len(), |i, j| a[i.abs_diff(j)]);
        let db = DMatrix::from_fn(b.len(), b.len(), |i, j| b[i.abs_diff(j)]);
        let op = KroneckerOperator::new(vec![ta.into(), StructuredOperator::from(DenseOperator::new(db.clone()).unwrap())]).unwrap();
        let n = a.len() * b.len();
        let v: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let want = da.kronecker(&db) * DVector::from_column_slice(&v);
        prop_assert!(close(&op.apply(&v).unwrap(), want.as_slice(), 1e-10));
    }

    #[test]
    fn whittle_column_is_symmetric_and_spectrum_nonnegative(m in 4usize..200, ell in 0.05f64..5.0, window in 0usize..4) {
        let k = KernelSpec::new(KernelFamily::Matern52, &[ell], 1.0);
        let f = |t: f64| k.eval_offset(&[t]);
        let col = whittle_column(&f, 0.1, m, window);
        for i in 1..m {
            prop_assert!((col[i] - col[m - i]).abs() <= 1e-12);
        }
        let (lam, clipped) = whittle_spectrum(&f, 0.1, m, window).unwrap();
        prop_assert!(lam.iter().all(|&l| l >= 0.0));
        prop_assert!(clipped <= m);
    }

    #[test]
    fn interpolation_reproduces_constants_and_lines(xs in prop::collection::vec(0.5f64..9.5, 1..40), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = InducingGrid::new(&[0.0], &[10.0], &[41]).unwrap();
        let x = DMatrix::from_column_slice(xs.len(), 1, &xs);
        let w = interp_weights(&grid, &x, false).unwrap();
        let nodes = grid.nodes(0);
        let line: Vec<f64> = nodes.iter().map(|u| a + b * u).collect();
        let got = w.apply(&line).unwrap();
        for (g, x) in got.iter().zip(&xs) {
            prop_assert!((g - (a + b * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn lcg_solves_spd_systems(n in 1usize..40, seed in 0u64..500) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(n, n);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let op = DenseOperator::new(a.clone()).unwrap();
        let sol = lcg_solve(&op, &rhs, &LcgConfig { max_iters: Some(10 * n), ..LcgConfig::with_tol(1e-12) }).unwrap();
        let res = &a * DVector::from_column_slice(&sol.x) - DVector::from_column_slice(&rhs);
        prop_assert!(res.norm() <= 1e-9 * DVector::from_column_slice(&rhs).norm().max(1.0));
    }

    #[test]
    fn subspace_distance_bounds(d in 1usize..4, extra in 0usize..4, seed in 0u64..500) {
        let big_d = d + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ProjectionMatrix::random(d, big_d, Normalization::None, &mut rng).unwrap();
        let q = ProjectionMatrix::random(d, big_d, Normalization::None, &mut rng).unwrap();
        let pq = subspace_dist(&p.raw, &q.raw).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - subspace_dist(&q.raw, &p.raw).unwrap()).abs() < 1e-12);
        prop_assert!(subspace_dist(&p.raw, &(&p.raw * 3.0)).unwrap() < 1e-8);
    }
}
