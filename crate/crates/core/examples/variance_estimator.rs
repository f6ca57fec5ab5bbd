// Stochastic explained-variance estimate against the dense value.

use msgp::gp::{grid_covariance, GridStructure, LcgConfig, SkiOperator};
use msgp::harness::data::gen_1d;
use msgp::interpolation::{interp_weights, InducingGrid};
use msgp::kernels::KernelSpec;
use msgp::prediction::{estimate_nu_hat, explained_variance_dense, GridSqrt, VarianceEstimatorConfig};

pub fn run_example() -> msgp::Result<Vec<(usize, f64)>> {
    let data = gen_1d(300, 0.1, 3)?;
    let grid = InducingGrid::covering(&data.x, &[80], 2.0)?;
    let kernel = KernelSpec::se(&[1.0], 1.0);
    let a = SkiOperator::new(interp_weights(&grid, &data.x, false)?, grid_covariance(&kernel, &grid, GridStructure::Auto)?, 0.01)?;
    let truth = explained_variance_dense(&a)?;
    let sqrt = GridSqrt::new(&kernel, &grid, GridStructure::Auto, 1, 2048)?;
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = Vec::new();
    for n_s in [10, 40, 160, 640] {
        let cfg = VarianceEstimatorConfig { n_s, seed: 1, ..Default::default() };
        let est = estimate_nu_hat(&a, &sqrt, &LcgConfig::with_tol(1e-8), &cfg)?;
        let err = est.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>().sqrt() / norm;
        println!("n_s={n_s:4}: relative error {err:.3}");
        out.push((n_s, err));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
