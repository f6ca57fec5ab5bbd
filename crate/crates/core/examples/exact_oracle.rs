// Dense GP reference next to the interpolated likelihood on grid inputs.

use msgp::exact::DenseGp;
use msgp::gp::{nll, LcgConfig, SkiConfig};
use msgp::interpolation::InducingGrid;
use msgp::kernels::{Hyperparameters, KernelSpec};
use nalgebra::DMatrix;

pub fn run_example() -> msgp::Result<f64> {
    let grid = InducingGrid::new(&[0.0], &[29.9], &[300])?;
    let x = DMatrix::from_iterator(300, 1, grid.nodes(0));
    let y: Vec<f64> = (0..300).map(|i| (x[(i, 0)] * 0.7).sin()).collect();
    let kernel = KernelSpec::se(&[0.4], 1.0);
    let dense = DenseGp::fit(&kernel, 0.09, &x, &y, 0.0)?;
    let cfg = SkiConfig { lcg: LcgConfig::with_tol(1e-10), ..SkiConfig::default() };
    let ski = nll(&Hyperparameters::new(kernel, 0.3), &x, &y, &grid, &cfg)?;
    let gap = (ski.nll - dense.nll()).abs() / 300.0;
    println!("dense nll {:.4}, interpolated nll {:.4}, gap per point {gap:.2e}", dense.nll(), ski.nll);
    let pred = dense.predict(&DMatrix::from_row_slice(3, 1, &[5.05, 15.0, 40.0]))?;
    println!("dense predictions {:?}, variances {:?}", pred.mean, pred.variance);
    Ok(gap)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
