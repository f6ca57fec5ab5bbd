// Fast structured products checked against their dense counterparts.

use msgp::interpolation::InducingGrid;
use msgp::kernels::KernelSpec;
use msgp::linalg::{BccbOperator, KroneckerOperator, LinearOperator, StructuredOperator, ToeplitzOperator};
use nalgebra::DVector;

fn max_gap(op: &dyn LinearOperator, v: &[f64]) -> msgp::Result<f64> {
    let fast = op.apply(v)?;
    let dense = op.to_dense() * DVector::from_column_slice(v);
    Ok(fast.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

pub fn run_example() -> msgp::Result<Vec<f64>> {
    let kernel = KernelSpec::se(&[1.5, 0.7], 1.0);
    let grid = InducingGrid::new(&[0.0, 0.0], &[10.0, 5.0], &[40, 30])?;
    let cols = kernel.product_column(&grid)?;

    let t0 = ToeplitzOperator::new(cols[0].clone())?;
    let t1 = ToeplitzOperator::new(cols[1].clone())?;
    let v: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos()).collect();
    let toeplitz_gap = max_gap(&t0, &v)?;

    let kron = KroneckerOperator::new(vec![StructuredOperator::from(t0), StructuredOperator::from(t1)])?;
    let w: Vec<f64> = (0..1200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
    let kron_gap = max_gap(&kron, &w)?;
    let eig = kron.eigendecomposition()?;
    let top = eig.values.iter().copied().fold(f64::MIN, f64::max);

    let col: Vec<f64> = (0..64).map(|i| {
        let (a, b) = (i / 8, i % 8);
        let wrap = |k: usize| k.min(8 - k) as f64;
        (-0.5 * (wrap(a).powi(2) + wrap(b).powi(2))).exp()
    }).collect();
    let bccb = BccbOperator::new(&[8, 8], col)?;
    let lam = bccb.eigenvalues()?;

    println!("toeplitz MVM gap  {toeplitz_gap:.2e}");
    println!("kronecker MVM gap {kron_gap:.2e}, largest eigenvalue {top:.3}");
    println!("bccb eigenvalue range [{:.3e}, {:.3}]", lam.iter().copied().fold(f64::MAX, f64::min), lam.iter().copied().fold(f64::MIN, f64::max));
    Ok(vec![toeplitz_gap, kron_gap])
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
