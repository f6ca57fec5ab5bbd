// Circulant log-determinant surrogates for a Toeplitz covariance.

use msgp::circulant_approx::{circulant_embed, logdet_from_spectrum, thresholded_spectrum, whittle_logdet, CirculantMethod};
use msgp::kernels::{KernelFamily, KernelSpec};
use msgp::linalg::DenseCholesky;
use nalgebra::DMatrix;

pub fn run_example() -> msgp::Result<Vec<(usize, f64)>> {
    let kernel = KernelSpec::new(KernelFamily::Matern32, &[0.5], 1.0);
    let k = |tau: f64| kernel.eval_offset(&[tau]);
    let (h, sigma2) = (0.05, 0.1);
    let mut out = Vec::new();
    for m in [64usize, 256, 1024] {
        let col: Vec<f64> = (0..m).map(|i| k(i as f64 * h)).collect();
        let dense = DMatrix::from_fn(m, m, |i, j| col[i.abs_diff(j)] + if i == j { sigma2 } else { 0.0 });
        let exact = DenseCholesky::new(&dense).expect("SPD").logdet();
        let whittle = whittle_logdet(&k, h, m, sigma2, 1)?.value;
        let c = circulant_embed(&col, CirculantMethod::Strang, None)?;
        let (lam, clipped) = thresholded_spectrum(&c)?;
        let strang = logdet_from_spectrum(&lam, sigma2, clipped)?.value;
        let rel = ((whittle - exact) / exact).abs();
        println!("m={m:5} exact {exact:10.3} whittle {whittle:10.3} strang {strang:10.3} (whittle rel err {rel:.2e})");
        out.push((m, rel));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
