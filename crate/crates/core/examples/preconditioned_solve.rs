// Conjugate gradients on a Toeplitz system with circulant preconditioners.

use msgp::circulant_approx::CirculantMethod;
use msgp::gp::{solve_toeplitz, LcgConfig};
use msgp::kernels::KernelSpec;
use msgp::linalg::ToeplitzOperator;

pub fn run_example() -> msgp::Result<Vec<(String, usize)>> {
    let kernel = KernelSpec::se(&[1.0], 1.0);
    let h = 0.05;
    let m = 1000;
    let k = |j: usize| kernel.eval_offset(&[j as f64 * h]);
    let t = ToeplitzOperator::new((0..m).map(k).collect())?;
    let b: Vec<f64> = (0..m).map(|i| ((i as f64) * 0.01).sin()).collect();
    let sigma2 = 0.01;
    let base = LcgConfig {
        max_iters: Some(5000),
        ..LcgConfig::with_tol(1e-8)
    };
    let mut out = vec![("none".to_string(), solve_toeplitz(&t, sigma2, &b, &base, None)?.iterations)];
    for method in [
        CirculantMethod::Strang,
        CirculantMethod::TChan,
        CirculantMethod::Tyrtyshnikov,
        CirculantMethod::Whittle { window: 1 },
    ] {
        let cfg = LcgConfig {
            preconditioner: Some(method),
            ..base.clone()
        };
        out.push((method.to_string(), solve_toeplitz(&t, sigma2, &b, &cfg, Some(&k))?.iterations));
    }
    for (name, iters) in &out {
        println!("{name:>14}: {iters} iterations");
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
