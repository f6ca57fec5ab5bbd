// Learn a 2D projection of 4D inputs and compare it with the generating one.

use msgp::gp::{train, GridSpec, TrainConfig};
use msgp::harness::data::gen_projection;
use msgp::kernels::{Hyperparameters, KernelSpec};
use msgp::projection::{subspace_dist, Normalization, ProjectionMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> msgp::Result<f64> {
    let big_d = 4;
    let data = gen_projection(800, big_d, 2, (big_d as f64).sqrt(), 0.05, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut best: Option<(f64, Hyperparameters)> = None;
    let mut cfg = TrainConfig { skip_variance: true, ..TrainConfig::default() };
    cfg.optimizer.method = msgp::gp::OptimizerMethod::Lbfgs;
    cfg.optimizer.max_iters = 60;
    for _ in 0..3 {
        let mut init = Hyperparameters::new(KernelSpec::se(&[1.0, 1.0], 1.0), 0.1);
        init.projection = Some(ProjectionMatrix::random(2, big_d, Normalization::Unit, &mut rng)?);
        let model = train(&data.data.x, &data.data.y, &GridSpec::covering(&[30, 30]), &init, &cfg)?;
        if best.as_ref().map_or(true, |b| model.training.nll < b.0) {
            best = Some((model.training.nll, model.hyper));
        }
    }
    let (nll, hyper) = best.expect("at least one restart");
    let learned = hyper.projection.expect("projection").normalized()?;
    let dist = subspace_dist(&learned, &data.p_true)?;
    println!("best nll {nll:.1}, subspace distance to the generating projection {dist:.3}");
    Ok(dist)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
