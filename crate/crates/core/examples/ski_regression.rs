// Train a 1D model, predict, and round-trip it through JSON.

use msgp::gp::{train, GridSpec, TrainConfig, TrainedModel};
use msgp::harness::data::gen_1d;
use msgp::harness::metrics::smae;
use msgp::kernels::{Hyperparameters, KernelSpec};
use msgp::prediction::predict;

pub fn run_example() -> msgp::Result<f64> {
    let (train_set, test) = gen_1d(5000, 0.05, 11)?.split(500)?;
    let init = Hyperparameters::new(KernelSpec::se(&[1.0], 1.0), 0.1);
    let model = train(&train_set.x, &train_set.y, &GridSpec::covering(&[500]), &init, &TrainConfig::default())?;
    let pred = predict(&model, &test.x)?;
    let err = smae(&pred.mean, &test.f)?;
    println!(
        "lengthscale {:.3}, noise std {:.4}, nll {:.1} after {} steps",
        model.hyper.kernel.lengthscale(0),
        model.hyper.log_noise.exp(),
        model.training.nll,
        model.training.iterations
    );
    let var = pred.variance.unwrap_or_default();
    println!("test SMAE against the latent function {err:.4}; mean variance {:.2e}", var.iter().sum::<f64>() / var.len() as f64);

    let restored = TrainedModel::from_json(&model.to_json()?)?;
    assert_eq!(restored.fast_mean_vector, model.fast_mean_vector);
    Ok(err)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
