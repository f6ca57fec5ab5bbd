// Build an experiment config from TOML, apply overrides and render CSV.

use msgp::harness::{run_experiment, CirculantName, ExperimentConfig, Overrides};

const CONFIG: &str = r#"
experiment = "logdet_benchmark"
seed = 3
m = [128, 256]

[logdet]
families = ["se", "rq"]
lengthscales = [0.5]
noise_variances = [0.1]
"#;

pub fn run_example() -> msgp::Result<String> {
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    cfg.apply(&Overrides {
        circulant: Some(CirculantName::Strang),
        ..Overrides::default()
    })?;
    let csv = run_experiment(&cfg)?.deterministic().to_csv()?;
    print!("{csv}");
    Ok(csv)
}

#[allow(dead_code)]
fn main() -> msgp::Result<()> {
    run_example().map(|_| ())
}
