//! The four experiment drivers and report output.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, OutputFormat};
use super::data::{gen_1d, gen_projection};
use super::metrics::{relative_abs_diff, smae, MetricsRow};
use crate::circulant_approx::{circulant_for_shifted, logdet_from_spectrum, thresholded_spectrum, whittle_logdet, CirculantMethod};
use crate::error::{MsgpError, Result};
use crate::exact::{train_exact, DenseGp, ExactTrainConfig, EXACT_MAX_N};
use crate::gp::{fit_fixed, solve_toeplitz, train, GridSpec, LcgConfig, OptimizerConfig, SkiConfig, TrainConfig, TrainedModel};
use crate::kernels::{Hyperparameters, KernelSpec};
use crate::linalg::{DenseCholesky, ToeplitzOperator};
use crate::prediction::{predict_mean, predict_slow, predict_variance, SlowPredictConfig, VarianceEstimatorConfig};
use crate::projection::{subspace_dist, ProjectionMatrix};

/// Independent stream for combination `index`.
pub fn combo_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let rows = match cfg.experiment {
        ExperimentKind::Stress1d => stress1d(cfg)?,
        ExperimentKind::Accuracy => accuracy(cfg)?,
        ExperimentKind::ProjectionRecovery => projection_recovery(cfg)?,
        ExperimentKind::LogdetBenchmark => logdet_benchmark(cfg)?,
    };
    Ok(Report {
        config: cfg.clone(),
        rows,
    })
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        ski: SkiConfig {
            lcg: cfg.solver.clone(),
            whittle_window: cfg.whittle_window,
            ..SkiConfig::default()
        },
        optimizer: cfg.optimizer.clone(),
        variance: VarianceEstimatorConfig {
            n_s: cfg.n_s,
            seed,
            ..VarianceEstimatorConfig::default()
        },
        ..TrainConfig::default()
    }
}

/// Average seconds per call of `f`, repeating until at least 50 ms elapse.
fn time_per_call<T>(mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let mut out = f()?;
    let mut calls = 1;
    while t.elapsed().as_secs_f64() < 0.05 {
        out = f()?;
        calls += 1;
    }
    Ok((out, elapsed(t) / calls as f64))
}

fn stress1d(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let mut index = 0;
    for &n in &cfg.n {
        for &m in &cfg.m {
            let seed = combo_seed(cfg.seed, index);
            index += 1;
            let (train_set, test) = gen_1d(n + cfg.n_test, cfg.noise_std, seed)?.split(cfg.n_test)?;
            let mut tc = train_config(cfg, seed);
            tc.optimizer.max_iters = cfg.stress.optimizer_iters;
            let t = Instant::now();
            let model = train(&train_set.x, &train_set.y, &GridSpec::covering(&[m]), &cfg.kernel.hyper(1), &tc)?;
            let train_s = elapsed(t);
            let (mean, mean_s) = time_per_call(|| predict_mean(&model, &test.x))?;
            let (var, var_s) = time_per_call(|| predict_variance(&model, &test.x))?;
            let mut row = MetricsRow::new("stress1d").param("n", n).param("m", m);
            row.metric("nll", model.training.nll);
            row.metric("optimizer_iterations", model.training.iterations as f64);
            row.metric("solve_iterations", model.training.solve_iterations as f64);
            row.metric("smae", smae(&mean, &test.y)?);
            row.metric("smae_f", smae(&mean, &test.f)?);
            row.metric("mean_variance", var.iter().sum::<f64>() / var.len() as f64);
            row.timing("train", train_s);
            row.timing("predict_mean_per_point", mean_s / cfg.n_test as f64);
            row.timing("predict_variance_per_point", var_s / cfg.n_test as f64);
            log::info!("stress1d n={n} m={m}: train {train_s:.3}s");
            rows.push(row);
        }
    }
    Ok(rows)
}

fn subsample_config(cfg: &ExperimentConfig, size: usize, seed: u64) -> ExactTrainConfig {
    ExactTrainConfig {
        optimizer: OptimizerConfig {
            method: crate::gp::OptimizerMethod::Lbfgs,
            max_iters: cfg.optimizer.max_iters.min(100),
            ..cfg.optimizer.clone()
        },
        subsample: Some(size),
        seed,
        ..ExactTrainConfig::default()
    }
}

fn accuracy(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (ni, &n) in cfg.n.iter().enumerate() {
        if n > EXACT_MAX_N {
            return Err(MsgpError::Config(format!("accuracy compares against a dense GP; n ≤ {EXACT_MAX_N}")));
        }
        let seed = combo_seed(cfg.seed, ni as u64);
        let (train_set, test) = gen_1d(n + cfg.n_test, cfg.noise_std, seed)?.split(cfg.n_test)?;
        let t = Instant::now();
        let (exact, hyper, _) = train_exact(
            &cfg.kernel.hyper(1),
            &train_set.x,
            &train_set.y,
            &subsample_config(cfg, cfg.accuracy.exact_subsample, seed),
        )?;
        let exact_pred = exact.predict(&test.x)?;
        let exact_s = elapsed(t);
        let exact_var = exact_pred.variance.clone().expect("exact variance");
        for &m in &cfg.m {
            let tc = train_config(cfg, seed);
            let t = Instant::now();
            let model = fit_fixed(&train_set.x, &train_set.y, &GridSpec::covering(&[m]), &hyper, &tc)?;
            let fit_s = elapsed(t);
            let t = Instant::now();
            let mean = predict_mean(&model, &test.x)?;
            let var = predict_variance(&model, &test.x)?;
            let fast_s = elapsed(t);
            let mut row = MetricsRow::new("accuracy").param("n", n).param("m", m);
            row.metric("lengthscale", hyper.kernel.lengthscale(0));
            row.metric("signal_variance", hyper.kernel.signal_variance());
            row.metric("noise_variance", hyper.noise_variance());
            row.metric("nll", model.training.nll);
            row.metric("exact_nll", exact.nll());
            row.metric("solve_iterations", model.training.solve_iterations as f64);
            row.metric("mean_smae_vs_exact", smae(&mean, &exact_pred.mean)?);
            row.metric("var_rel_vs_exact", relative_abs_diff(&var, &exact_var)?);
            row.metric("smae", smae(&mean, &test.y)?);
            row.metric("exact_smae", smae(&exact_pred.mean, &test.y)?);
            if cfg.accuracy.slow {
                let slow_cfg = SlowPredictConfig {
                    variance: cfg.n_test <= cfg.accuracy.slow_variance_points,
                    max_variance_points: cfg.accuracy.slow_variance_points,
                    lcg: cfg.solver.clone(),
                };
                let t = Instant::now();
                let slow = predict_slow(&model, &train_set.x, &train_set.y, &test.x, &slow_cfg)?;
                row.timing("slow_predict", elapsed(t));
                row.metric("mean_smae_fast_vs_slow", smae(&mean, &slow.mean)?);
                row.metric("slow_mean_smae_vs_exact", smae(&slow.mean, &exact_pred.mean)?);
                if let Some(sv) = &slow.variance {
                    row.metric("var_rel_fast_vs_slow", relative_abs_diff(&var, sv)?);
                    row.metric("slow_var_rel_vs_exact", relative_abs_diff(sv, &exact_var)?);
                }
            }
            row.timing("exact", exact_s);
            row.timing("fit", fit_s);
            row.timing("fast_predict", fast_s);
            rows.push(row);
        }
    }
    Ok(rows)
}

fn rows_of(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone()
}

fn train_projection(
    cfg: &ExperimentConfig,
    x: &DMatrix<f64>,
    y: &[f64],
    big_d: usize,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<TrainedModel> {
    let d = cfg.d;
    let pc = &cfg.projection;
    let grid = GridSpec::covering(&vec![pc.grid_size; d]);
    let mut tc = train_config(cfg, seed);
    tc.skip_variance = true;
    let mut screen = tc.clone();
    screen.optimizer.max_iters = pc.screen_iters;
    let mut best: Option<TrainedModel> = None;
    for _ in 0..pc.restarts {
        let mut init = cfg.kernel.hyper(d);
        init.projection = Some(ProjectionMatrix::random(d, big_d, pc.normalization, rng)?);
        let model = match train(x, y, &grid, &init, &screen) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("projection restart failed: {e}");
                continue;
            }
        };
        if best.as_ref().map_or(true, |b| model.training.nll < b.training.nll) {
            best = Some(model);
        }
    }
    let best = best.ok_or_else(|| MsgpError::Diverged("every projection restart failed".into()))?;
    let iters = best.training.iterations;
    let mut full = train(x, y, &grid, &best.hyper, &tc)?;
    full.training.iterations += iters;
    Ok(full)
}

/// Coordinate axes of the `d` shortest lengthscales, as a `d × D` selector.
fn ard_subspace(kernel: &KernelSpec, d: usize, big_d: usize) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..big_d).collect();
    order.sort_by(|&a, &b| kernel.lengthscale(a).total_cmp(&kernel.lengthscale(b)).then(a.cmp(&b)));
    let mut p = DMatrix::zeros(d, big_d);
    for (r, &c) in order.iter().take(d).enumerate() {
        p[(r, c)] = 1.0;
    }
    p
}

fn projection_recovery(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let mut index = 0;
    for &big_d in &cfg.big_d {
        for rep in 0..cfg.repeats {
            let seed = combo_seed(cfg.seed, index);
            index += 1;
            let n = cfg.n[0];
            let ell = cfg.projection.gen_lengthscale_factor * (big_d as f64).sqrt();
            let data = gen_projection(n + cfg.n_test, big_d, cfg.d, ell, cfg.noise_std, seed)?;
            let (train_set, test) = data.data.split(cfg.n_test)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

            let t = Instant::now();
            let model = train_projection(cfg, &train_set.x, &train_set.y, big_d, &mut rng, seed)?;
            let proj_s = elapsed(t);
            let p_learned = model.hyper.projection.as_ref().expect("projection").normalized()?;
            let mean = predict_mean(&model, &test.x)?;

            let t = Instant::now();
            let true_kernel = KernelSpec::se(&[ell], 1.0);
            let u_train = &train_set.x * data.p_true.transpose();
            let u_test = &test.x * data.p_true.transpose();
            let gp_true = DenseGp::fit(&true_kernel, cfg.noise_std.powi(2).max(1e-10), &u_train, &train_set.y, 0.0)?;
            let true_mean = gp_true.predict_mean(&u_test)?;
            let true_s = elapsed(t);

            let t = Instant::now();
            let mut init_full = Hyperparameters::new(
                KernelSpec::se(&vec![cfg.kernel.lengthscale * (big_d as f64).sqrt(); big_d], cfg.kernel.signal_variance),
                cfg.kernel.noise_std,
            );
            init_full.projection = None;
            let sub = cfg.projection.exact_subsample.min(n);
            let (gp_full, full_hyper, _) = train_exact(&init_full, &rows_of(&train_set.x), &train_set.y, &subsample_config(cfg, sub, seed))?;
            let full_mean = gp_full.predict_mean(&test.x)?;
            let full_s = elapsed(t);

            let mut row = MetricsRow::new("projection_recovery").param("D", big_d).param("d", cfg.d).param("repeat", rep).param("n", n);
            row.metric("subspace_dist", subspace_dist(&p_learned, &data.p_true)?);
            row.metric("subspace_dist_full", subspace_dist(&ard_subspace(&full_hyper.kernel, cfg.d, big_d), &data.p_true)?);
            row.metric("smae_proj", smae(&mean, &test.y)?);
            row.metric("smae_true", smae(&true_mean, &test.y)?);
            row.metric("smae_full", smae(&full_mean, &test.y)?);
            row.metric("nll", model.training.nll);
            row.metric("optimizer_iterations", model.training.iterations as f64);
            row.timing("train_proj", proj_s);
            row.timing("gp_true", true_s);
            row.timing("gp_full", full_s);
            log::info!(
                "projection D={big_d} repeat {rep}: dist {:.3}, smae {:.3} / true {:.3} / full {:.3} ({proj_s:.1}s)",
                row.metrics["subspace_dist"],
                row.metrics["smae_proj"],
                row.metrics["smae_true"],
                row.metrics["smae_full"]
            );
            rows.push(row);
        }
    }
    Ok(rows)
}

fn dense_toeplitz_logdet(col: &[f64], sigma2: f64) -> Result<f64> {
    let m = col.len();
    let t = DMatrix::from_fn(m, m, |i, j| col[i.abs_diff(j)] + if i == j { sigma2 } else { 0.0 });
    let chol = DenseCholesky::new(&t).ok_or_else(|| MsgpError::NotPositiveDefinite("dense Toeplitz reference".into()))?;
    Ok(chol.logdet())
}

fn logdet_benchmark(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let lc = &cfg.logdet;
    let h = lc.spacing;
    let methods = cfg.methods();
    let mut rows = Vec::new();
    let mut index = 0;
    for &m in &cfg.m {
        for &family in &lc.families {
            for &ell in &lc.lengthscales {
                let mut kernel = KernelSpec::new(family, &[ell], 1.0);
                kernel.log_alpha = cfg.kernel.alpha.ln();
                let k = |tau: f64| kernel.eval_offset(&[tau]);
                let col: Vec<f64> = (0..m).map(|i| k(i as f64 * h)).collect();
                let toeplitz = ToeplitzOperator::new(col.clone())?;
                for &sigma2 in &lc.noise_variances {
                    let seed = combo_seed(cfg.seed, index);
                    index += 1;
                    let t = Instant::now();
                    let exact = if lc.dense_reference {
                        Some(dense_toeplitz_logdet(&col, sigma2)?)
                    } else {
                        None
                    };
                    let dense_s = elapsed(t);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let plain_cfg = LcgConfig {
                        max_iters: Some(cfg.solver.max_iters.unwrap_or(10 * m)),
                        preconditioner: None,
                        ..cfg.solver.clone()
                    };
                    let plain = solve_toeplitz(&toeplitz, sigma2, &b, &plain_cfg, None)?;
                    for &method in &methods {
                        let t = Instant::now();
                        let est = match method {
                            CirculantMethod::Whittle { window } => whittle_logdet(&k, h, m, sigma2, window)?,
                            other => {
                                let (c, shift) = circulant_for_shifted(&col, other, None, sigma2)?;
                                let (lam, clipped) = thresholded_spectrum(&c)?;
                                logdet_from_spectrum(&lam, shift, clipped)?
                            }
                        };
                        let approx_s = elapsed(t);
                        let ext = |j: usize| k(j as f64 * h);
                        let pre_cfg = LcgConfig {
                            preconditioner: Some(method),
                            ..plain_cfg.clone()
                        };
                        let pre = solve_toeplitz(&toeplitz, sigma2, &b, &pre_cfg, Some(&ext))?;
                        let mut row = MetricsRow::new("logdet_benchmark")
                            .param("m", m)
                            .param("family", format!("{family:?}").to_lowercase())
                            .param("lengthscale", ell)
                            .param("noise_variance", sigma2)
                            .param("method", method.to_string());
                        row.metric("logdet", est.value);
                        row.metric("clipped_count", est.clipped_count as f64);
                        if let Some(e) = exact {
                            row.metric("logdet_exact", e);
                            row.metric("rel_error", ((est.value - e) / e).abs());
                        }
                        row.metric("cg_iterations", plain.iterations as f64);
                        row.metric("pcg_iterations", pre.iterations as f64);
                        row.timing("approx", approx_s);
                        row.timing("dense", dense_s);
                        rows.push(row);
                    }
                }
            }
        }
    }
    Ok(rows)
}

impl Report {
    /// Rows without timings, which are the only nondeterministic values.
    pub fn deterministic(&self) -> Report {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.timings.clear());
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut keys = [BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
        for row in &self.rows {
            keys[0].extend(row.params.keys().cloned());
            keys[1].extend(row.metrics.keys().cloned());
            keys[2].extend(row.timings.keys().cloned());
        }
        let mut out = String::new();
        out.push_str("# config: ");
        out.push_str(&serde_json::to_string(&self.config)?);
        out.push('\n');
        let mut header = vec!["experiment".to_string()];
        header.extend(keys[0].iter().cloned());
        header.extend(keys[1].iter().cloned());
        header.extend(keys[2].iter().map(|k| format!("time_{k}")));
        out.push_str(&header.join(","));
        out.push('\n');
        let fmt = |m: &BTreeMap<String, f64>, k: &String| m.get(k).map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            let mut cells = vec![row.experiment.clone()];
            cells.extend(keys[0].iter().map(|k| row.params.get(k).map(|v| v.to_string()).unwrap_or_default()));
            cells.extend(keys[1].iter().map(|k| fmt(&row.metrics, k)));
            cells.extend(keys[2].iter().map(|k| fmt(&row.timings, k)));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    /// Writes to the configured path, or standard output.
    pub fn write(&self) -> Result<()> {
        let text = self.render(self.config.output.format)?;
        match &self.config.output.path {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// Runs the configured experiment and writes its report.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let report = run_experiment(cfg)?;
    report.write()?;
    Ok(report)
}
