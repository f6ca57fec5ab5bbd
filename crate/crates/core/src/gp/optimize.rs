//! Box-constrained first-order minimizers used for hyperparameter learning.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{MsgpError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerMethod {
    /// Steepest descent with Armijo backtracking.
    #[default]
    Gd,
    Lbfgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: OptimizerMethod,
    pub max_iters: usize,
    /// Stop once the projected gradient's largest entry falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step lowers the objective by less than `f_tol · max(1, |f|)`.
    pub f_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Largest change of any parameter in a single step.
    pub max_step: f64,
    pub lbfgs_memory: usize,
    /// Consecutive accepted steps with increasing objective tolerated before failing.
    pub divergence_window: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: OptimizerMethod::Gd,
            max_iters: 200,
            grad_tol: 1e-5,
            f_tol: 1e-10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            max_step: 1.0,
            lbfgs_memory: 10,
            divergence_window: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    FunctionTolerance,
    LineSearchFailed,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

/// Inclusive per-coordinate bounds; `None` means unbounded.
pub type Bounds = [(f64, f64)];

fn project(x: &mut [f64], bounds: Option<&Bounds>) {
    if let Some(b) = bounds {
        for (v, &(lo, hi)) in x.iter_mut().zip(b) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Gradient with components that push against an active bound removed.
fn projected_gradient(x: &[f64], g: &[f64], bounds: Option<&Bounds>) -> Vec<f64> {
    match bounds {
        None => g.to_vec(),
        Some(b) => x
            .iter()
            .zip(g)
            .zip(b)
            .map(|((&xi, &gi), &(lo, hi))| if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) { 0.0 } else { gi })
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn lbfgs_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), a) in memory.iter().zip(alphas.iter().rev()) {
        let rho = 1.0 / dot(y, s);
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f`, which returns the objective and its gradient. Trial points
/// where `f` fails are treated as rejected steps; a failure at `x0` is returned.
pub fn minimize<F>(mut f: F, x0: &[f64], bounds: Option<&Bounds>, cfg: &OptimizerConfig) -> Result<OptimizeOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if let Some(b) = bounds {
        if b.len() != x0.len() {
            return Err(MsgpError::DimensionMismatch {
                expected: x0.len(),
                got: b.len(),
            });
        }
        if b.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(MsgpError::InvalidArgument("lower bound exceeds upper bound".into()));
        }
    }
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(MsgpError::NonFinite("objective at the starting point".into()));
    }
    let mut evaluations = 1;
    let mut history = vec![fx];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut step: f64 = 1.0;
    let mut rising = 0usize;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let pg = projected_gradient(&x, &g, bounds);
        if inf_norm(&pg) <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut dir = match cfg.method {
            OptimizerMethod::Lbfgs if !memory.is_empty() => lbfgs_direction(&pg, &memory),
            _ => pg.iter().map(|v| -v).collect(),
        };
        if dot(&dir, &pg) >= 0.0 {
            memory.clear();
            dir = pg.iter().map(|v| -v).collect();
        }
        let scale = inf_norm(&dir);
        if scale > cfg.max_step {
            dir.iter_mut().for_each(|v| *v *= cfg.max_step / scale);
        }
        let mut t = match cfg.method {
            OptimizerMethod::Lbfgs if !memory.is_empty() => 1.0,
            _ => step.min(1.0),
        };
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            project(&mut trial, bounds);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if inf_norm(&moved) == 0.0 {
                break;
            }
            evaluations += 1;
            if let Ok((ft, gt)) = f(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + cfg.armijo * decrease {
                    accepted = Some((trial, ft, gt, t));
                    break;
                }
            }
            t *= cfg.backtrack;
        }
        let Some((xn, fnew, gn, t_used)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        iterations += 1;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            memory.push_back((s, yv));
            if memory.len() > cfg.lbfgs_memory {
                memory.pop_front();
            }
        }
        rising = if fnew > fx { rising + 1 } else { 0 };
        if rising >= cfg.divergence_window {
            return Err(MsgpError::Diverged(format!(
                "objective increased over {rising} consecutive accepted steps"
            )));
        }
        let gain = fx - fnew;
        log::debug!("optimizer step {iterations}: f = {fnew:.10e}, step = {t_used:e}");
        x = xn;
        fx = fnew;
        g = gn;
        history.push(fx);
        step = (t_used / cfg.backtrack).min(1.0);
        if gain.abs() < cfg.f_tol * fx.abs().max(1.0) {
            stop = StopReason::FunctionTolerance;
            break;
        }
    }
    Ok(OptimizeOutcome {
        x,
        value: fx,
        grad: g,
        iterations,
        evaluations,
        history,
        stop,
    })
}
