pub mod lcg;
pub mod likelihood;
pub mod model;
pub mod optimize;
pub mod ski;

pub use lcg::{lcg_solve, lcg_solve_preconditioned, solve_toeplitz, LcgConfig, LcgOutcome};
pub use likelihood::{grid_spectrum, logdet_surrogate, nll, nll_grad, EigenMapping, GridSpectrum, NllGradient, NllValue, SkiConfig};
pub use model::{fit_fixed, train, GridSpec, ParameterBounds, TrainConfig, TrainedModel, TrainingSummary};
pub use optimize::{minimize, OptimizeOutcome, OptimizerConfig, OptimizerMethod, StopReason};
pub use ski::{grid_covariance, grid_covariance_derivatives, GridStructure, SkiOperator};
