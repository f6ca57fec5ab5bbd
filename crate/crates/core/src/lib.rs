pub mod circulant_approx;
pub mod error;
pub mod exact;
pub mod fft;
pub mod gp;
pub mod interpolation;
pub mod kernels;
pub mod harness;
pub mod linalg;
pub mod prediction;
pub mod projection;

pub use error::{MsgpError, Result};
