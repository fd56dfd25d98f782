//! Green-function machinery for the dissipative third-order operator
//! `eps*u_xxt + c^2*u_xx - u_tt - 2a*u_t = -f` on the strip `[0, pi] x [0, inf)`.
//!
//! Every numerical routine is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the CLI and the
//! acceptance suite use.

// `!(x > 0)` is used throughout to reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod kernels;
pub mod linear;
pub mod model;
pub mod nonlinear;
pub mod oracle;
pub mod scalar;
pub mod summation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type Grid64 = model::Grid<f64>;
pub type Field64 = model::Field<f64>;
pub type SourceSpec64 = model::SourceSpec<f64>;
pub type KernelSeries64 = kernels::KernelSeries<f64>;
pub type KernelSeries32 = kernels::KernelSeries<f32>;
pub type ModeSeries64 = linear::ModeSeries<f64>;
