//! Momentum methods on nonconvex problems, with executable checks of the
//! constants that govern their convergence.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certificates;
pub mod error;
pub mod gradient_flow;
pub mod linalg;
pub mod optimizer;
pub mod problems;
pub mod sampling;
pub mod saddle;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat64 = linalg::Mat<f64>;
pub type MomentumParams64 = optimizer::MomentumParams<f64>;
pub type Trace64 = optimizer::Trace<f64>;
pub type Certificate64 = certificates::Certificate<f64>;
pub type Desingularizer64 = analysis::Desingularizer<f64>;
pub type FlowTrajectory64 = gradient_flow::FlowTrajectory<f64>;
pub type LipschitzEstimate64 = problems::LipschitzEstimate<f64>;

pub type MomentumParams32 = optimizer::MomentumParams<f32>;
pub type Trace32 = optimizer::Trace<f32>;
