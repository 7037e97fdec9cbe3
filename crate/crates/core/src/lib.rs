//! Direct and inverse solvers for the logistic equation and the 1-D porous
//! medium equation.
//!
//! The numeric kernels are generic over [`Real`], so they run on `f32`, `f64`
//! and on [`HyperDual`] numbers (which is how exact loss derivatives are
//! obtained). Experiment drivers, optimizers and the PME solvers work in `f64`.

pub mod dual;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod logistic;
pub mod metrics;
pub mod ode;
pub mod optimize;
pub mod pme;
pub mod report;
pub mod rng;
pub mod scalar;

pub use dual::HyperDual;
pub use error::{Error, Result};
pub use grid::{Field2D, FieldStatus, Grid1D, TimeSeries};
pub use report::OptimizerReport;
pub use scalar::Real;

/// Uniform grid in double precision.
pub type Grid = Grid1D<f64>;
/// Space-time field in double precision.
pub type Field = Field2D<f64>;
/// Sampled trajectory in double precision.
pub type Series = TimeSeries<f64>;
/// Single-precision grid.
pub type Grid32 = Grid1D<f32>;
/// Single-precision trajectory.
pub type Series32 = TimeSeries<f32>;
/// Hyper-dual number over `f64`, used for exact first and second derivatives.
pub type Dual64 = HyperDual<f64>;
