//! Functional principal component analysis for sparse or dense longitudinal data whose
//! measurements are left-censored at a detection limit.
//!
//! Mean and covariance are estimated by local-constant kernel-weighted likelihood using a
//! quadratic approximation of the log normal CDF, which gives closed-form estimators. Subject
//! scores are obtained the same way from a small linear system per subject.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod data;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod pipeline;
pub mod reconstruct;
pub mod scores;
pub mod simulation;
pub mod smoothing;

pub use data::{Dataset, Trajectory, WeightScheme};
pub use error::{FpcaError, Result};
pub use grid::{inner_product, make_uniform_grid, Grid};
pub use kernel::{kernel_h, Kernel};
