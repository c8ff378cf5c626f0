//! Bi-k-order finite volume element schemes on rectangular meshes for
//! diffusion-convection-reaction problems on the unit square, together with
//! the machinery to locate and measure their superconvergence and
//! ultraconvergence points.

pub mod assembly;
pub mod dualscheme;
pub mod errnorms;
pub mod error;
pub mod harness;
pub mod meshgen;
pub mod pdemodel;
pub mod refbasis;
pub mod superstruct;

pub use error::{FveError, Result};
