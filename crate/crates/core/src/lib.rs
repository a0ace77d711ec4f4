//! Numerical laboratory for vanishing-viscosity selection in transport and
//! Burgers equations with rough first-order coefficients.

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod flow;
pub mod grid;
pub mod mollifier;
pub mod proxy;
pub mod schedules;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
pub use grid::{Domain1D, GridField, SpaceTimeField};
