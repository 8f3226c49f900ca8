//! Numerical laboratory for constant-mean-curvature foliations of flat
//! Lorentzian spacetimes.
//!
//! The crate is organised bottom-up:
//!
//! - [`lorentz`]: Minkowski space, Lorentz maps and affine isometries.
//! - [`holonomy`]: surface-group holonomy, translation cocycles and the
//!   genus-two octagon group.
//! - [`models`]: exact cone and Kasner-type spacetimes, Riccati propagation.
//! - [`flow`]: the CMC-time flow with elliptic lapse and rescaled-volume
//!   diagnostics.
//! - [`conformal`]: the Lichnerowicz equation on a constant scalar curvature
//!   background.
//! - [`graph`]: spacelike graphs, their Gauss maps, CMC relaxation and the
//!   large-scale limit experiment.

pub mod banded;
pub mod conformal;
pub mod error;
pub mod flow;
pub mod graph;
pub mod holonomy;
pub mod limit;
pub mod lorentz;
pub mod models;
pub mod quadrature;
pub mod table;

pub use error::{Error, Result};
