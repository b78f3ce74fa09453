//! Discrete principal curvatures from nets of curvature lines.
//!
//! Analytic charts supply ground truth ([`surface`]), nets of curvature lines are
//! generated on them ([`netgen`]), each vertex gets a triangulated star
//! ([`star`]) on which the discrete curvatures are evaluated ([`curvature`]).
//! [`verify`] turns the quantitative bounds into per-vertex checks and
//! [`harness`] runs refinement sweeps and fits convergence rates.

pub mod curvature;
pub mod error;
pub mod harness;
pub mod netgen;
pub mod star;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
