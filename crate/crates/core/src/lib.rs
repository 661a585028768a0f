//! Simulation of max-stable random fields on finite grids.
//!
//! Brown-Resnick and extremal-t fields are simulated from their spectral
//! representation `Z = max_j V_j / Gamma_j` either by threshold stopping
//! or by the extremal-functions algorithm, with estimators for the error
//! committed when a simulation is stopped early.

// Negated comparisons such as `!(x > 0.0)` are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assess;
pub mod bench;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{make_grid_1d, parse_grid, Grid, LatticeMeta};
pub use model::{frechet_cdf, FieldSample, ModelKind, ModelSpec, RepTag};
pub use rng::{RngStream, StreamPurpose};
pub use spectral::{estimate_theta_sup, SamplerOptions, SpectralDraw, SpectralSampler, ThetaEstimate, ThetaSource};
pub use stats::Estimate;
