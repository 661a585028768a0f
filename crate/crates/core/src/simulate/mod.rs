//! Threshold stopping and extremal-functions simulation.

mod extremal;
mod threshold;

pub use extremal::{
    extremal_functions, extremal_functions_partial, extremal_functions_trace, subset_first_order, EfConfig,
    EfTrace, ExtremalFunction,
};
pub(crate) use threshold::threshold_stopping_last_gamma;
pub use threshold::{threshold_stopping, threshold_trajectory, StopOutcome, ThresholdConfig, Trajectory};

/// Safety cap on spectral draws per replication.
pub const DEFAULT_MAX_ITERATIONS: u64 = 1_000_000;

/// Cost instrumentation of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    /// Spectral draws `T`.
    pub stopping_time: u64,
    /// Gaussian field draws `N_W`.
    pub gaussian_draws: u64,
    pub exact: bool,
}
