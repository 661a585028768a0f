//! Error assessment for early-stopped simulations.
//!
//! Three routes are available: continuation of a run on the same random
//! stream (exact for bounded representations, a surrogate otherwise), the
//! reconstruction of all relevant Poisson points around an exact sample
//! (Brown-Resnick only), and Monte Carlo evaluation of closed-form error
//! expressions.

mod continuation;
mod formula;
mod reconstruction;

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

pub use continuation::{assess_by_continuation, assess_surrogate, SURROGATE_FACTOR, SURROGATE_SENSITIVITY_FACTOR};
pub use formula::{
    bound_expected_missing, ef_partial_error, ef_partial_probability, estimate_p_formula, FormulaLevel,
    FormulaOptions, PositivePart,
};
pub use reconstruction::{assess_reconstruction, UPosterior};

use crate::error::Result;
use crate::model::RepTag;
use crate::rng::{RngStream, StreamPurpose};
use crate::stats::{mean_se, proportion, Estimate};

/// Seeds and stream range of a batch of independent replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepPlan {
    pub seed: u64,
    pub purpose: StreamPurpose,
    pub reps: usize,
}

impl RepPlan {
    pub fn new(seed: u64, purpose: StreamPurpose, reps: usize) -> Self {
        Self { seed, purpose, reps }
    }

    pub fn rng(&self, rep: usize) -> RngStream {
        RngStream::for_replication(self.seed, self.purpose, rep as u64)
    }

    /// Runs `f` once per replication, in parallel, keeping replication order.
    pub fn run<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&mut RngStream) -> Result<T> + Sync,
    {
        (0..self.reps)
            .into_par_iter()
            .map(|r| f(&mut self.rng(r)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssessMode {
    /// Same-stream continuation to an exact threshold.
    Continuation,
    /// Same-stream continuation to a large finite threshold.
    Surrogate,
    /// Reconstruction of extremal and relevant non-extremal points.
    Reconstruction,
    /// Monte Carlo evaluation of the closed-form error probability.
    Formula,
}

impl fmt::Display for AssessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssessMode::Continuation => "continuation",
            AssessMode::Surrogate => "surrogate",
            AssessMode::Reconstruction => "reconstruction",
            AssessMode::Formula => "formula",
        })
    }
}

/// Estimated error probabilities of a stopped simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mode: AssessMode,
    pub rep: RepTag,
    pub tau: f64,
    pub replications: usize,
    /// Probability that the stopped field differs from the exact one.
    pub p_any: Estimate,
    /// Error sizes for `p_abs` and `p_rel`.
    pub eps: Vec<f64>,
    /// `P(sup |Z - Z_stop| > eps)` per entry of `eps`.
    pub p_abs: Vec<Estimate>,
    /// `P(sup |Z - Z_stop| / Z_stop > eps)` per entry of `eps`.
    pub p_rel: Vec<Estimate>,
    /// Mean number of missing extremal functions, when measured.
    pub mean_missing: Option<Estimate>,
    pub mean_t: Option<Estimate>,
    pub mean_nw: Option<Estimate>,
    /// `p_any` against the larger reference threshold (surrogate mode).
    pub sensitivity: Option<Estimate>,
    pub warnings: Vec<String>,
}

/// Per-replication outcome shared by the sampling-based modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RepOutcome {
    pub error: bool,
    pub missing: usize,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub t: u64,
    pub nw: u64,
}

pub(crate) fn summarize(
    mode: AssessMode,
    rep: RepTag,
    tau: f64,
    eps: &[f64],
    outcomes: &[RepOutcome],
) -> ErrorReport {
    let f = |g: &dyn Fn(&RepOutcome) -> f64| mean_se(&outcomes.iter().map(g).collect::<Vec<_>>());
    ErrorReport {
        mode,
        rep,
        tau,
        replications: outcomes.len(),
        p_any: proportion(outcomes.iter().map(|o| o.error)),
        eps: eps.to_vec(),
        p_abs: eps
            .iter()
            .map(|&e| proportion(outcomes.iter().map(|o| o.abs_dev > e)))
            .collect(),
        p_rel: eps
            .iter()
            .map(|&e| proportion(outcomes.iter().map(|o| o.rel_dev > e)))
            .collect(),
        mean_missing: Some(f(&|o| o.missing as f64)),
        mean_t: Some(f(&|o| o.t as f64)),
        mean_nw: Some(f(&|o| o.nw as f64)),
        sensitivity: None,
        warnings: Vec::new(),
    }
}

pub(crate) fn zero_report(mode: AssessMode, rep: RepTag, tau: f64, eps: &[f64], reps: usize, warning: String) -> ErrorReport {
    let z = Estimate::exact(0.0);
    ErrorReport {
        mode,
        rep,
        tau,
        replications: reps,
        p_any: z,
        eps: eps.to_vec(),
        p_abs: vec![z; eps.len()],
        p_rel: vec![z; eps.len()],
        mean_missing: Some(z),
        mean_t: None,
        mean_nw: None,
        sensitivity: None,
        warnings: vec![warning],
    }
}
