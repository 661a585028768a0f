use crate::error::{Error, Result};
use crate::model::RepTag;
use crate::simulate::{threshold_trajectory, ThresholdConfig};
use crate::spectral::SpectralSampler;
use crate::stats::proportion;

use super::{summarize, zero_report, AssessMode, ErrorReport, RepOutcome, RepPlan};

/// Reference threshold of the surrogate, as a multiple of `tau`.
pub const SURROGATE_FACTOR: f64 = 50.0;
/// Threshold of the sensitivity check, as a multiple of `tau`.
pub const SURROGATE_SENSITIVITY_FACTOR: f64 = 100.0;

/// Error of threshold stopping at `tau` for a bounded representation,
/// measured by continuing every run on its own stream to the exact
/// threshold.
pub fn assess_by_continuation(
    sampler: &SpectralSampler,
    tau: f64,
    eps: &[f64],
    plan: &RepPlan,
) -> Result<ErrorReport> {
    let bound = match sampler.rep() {
        RepTag::SumNorm | RepTag::SupNorm => sampler.bound().expect("bounded representation"),
        r => {
            return Err(Error::UnsupportedRepresentation(format!(
                "continuation needs a bounded representation, got {r}"
            )))
        }
    };
    if tau >= bound {
        return Ok(zero_report(
            AssessMode::Continuation,
            sampler.rep(),
            tau,
            eps,
            plan.reps,
            format!("threshold {tau} is at or above the exact threshold {bound}; no error possible"),
        ));
    }
    let cfg = ThresholdConfig::exact(sampler.clone())?;
    let outcomes = plan.run(|rng| {
        let tr = threshold_trajectory(&cfg, rng)?;
        Ok(to_outcome(tr.outcome_vs_final(tau)))
    })?;
    Ok(summarize(AssessMode::Continuation, sampler.rep(), tau, eps, &outcomes))
}

/// Continuation to `SURROGATE_FACTOR * tau` for any representation; exact
/// only up to the error of the reference run itself. The sensitivity field
/// reports `p_any` against `SURROGATE_SENSITIVITY_FACTOR * tau`.
pub fn assess_surrogate(sampler: &SpectralSampler, tau: f64, eps: &[f64], plan: &RepPlan) -> Result<ErrorReport> {
    let tau_ref = SURROGATE_FACTOR * tau;
    let tau_hi = SURROGATE_SENSITIVITY_FACTOR * tau;
    let cfg = ThresholdConfig::new(sampler.clone(), tau_hi)?;
    let pairs = plan.run(|rng| {
        let tr = threshold_trajectory(&cfg, rng)?;
        Ok((to_outcome(tr.outcome(tau, tau_ref)), tr.outcome(tau, tau_hi).error))
    })?;
    let outcomes: Vec<RepOutcome> = pairs.iter().map(|p| p.0).collect();
    let mut report = summarize(AssessMode::Surrogate, sampler.rep(), tau, eps, &outcomes);
    let hi = proportion(pairs.iter().map(|p| p.1));
    if !report.p_any.agrees_with(&hi, 3.0) {
        report.warnings.push(format!(
            "surrogate not converged: p_any {} at {SURROGATE_FACTOR} tau vs {} at {SURROGATE_SENSITIVITY_FACTOR} tau",
            report.p_any.value, hi.value
        ));
    }
    report.sensitivity = Some(hi);
    report.warnings.push(format!(
        "approximate reference: continuation to {SURROGATE_FACTOR} tau"
    ));
    Ok(report)
}

fn to_outcome(o: crate::simulate::StopOutcome) -> RepOutcome {
    RepOutcome {
        error: o.error,
        missing: o.missing,
        abs_dev: o.abs_deviation,
        rel_dev: o.rel_deviation,
        t: o.stopping_time,
        nw: o.gaussian_draws,
    }
}
