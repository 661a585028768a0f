use rand::Rng;

use crate::error::{Error, Result};
use crate::simulate::{
    extremal_functions, extremal_functions_partial, threshold_stopping_last_gamma, EfConfig, ThresholdConfig,
};
use crate::spectral::SpectralSampler;
use crate::stats::{mean_se, Estimate};

use super::{AssessMode, ErrorReport, RepPlan};

/// Where the positive part of the inner term is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositivePart {
    /// On every inner draw of `V` before averaging.
    #[default]
    PerDraw,
    /// On the inner average.
    OfMean,
}

/// Lower end of the `Gamma` range searched for points that would have
/// changed the stopped field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormulaLevel {
    /// `tau / inf Z_stop`. The points below it are taken as unused, which
    /// overcounts when the last draw lifted the minimum past the
    /// threshold (`Gamma_T > tau / inf Z_stop`): the result is then an
    /// upper bound.
    Threshold,
    /// `max(Gamma_T, tau / inf Z_stop)`, the exact conditional range of
    /// the unused points.
    #[default]
    LastPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulaOptions {
    pub reps_inner: usize,
    pub positive_part: PositivePart,
    pub level: FormulaLevel,
}

impl Default for FormulaOptions {
    fn default() -> Self {
        Self {
            reps_inner: 100,
            positive_part: PositivePart::PerDraw,
            level: FormulaLevel::LastPoint,
        }
    }
}

/// Inner draws below this count make `exp(-mean)` noticeably biased.
const MIN_INNER: usize = 30;

struct InnerMean {
    sum: f64,
    n: usize,
    mode: PositivePart,
}

impl InnerMean {
    fn new(mode: PositivePart) -> Self {
        Self { sum: 0.0, n: 0, mode }
    }

    fn push(&mut self, x: f64) {
        self.sum += match self.mode {
            PositivePart::PerDraw => x.max(0.0),
            PositivePart::OfMean => x,
        };
        self.n += 1;
    }

    fn value(&self) -> f64 {
        (self.sum / self.n as f64).max(0.0)
    }
}

fn max_ratio(v: &[f64], z: &[f64], shift: f64, factor: f64) -> f64 {
    v.iter()
        .zip(z)
        .map(|(v, z)| v / (factor * z + shift))
        .fold(0.0, f64::max)
}

/// Error probabilities of threshold stopping at `tau`, from the
/// representation of the error probability as
/// `1 - E exp(-E_V {sup V/(Z_stop + f) - tau / inf Z_stop}_+)`.
///
/// The outer expectation runs over stopped fields, the inner one over
/// `opts.reps_inner` independent draws of `V` from the same sampler.
pub fn estimate_p_formula(
    sampler: &SpectralSampler,
    tau: f64,
    eps: &[f64],
    opts: &FormulaOptions,
    plan: &RepPlan,
) -> Result<ErrorReport> {
    if opts.reps_inner == 0 {
        return Err(Error::invalid("need at least one inner draw"));
    }
    let cfg = ThresholdConfig::new(sampler.clone(), tau)?;
    let n_eps = eps.len();
    // Per outer replication: exp(-inner) for f = 0, then abs, then rel.
    let rows = plan.run(|rng| {
        let (z, stats, gamma_t) = threshold_stopping_last_gamma(&cfg, rng)?;
        let z = z.values;
        let level = tau / z.iter().copied().fold(f64::INFINITY, f64::min);
        let level = match opts.level {
            FormulaLevel::Threshold => level,
            FormulaLevel::LastPoint => level.max(gamma_t),
        };
        let mut acc: Vec<InnerMean> = (0..1 + 2 * n_eps).map(|_| InnerMean::new(opts.positive_part)).collect();
        for _ in 0..opts.reps_inner {
            let v = sampler.sample(rng).values;
            acc[0].push(max_ratio(&v, &z, 0.0, 1.0) - level);
            for (k, &e) in eps.iter().enumerate() {
                acc[1 + k].push(max_ratio(&v, &z, e, 1.0) - level);
                acc[1 + n_eps + k].push(max_ratio(&v, &z, 0.0, 1.0 + e) - level);
            }
        }
        let vals: Vec<f64> = acc.iter().map(|a| (-a.value()).exp()).collect();
        Ok((vals, stats, gamma_t > tau / z.iter().copied().fold(f64::INFINITY, f64::min)))
    })?;
    let column = |c: usize| {
        let xs: Vec<f64> = rows.iter().map(|r| r.0[c]).collect();
        let m = mean_se(&xs);
        Estimate {
            value: 1.0 - m.value,
            se: m.se,
        }
    };
    let mut warnings = Vec::new();
    if opts.reps_inner < MIN_INNER {
        warnings.push(format!(
            "only {} inner draws; the estimate is biased low",
            opts.reps_inner
        ));
    }
    if opts.positive_part == PositivePart::OfMean {
        warnings.push("positive part taken on the inner mean".into());
    }
    if opts.level == FormulaLevel::Threshold {
        let overshoot = rows.iter().filter(|r| r.2).count();
        if overshoot > 0 {
            warnings.push(format!(
                "in {overshoot} of {} runs the last draw ended above tau / inf Z; the estimate is an upper bound there",
                plan.reps
            ));
        }
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.1.stopping_time as f64).collect();
    let nws: Vec<f64> = rows.iter().map(|r| r.1.gaussian_draws as f64).collect();
    Ok(ErrorReport {
        mode: AssessMode::Formula,
        rep: sampler.rep(),
        tau,
        replications: plan.reps,
        p_any: column(0),
        eps: eps.to_vec(),
        p_abs: (0..n_eps).map(|k| column(1 + k)).collect(),
        p_rel: (0..n_eps).map(|k| column(1 + n_eps + k)).collect(),
        mean_missing: None,
        mean_t: Some(mean_se(&ts)),
        mean_nw: Some(mean_se(&nws)),
        sensitivity: None,
        warnings,
    })
}

fn exact_field<R: Rng + ?Sized>(sampler: &SpectralSampler, rng: &mut R) -> Result<Vec<f64>> {
    Ok(extremal_functions(sampler, &EfConfig::default(), rng)?.0.values)
}

/// Bound on the mean number of missing extremal functions at `tau`:
/// `E {sup V/Z - tau / inf Z}_+` with `Z` exact and independent of `V`.
pub fn bound_expected_missing(sampler: &SpectralSampler, tau: f64, plan: &RepPlan) -> Result<Estimate> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("tau must be nonnegative, got {tau}")));
    }
    sampler.ensure_pk()?;
    let xs = plan.run(|rng| {
        let z = exact_field(sampler, rng)?;
        let v = sampler.sample(rng).values;
        let level = tau / z.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((max_ratio(&v, &z, 0.0, 1.0) - level).max(0.0))
    })?;
    Ok(mean_se(&xs))
}

fn subset_or_none(sampler: &SpectralSampler, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        Ok(Vec::new())
    } else {
        sampler.grid().equidistant_subset(n)
    }
}

/// Mean number of extremal functions missed after visiting `n` equidistant
/// sites: `E sup V/Z - E max_{subset} V/Z`, estimated by paired
/// differences. `n = 0` gives `E sup V/Z`, the mean number of extremal
/// functions.
pub fn ef_partial_error(sampler: &SpectralSampler, n: usize, plan: &RepPlan) -> Result<Estimate> {
    sampler.ensure_pk()?;
    let subset = subset_or_none(sampler, n)?;
    let xs = plan.run(|rng| {
        let z = exact_field(sampler, rng)?;
        let v = sampler.sample(rng).values;
        let sup = max_ratio(&v, &z, 0.0, 1.0);
        let sub = subset.iter().map(|&i| v[i] / z[i]).fold(0.0, f64::max);
        Ok(sup - sub)
    })?;
    Ok(mean_se(&xs))
}

/// Probability that stopping the extremal-functions algorithm after `n`
/// equidistant sites leaves an error larger than `f` (absolute, `f = 0`
/// for any error): `1 - E exp(-E_V {sup V/(Z_n + f) - max_subset V/Z_n}_+)`.
pub fn ef_partial_probability(
    sampler: &SpectralSampler,
    n: usize,
    f: f64,
    opts: &FormulaOptions,
    plan: &RepPlan,
) -> Result<Estimate> {
    if opts.reps_inner == 0 {
        return Err(Error::invalid("need at least one inner draw"));
    }
    let subset = sampler.grid().equidistant_subset(n)?;
    let vals = plan.run(|rng| {
        let (z, _) = extremal_functions_partial(sampler, n, crate::simulate::DEFAULT_MAX_ITERATIONS, rng)?;
        let z = z.values;
        let mut acc = InnerMean::new(opts.positive_part);
        for _ in 0..opts.reps_inner {
            let v = sampler.sample(rng).values;
            let sub = subset.iter().map(|&i| v[i] / z[i]).fold(0.0, f64::max);
            acc.push(max_ratio(&v, &z, f, 1.0) - sub);
        }
        Ok((-acc.value()).exp())
    })?;
    let m = mean_se(&vals);
    Ok(Estimate {
        value: 1.0 - m.value,
        se: m.se,
    })
}
