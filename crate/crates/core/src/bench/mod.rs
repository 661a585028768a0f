//! Cost-versus-accuracy benchmark: calibrate each method to a target error
//! probability, then measure its mean cost on fresh streams.
//!
//! Cost is counted in Gaussian field draws. Calibration and evaluation use
//! disjoint stream ranges, and every scenario draws from the same ranges
//! regardless of its position in the list, so results do not depend on
//! scenario order.

mod config;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

pub use config::{parse_scenarios, preset, Preset};

use crate::assess::RepPlan;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{ModelKind, ModelSpec, RepTag};
use crate::rng::StreamPurpose;
use crate::simulate::{
    extremal_functions, extremal_functions_trace, subset_first_order, threshold_trajectory, EfConfig, EfTrace,
    ThresholdConfig, Trajectory,
};
use crate::spectral::{estimate_theta_sup, SamplerOptions, SpectralSampler, ThetaSource, DEFAULT_THETA_PILOT};
use crate::stats::{mean_se, proportion, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Threshold stopping with the sum-normalized representation.
    Dm,
    /// Extremal functions, optionally stopped after an equidistant subset.
    Ef,
    /// Threshold stopping with the sup-normalized representation drawn by
    /// rejection.
    Sn,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dm => "DM",
            Method::Ef => "EF",
            Method::Sn => "SN",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dm" => Ok(Method::Dm),
            "ef" => Ok(Method::Ef),
            "sn" => Ok(Method::Sn),
            _ => Err(Error::invalid(format!("unknown method {s:?} (expected dm, ef or sn)"))),
        }
    }
}

/// One benchmark cell: a model on a grid, a method and a target error.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub model: ModelSpec,
    pub grid: Grid,
    pub method: Method,
    pub target_error: f64,
    /// Evaluation replications.
    pub reps: usize,
    pub calibration_reps: usize,
}

impl Scenario {
    pub fn new(
        id: impl Into<String>,
        model: ModelSpec,
        grid: Grid,
        method: Method,
        target_error: f64,
        reps: usize,
    ) -> Result<Self> {
        let s = Self {
            id: id.into(),
            model,
            grid,
            method,
            target_error,
            reps,
            calibration_reps: reps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.target_error) {
            return Err(Error::invalid(format!(
                "target error must lie in [0, 1), got {}",
                self.target_error
            )));
        }
        if self.reps < 100 || self.calibration_reps < 100 {
            return Err(Error::invalid(format!(
                "scenario {} needs at least 100 replications",
                self.id
            )));
        }
        Ok(())
    }

    fn same_setup(&self, other: &Scenario) -> bool {
        self.model == other.model
            && self.grid == other.grid
            && self.reps == other.reps
            && self.calibration_reps == other.calibration_reps
    }
}

/// Calibrated control of a method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Tau(f64),
    /// Number of equidistant sites visited first by the extremal-functions
    /// algorithm.
    Subset(usize),
}

impl Control {
    pub fn value(&self) -> f64 {
        match *self {
            Control::Tau(t) => t,
            Control::Subset(n) => n as f64,
        }
    }
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Control::Tau(t) => write!(f, "tau = {t}"),
            Control::Subset(n) => write!(f, "n = {n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub control: Control,
    /// Error probability at the control on the calibration streams.
    pub measured: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scenario_id: String,
    pub model: ModelSpec,
    pub n: usize,
    pub method: Method,
    pub target_error: f64,
    pub control: Control,
    pub mean_t: Estimate,
    pub mean_nw: Estimate,
    /// Error probability re-measured on the evaluation streams.
    pub achieved_error: Estimate,
    pub reps: usize,
    pub seed: u64,
    /// Replications lost to the iteration cap.
    pub runaways: usize,
    /// Time spent on the evaluation runs behind this row; not written to CSV.
    pub wall_seconds: f64,
}

/// Monte Carlo constants behind the exact cost formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginConstants {
    /// `E 1/inf Z`, the cost of threshold stopping per unit threshold.
    pub inf_recip: Estimate,
    pub theta: Estimate,
}

/// `E 1/inf Z` from exact samples and the sup-norm constant from a pilot.
pub fn plugin_constants(model: ModelSpec, grid: Grid, reps: usize, seed: u64) -> Result<PluginConstants> {
    let s = SpectralSampler::new(model, grid.clone(), RepTag::SumNorm)?;
    let plan = RepPlan::new(seed, StreamPurpose::PluginConstants, reps);
    let xs = plan.run(|rng| Ok(1.0 / extremal_functions(&s, &EfConfig::default(), rng)?.0.min()))?;
    let theta = estimate_theta_sup(model, grid, reps, seed)?;
    Ok(PluginConstants {
        inf_recip: mean_se(&xs),
        theta: theta.estimate(),
    })
}

fn sampler_for(model: ModelSpec, grid: &Grid, method: Method, seed: u64) -> Result<SpectralSampler> {
    match method {
        Method::Dm | Method::Ef => SpectralSampler::new(model, grid.clone(), RepTag::SumNorm),
        Method::Sn => {
            let opts = SamplerOptions {
                theta: ThetaSource::Pilot {
                    reps: DEFAULT_THETA_PILOT,
                    seed,
                },
                ..SamplerOptions::default()
            };
            SpectralSampler::with_options(model, grid.clone(), RepTag::SupNorm, &opts)
        }
    }
}

/// Runs `f` per replication, keeping runaway replications out of the
/// results and counting them.
fn run_counted<T: Send>(
    plan: &RepPlan,
    f: impl Fn(&mut crate::rng::RngStream) -> Result<T> + Sync,
) -> Result<(Vec<T>, usize)> {
    let raw = plan.run(|rng| match f(rng) {
        Ok(x) => Ok(Some(x)),
        Err(Error::Runaway { .. }) => Ok(None),
        Err(e) => Err(e),
    })?;
    let lost = raw.iter().filter(|x| x.is_none()).count();
    if lost == raw.len() {
        return Err(Error::numeric("every replication hit the iteration cap"));
    }
    Ok((raw.into_iter().flatten().collect(), lost))
}

/// Bisection on `tau` over `(0, bound]` against per-replication critical
/// thresholds: replication `r` errs at `tau` iff `tau < crit[r]`.
///
/// The bracket keeps `p(hi) <= target < p(lo)` and is narrowed until it
/// pins the empirical crossing; stopping at the first threshold within
/// sampling tolerance leaves too much slack for fresh streams.
fn bisect_tau(crit: &[f64], bound: f64, target: f64) -> Result<Calibration> {
    let p_at = |tau: f64| proportion(crit.iter().map(|&c| tau < c));
    if target == 0.0 {
        return Ok(Calibration {
            control: Control::Tau(bound),
            measured: p_at(bound),
        });
    }
    let p0 = proportion(crit.iter().map(|&c| c > 0.0));
    if p0.value < target {
        return Err(Error::DegenerateRequest(format!(
            "error probability {} at the smallest threshold is below the target {target}",
            p0.value
        )));
    }
    let (mut lo, mut hi) = (0.0, bound);
    while hi - lo > 1e-12 * bound {
        let mid = 0.5 * (lo + hi);
        if p_at(mid).value > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        control: Control::Tau(hi),
        measured: p_at(hi),
    })
}

/// Recorded runs of one method on one model, reused across targets.
struct MethodRuns<'a> {
    sampler: SpectralSampler,
    first: &'a Scenario,
    seed: u64,
    stop: Option<StopRuns>,
    ef_cal: HashMap<usize, Estimate>,
    ef_eval: HashMap<usize, (Vec<EfTrace>, usize, f64)>,
}

struct StopRuns {
    bound: f64,
    crit: Vec<f64>,
    eval: Vec<Trajectory>,
    eval_lost: usize,
    eval_seconds: f64,
}

impl<'a> MethodRuns<'a> {
    fn new(first: &'a Scenario, seed: u64) -> Result<Self> {
        first.validate()?;
        Ok(Self {
            sampler: sampler_for(first.model, &first.grid, first.method, seed)?,
            first,
            seed,
            stop: None,
            ef_cal: HashMap::new(),
            ef_eval: HashMap::new(),
        })
    }

    fn stop_runs(&mut self) -> Result<&StopRuns> {
        if self.stop.is_none() {
            let cfg = ThresholdConfig::exact(self.sampler.clone())?;
            let bound = cfg.tau;
            let cal = RepPlan::new(self.seed, StreamPurpose::Calibration, self.first.calibration_reps);
            let (crit, _) = run_counted(&cal, |rng| Ok(threshold_trajectory(&cfg, rng)?.critical_tau()))?;
            let start = Instant::now();
            let ev = RepPlan::new(self.seed, StreamPurpose::Evaluation, self.first.reps);
            let (eval, eval_lost) = run_counted(&ev, |rng| threshold_trajectory(&cfg, rng))?;
            self.stop = Some(StopRuns {
                bound,
                crit,
                eval,
                eval_lost,
                eval_seconds: start.elapsed().as_secs_f64(),
            });
        }
        Ok(self.stop.as_ref().expect("just filled"))
    }

    fn ef_config(&self, n: usize) -> Result<EfConfig> {
        let subset = self.first.grid.equidistant_subset(n)?;
        Ok(EfConfig {
            order: Some(subset_first_order(self.first.grid.len(), &subset)),
            ..EfConfig::default()
        })
    }

    /// Error probability of stopping the extremal-functions algorithm after
    /// `n` sites, on the calibration streams.
    fn ef_error(&mut self, n: usize) -> Result<Estimate> {
        let total = self.first.grid.len();
        if n >= total {
            return Ok(Estimate::exact(0.0));
        }
        if let Some(e) = self.ef_cal.get(&n) {
            return Ok(*e);
        }
        let cfg = self.ef_config(n)?;
        let plan = RepPlan::new(self.seed, StreamPurpose::Calibration, self.first.calibration_reps);
        let (errs, _) = run_counted(&plan, |rng| {
            Ok(extremal_functions_trace(&self.sampler, &cfg, total, rng)?.accepted_after(n) > 0)
        })?;
        let e = proportion(errs);
        self.ef_cal.insert(n, e);
        Ok(e)
    }

    fn calibrate(&mut self, target: f64) -> Result<Calibration> {
        if !(0.0..1.0).contains(&target) {
            return Err(Error::invalid(format!("target error must lie in [0, 1), got {target}")));
        }
        match self.first.method {
            Method::Dm | Method::Sn => {
                let runs = self.stop_runs()?;
                bisect_tau(&runs.crit, runs.bound, target)
            }
            Method::Ef => {
                let total = self.first.grid.len();
                if target == 0.0 {
                    return Ok(Calibration {
                        control: Control::Subset(total),
                        measured: Estimate::exact(0.0),
                    });
                }
                // Smallest n with measured error at most the target.
                let (mut lo, mut hi) = (1, total);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if self.ef_error(mid)?.value <= target {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                Ok(Calibration {
                    control: Control::Subset(lo),
                    measured: self.ef_error(lo)?,
                })
            }
        }
    }

    fn evaluate(&mut self, sc: &Scenario, cal: &Calibration) -> Result<BenchRow> {
        let (mean_t, mean_nw, achieved, lost, seconds) = match cal.control {
            Control::Tau(tau) => {
                let runs = self.stop_runs()?;
                let t: Vec<f64> = runs.eval.iter().map(|r| r.stopping_time(tau) as f64).collect();
                let nw: Vec<f64> = runs.eval.iter().map(|r| r.gaussian_draws(tau) as f64).collect();
                let err = proportion(runs.eval.iter().map(|r| r.has_error(tau)));
                (mean_se(&t), mean_se(&nw), err, runs.eval_lost, runs.eval_seconds)
            }
            Control::Subset(n) => {
                if !self.ef_eval.contains_key(&n) {
                    let cfg = self.ef_config(n)?;
                    let total = self.first.grid.len();
                    let start = Instant::now();
                    let plan = RepPlan::new(self.seed, StreamPurpose::Evaluation, self.first.reps);
                    let (traces, lost) =
                        run_counted(&plan, |rng| extremal_functions_trace(&self.sampler, &cfg, total, rng))?;
                    self.ef_eval.insert(n, (traces, lost, start.elapsed().as_secs_f64()));
                }
                let (traces, lost, seconds) = &self.ef_eval[&n];
                let t: Vec<f64> = traces.iter().map(|tr| tr.draws_through[n - 1] as f64).collect();
                let err = proportion(traces.iter().map(|tr| tr.accepted_after(n) > 0));
                let m = mean_se(&t);
                (m, m, err, *lost, *seconds)
            }
        };
        Ok(BenchRow {
            scenario_id: sc.id.clone(),
            model: sc.model,
            n: sc.grid.len(),
            method: sc.method,
            target_error: sc.target_error,
            control: cal.control,
            mean_t,
            mean_nw,
            achieved_error: achieved,
            reps: sc.reps,
            seed: self.seed,
            runaways: lost,
            wall_seconds: seconds,
        })
    }
}

/// Calibrates the control of one scenario on its calibration streams.
pub fn calibrate(scenario: &Scenario, seed: u64) -> Result<Calibration> {
    MethodRuns::new(scenario, seed)?.calibrate(scenario.target_error)
}

/// Calibrates and evaluates every scenario. Scenarios sharing an id and a
/// method share their recorded runs, so a ladder of targets costs little
/// more than a single one.
pub fn run_benchmark(scenarios: &[Scenario], seed: u64) -> Result<Vec<BenchRow>> {
    let mut groups: Vec<(String, Method, Vec<usize>)> = Vec::new();
    for (i, sc) in scenarios.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == sc.id && g.1 == sc.method) {
            Some(g) => {
                if !scenarios[g.2[0]].same_setup(sc) {
                    return Err(Error::invalid(format!(
                        "scenario {} is listed twice with different settings",
                        sc.id
                    )));
                }
                g.2.push(i);
            }
            None => groups.push((sc.id.clone(), sc.method, vec![i])),
        }
    }
    let mut rows: Vec<Option<BenchRow>> = vec![None; scenarios.len()];
    for (_, _, members) in groups {
        let mut runs = MethodRuns::new(&scenarios[members[0]], seed)?;
        for i in members {
            let sc = &scenarios[i];
            sc.validate()?;
            let cal = runs.calibrate(sc.target_error)?;
            rows[i] = Some(runs.evaluate(sc, &cal)?);
        }
    }
    Ok(rows.into_iter().map(|r| r.expect("every scenario evaluated")).collect())
}

pub const CSV_COLUMNS: [&str; 16] = [
    "scenario_id",
    "model_kind",
    "alpha_or_nu",
    "v_or_s",
    "N",
    "method",
    "target_error",
    "control_value",
    "mean_T",
    "se_T",
    "mean_NW",
    "se_NW",
    "achieved_error",
    "se_error",
    "reps",
    "seed",
];

fn kind_label(model: &ModelSpec) -> &'static str {
    match model.kind() {
        ModelKind::BrownResnick => "brown-resnick",
        ModelKind::ExtremalT => "extremal-t",
    }
}

/// Writes `# `-prefixed comment lines, the header row and one row per
/// benchmark cell.
pub fn write_csv<W: Write>(mut out: W, comments: &[String], rows: &[BenchRow]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            kind_label(&r.model).to_string(),
            r.model.shape().to_string(),
            r.model.v_or_s().to_string(),
            r.n.to_string(),
            r.method.to_string(),
            r.target_error.to_string(),
            r.control.value().to_string(),
            r.mean_t.value.to_string(),
            r.mean_t.se.to_string(),
            r.mean_nw.value.to_string(),
            r.mean_nw.se.to_string(),
            r.achieved_error.value.to_string(),
            r.achieved_error.se.to_string(),
            r.reps.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_hits_target_on_a_known_sample() {
        // critical thresholds 0.01, 0.02, ..., 10.0
        let crit: Vec<f64> = (1..=1000).map(|i| i as f64 / 100.0).collect();
        let c = bisect_tau(&crit, 10.0, 0.05).unwrap();
        assert!((c.measured.value - 0.05).abs() <= 0.001);
        assert!(c.measured.value <= 0.05);
        assert_eq!(bisect_tau(&crit, 10.0, 0.0).unwrap().control, Control::Tau(10.0));
    }

    #[test]
    fn bisection_rejects_unreachable_targets() {
        let crit = vec![0.0; 90].into_iter().chain(vec![1.0; 10]).collect::<Vec<_>>();
        assert!(matches!(bisect_tau(&crit, 2.0, 0.5), Err(Error::DegenerateRequest(_))));
    }

    #[test]
    fn methods_parse() {
        assert_eq!("DM".parse::<Method>().unwrap(), Method::Dm);
        assert_eq!("ef".parse::<Method>().unwrap(), Method::Ef);
        assert!("xx".parse::<Method>().is_err());
    }
}
