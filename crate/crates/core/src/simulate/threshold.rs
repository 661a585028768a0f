use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{FieldSample, RepTag};
use crate::spectral::{SpectralDraw, SpectralSampler};

use super::{RunStats, DEFAULT_MAX_ITERATIONS};

#[derive(Debug, Clone)]
pub struct ThresholdConfig {
    pub sampler: SpectralSampler,
    pub tau: f64,
    pub max_iterations: u64,
}

impl ThresholdConfig {
    pub fn new(sampler: SpectralSampler, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || tau.is_nan() {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        Ok(Self {
            sampler,
            tau,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        })
    }

    /// Threshold equal to the almost-sure bound of a bounded representation.
    pub fn exact(sampler: SpectralSampler) -> Result<Self> {
        let tau = sampler.bound().ok_or_else(|| {
            Error::UnsupportedRepresentation(format!("{} has no almost-sure bound", sampler.rep()))
        })?;
        Self::new(sampler, tau)
    }

    pub fn with_max_iterations(mut self, max_iterations: u64) -> Result<Self> {
        if max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        self.max_iterations = max_iterations;
        Ok(self)
    }

    /// Whether the threshold guarantees an exact sample.
    pub fn is_exact(&self) -> bool {
        self.sampler.bound().is_some_and(|b| self.tau >= b)
    }
}

/// Supplies the Poisson increments and spectral draws of one run.
pub(crate) trait PointSource {
    fn exp(&mut self) -> f64;
    fn draw(&mut self) -> SpectralDraw;
}

struct SamplerSource<'a, R: ?Sized> {
    sampler: &'a SpectralSampler,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> PointSource for SamplerSource<'_, R> {
    fn exp(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    fn draw(&mut self) -> SpectralDraw {
        self.sampler.sample(self.rng)
    }
}

fn min_of(z: &[f64]) -> f64 {
    z.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Observer of the threshold loop, called after each draw with the draw's
/// 1-based index, its `Gamma`, its scaled values `v / Gamma`, and the next
/// `Gamma`.
trait Observer {
    fn after_draw(&mut self, j: u64, gamma: f64, scaled: &[f64], z: &[f64], next_gamma: f64, gaussian_draws: u64);
}

impl Observer for () {
    fn after_draw(&mut self, _: u64, _: f64, _: &[f64], _: &[f64], _: f64, _: u64) {}
}

/// Keeps the `Gamma` of the last draw.
struct LastGamma(f64);

impl Observer for LastGamma {
    fn after_draw(&mut self, _: u64, gamma: f64, _: &[f64], _: &[f64], _: f64, _: u64) {
        self.0 = gamma;
    }
}

fn run_core<S: PointSource, O: Observer>(
    n: usize,
    tau: f64,
    max_iterations: u64,
    rep: RepTag,
    exact: bool,
    src: &mut S,
    obs: &mut O,
) -> Result<(FieldSample, RunStats)> {
    let mut z = vec![0.0; n];
    let mut gamma = src.exp();
    let mut t = 0u64;
    let mut nw = 0u64;
    let mut scaled = vec![0.0; n];
    while tau / gamma >= min_of(&z) {
        if t >= max_iterations {
            return Err(Error::Runaway {
                iterations: t,
                partial: Box::new(FieldSample {
                    values: z,
                    stopping_time: t,
                    gaussian_draws: nw,
                    exact: false,
                    rep,
                }),
            });
        }
        let d = src.draw();
        t += 1;
        nw += d.gaussian_draws;
        for i in 0..n {
            scaled[i] = d.values[i] / gamma;
            if scaled[i] > z[i] {
                z[i] = scaled[i];
            }
        }
        let used = gamma;
        gamma += src.exp();
        obs.after_draw(t, used, &scaled, &z, gamma, nw);
    }
    let stats = RunStats {
        stopping_time: t,
        gaussian_draws: nw,
        exact,
    };
    Ok((
        FieldSample {
            values: z,
            stopping_time: t,
            gaussian_draws: nw,
            exact,
            rep,
        },
        stats,
    ))
}

/// Threshold stopping: superimpose `v_j / Gamma_j` until `tau / Gamma`
/// falls below the running minimum of the partial maximum.
pub fn threshold_stopping<R: Rng + ?Sized>(cfg: &ThresholdConfig, rng: &mut R) -> Result<(FieldSample, RunStats)> {
    let mut src = SamplerSource {
        sampler: &cfg.sampler,
        rng,
    };
    run_core(
        cfg.sampler.len(),
        cfg.tau,
        cfg.max_iterations,
        cfg.sampler.rep(),
        cfg.is_exact(),
        &mut src,
        &mut (),
    )
}

/// [`threshold_stopping`], also returning `Gamma_T` of the last draw.
pub(crate) fn threshold_stopping_last_gamma<R: Rng + ?Sized>(
    cfg: &ThresholdConfig,
    rng: &mut R,
) -> Result<(FieldSample, RunStats, f64)> {
    let mut src = SamplerSource {
        sampler: &cfg.sampler,
        rng,
    };
    let mut last = LastGamma(0.0);
    let (z, stats) = run_core(
        cfg.sampler.len(),
        cfg.tau,
        cfg.max_iterations,
        cfg.sampler.rep(),
        cfg.is_exact(),
        &mut src,
        &mut last,
    )?;
    Ok((z, stats, last.0))
}

/// Full record of one threshold-stopping run, sufficient to recover the
/// output and cost for every smaller threshold on the same random stream.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `Gamma_{j+1} * min z^(j)` for `j = 1..=T`; the run stops after draw
    /// `j` exactly when this level exceeds the threshold. Nondecreasing.
    stop_levels: Vec<f64>,
    /// Gaussian draws consumed through draw `j`.
    cum_gaussian: Vec<u64>,
    /// Per site: draws (1-based index, value) that raised the running max.
    records: Vec<Vec<(u64, f64)>>,
    tau_run: f64,
    exact: bool,
}

struct Recorder {
    stop_levels: Vec<f64>,
    cum_gaussian: Vec<u64>,
    records: Vec<Vec<(u64, f64)>>,
}

impl Observer for Recorder {
    fn after_draw(&mut self, j: u64, _: f64, scaled: &[f64], z: &[f64], next_gamma: f64, nw: u64) {
        for (i, (&s, &zi)) in scaled.iter().zip(z).enumerate() {
            if s == zi && s > 0.0 && self.records[i].last().is_none_or(|r| r.1 < s) {
                self.records[i].push((j, s));
            }
        }
        self.stop_levels.push(next_gamma * min_of(z));
        self.cum_gaussian.push(nw);
    }
}

impl Trajectory {
    /// Stopping time at the run threshold.
    pub fn len(&self) -> usize {
        self.stop_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stop_levels.is_empty()
    }

    pub fn tau_run(&self) -> f64 {
        self.tau_run
    }

    /// Whether the run threshold guarantees the final field is exact.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Stopping time `T_tau` for `tau <= tau_run`.
    pub fn stopping_time(&self, tau: f64) -> usize {
        debug_assert!(tau <= self.tau_run);
        let j = self.stop_levels.partition_point(|&l| l <= tau);
        (j + 1).min(self.len())
    }

    pub fn gaussian_draws(&self, tau: f64) -> u64 {
        self.cum_gaussian[self.stopping_time(tau) - 1]
    }

    /// Partial maximum after the first `t` draws.
    pub fn field_at(&self, t: usize) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| {
                let p = r.partition_point(|&(j, _)| j <= t as u64);
                if p == 0 {
                    0.0
                } else {
                    r[p - 1].1
                }
            })
            .collect()
    }

    pub fn final_field(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.last().map_or(0.0, |x| x.1))
            .collect()
    }

    /// Index of the draw attaining the final maximum, per site (0 if none).
    pub fn extremal_indices(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.last().map_or(0, |x| x.0)).collect()
    }

    /// Largest threshold that still produces an error: stopping at `tau`
    /// misses part of the final field iff `tau < critical_tau()`.
    pub fn critical_tau(&self) -> f64 {
        let last = self.extremal_indices().into_iter().max().unwrap_or(0) as usize;
        if last >= 2 {
            self.stop_levels[last - 2]
        } else {
            0.0
        }
    }

    pub fn has_error(&self, tau: f64) -> bool {
        tau < self.critical_tau()
    }

    /// Compares stopping at `tau` with stopping at the larger `tau_ref`
    /// (both at most the run threshold) on this stream.
    pub fn outcome(&self, tau: f64, tau_ref: f64) -> StopOutcome {
        let t = self.stopping_time(tau);
        let t_ref = self.stopping_time(tau_ref.max(tau));
        let mut abs = 0.0f64;
        let mut rel = 0.0f64;
        let mut late: Vec<u64> = Vec::new();
        for r in &self.records {
            let at = |tt: usize| {
                let p = r.partition_point(|&(j, _)| j <= tt as u64);
                if p == 0 {
                    (0, 0.0)
                } else {
                    r[p - 1]
                }
            };
            let (_, approx) = at(t);
            let (j_ref, reference) = at(t_ref);
            if j_ref > t as u64 {
                late.push(j_ref);
                let d = reference - approx;
                abs = abs.max(d);
                rel = rel.max(if approx > 0.0 { d / approx } else { f64::INFINITY });
            }
        }
        late.sort_unstable();
        late.dedup();
        StopOutcome {
            stopping_time: t as u64,
            gaussian_draws: self.cum_gaussian[t - 1],
            error: !late.is_empty(),
            missing: late.len(),
            abs_deviation: abs,
            rel_deviation: rel,
        }
    }

    /// [`Trajectory::outcome`] against the final field of the run.
    pub fn outcome_vs_final(&self, tau: f64) -> StopOutcome {
        self.outcome(tau, self.tau_run)
    }
}

/// Effect of stopping early, relative to a reference field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopOutcome {
    pub stopping_time: u64,
    pub gaussian_draws: u64,
    /// The stopped field differs from the reference at some site.
    pub error: bool,
    /// Extremal functions of the reference field drawn after stopping.
    pub missing: usize,
    /// `max_x (Z_ref - Z_stop)`.
    pub abs_deviation: f64,
    /// `max_x (Z_ref - Z_stop) / Z_stop`.
    pub rel_deviation: f64,
}

/// Runs threshold stopping at `tau_run` and records the trajectory.
pub fn threshold_trajectory<R: Rng + ?Sized>(cfg: &ThresholdConfig, rng: &mut R) -> Result<Trajectory> {
    let n = cfg.sampler.len();
    let mut rec = Recorder {
        stop_levels: Vec::new(),
        cum_gaussian: Vec::new(),
        records: vec![Vec::new(); n],
    };
    let mut src = SamplerSource {
        sampler: &cfg.sampler,
        rng,
    };
    run_core(
        n,
        cfg.tau,
        cfg.max_iterations,
        cfg.sampler.rep(),
        cfg.is_exact(),
        &mut src,
        &mut rec,
    )?;
    Ok(Trajectory {
        stop_levels: rec.stop_levels,
        cum_gaussian: rec.cum_gaussian,
        records: rec.records,
        tau_run: cfg.tau,
        exact: cfg.is_exact(),
    })
}
