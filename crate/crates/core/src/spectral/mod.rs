//! Spectral-process samplers.
//!
//! A [`SpectralSampler`] emits nonnegative vectors `v` on the grid with
//! `E v(x) = 1` at every site. Every emitted vector is accounted for in
//! Gaussian field draws, the cost unit of the simulation algorithms.

mod brown_resnick;
mod extremal_t;

use std::sync::Arc;

use rand::Rng;

pub use brown_resnick::LogGaussian;
pub(crate) use brown_resnick::BrEngine;
pub use extremal_t::extremal_t_constant;
use extremal_t::EtEngine;

use crate::error::{Error, Result};
use crate::gaussian::MinVarKind;
use crate::grid::Grid;
use crate::model::{ModelSpec, RepTag};
use crate::rng::{RngStream, StreamPurpose};
use crate::stats::{mean_se, Estimate};

/// Default memory budget for per-anchor factor caches.
pub const DEFAULT_CACHE_BUDGET: usize = 512 << 20;

/// Default number of proposals behind the pilot estimate of `theta`.
pub const DEFAULT_THETA_PILOT: usize = 20_000;

/// One spectral draw plus its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDraw {
    pub values: Vec<f64>,
    pub gaussian_draws: u64,
    /// Sum-normalized proposals consumed (rejection sampler only, else 0).
    pub proposals: u64,
}

/// Sup-norm extremal coefficient estimate used to rescale sup-normalized
/// draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub value: f64,
    pub se: f64,
    pub reps: usize,
    /// Supplied by the user rather than estimated.
    pub overridden: bool,
}

impl ThetaEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            se: self.se,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSource {
    /// Pilot run of sum-normalized draws on a dedicated stream.
    Pilot { reps: usize, seed: u64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOptions {
    pub cache_budget_bytes: usize,
    pub theta: ThetaSource,
    /// Anchor of the original representation; defaults to the grid point
    /// nearest the origin.
    pub anchor: Option<usize>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            cache_budget_bytes: DEFAULT_CACHE_BUDGET,
            theta: ThetaSource::Pilot {
                reps: DEFAULT_THETA_PILOT,
                seed: 0,
            },
            anchor: None,
        }
    }
}

#[derive(Debug)]
pub(crate) enum Engine {
    Br(BrEngine),
    Et(EtEngine),
}

/// Configured generator of spectral draws for one representation.
///
/// Cloning is cheap; clones and [`SpectralSampler::with_rep`] share the
/// precomputed factors.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    rep: RepTag,
    engine: Arc<Engine>,
    theta: Option<ThetaEstimate>,
}

const VALIDATED: &str = "representation validated at construction";

impl SpectralSampler {
    pub fn new(model: ModelSpec, grid: Grid, rep: RepTag) -> Result<Self> {
        Self::with_options(model, grid, rep, &SamplerOptions::default())
    }

    pub fn with_options(model: ModelSpec, grid: Grid, rep: RepTag, opts: &SamplerOptions) -> Result<Self> {
        let engine = match model {
            ModelSpec::BrownResnick { .. } => {
                let mut e = BrEngine::new(grid, model, opts.cache_budget_bytes);
                if let Some(a) = opts.anchor {
                    if a >= e.grid.len() {
                        return Err(Error::invalid(format!(
                            "anchor {a} out of range for {} points",
                            e.grid.len()
                        )));
                    }
                    e.anchor = a;
                }
                Engine::Br(e)
            }
            ModelSpec::ExtremalT { .. } => Engine::Et(EtEngine::new(grid, model)?),
        };
        let base = Self {
            rep: RepTag::SumNorm,
            engine: Arc::new(engine),
            theta: None,
        };
        base.with_rep_options(rep, opts)
    }

    /// Same model, grid and factors, different representation.
    pub fn with_rep(&self, rep: RepTag) -> Result<Self> {
        self.with_rep_options(rep, &SamplerOptions::default())
    }

    pub fn with_rep_options(&self, rep: RepTag, opts: &SamplerOptions) -> Result<Self> {
        let n = self.len();
        let rep = match (&*self.engine, rep) {
            (Engine::Et(_), RepTag::Pk(k)) => RepTag::ExtremalTPk(k),
            (_, r) => r,
        };
        match (&*self.engine, rep) {
            (Engine::Br(e), RepTag::Original) => {
                e.original()?;
            }
            (Engine::Br(e), RepTag::MinVar) => {
                e.minvar()?;
            }
            (Engine::Br(_), RepTag::Shifted | RepTag::SumNorm | RepTag::SupNorm)
            | (Engine::Et(_), RepTag::SumNorm | RepTag::SupNorm) => self.ensure_pk()?,
            (Engine::Br(_), RepTag::Pk(k)) | (Engine::Et(_), RepTag::ExtremalTPk(k)) => {
                if k >= n {
                    return Err(Error::invalid(format!("site {k} out of range for {n} points")));
                }
                self.ensure_pk()?;
            }
            (Engine::Et(e), RepTag::ExtremalT) => {
                e.corr_factor()?;
            }
            (_, r) => {
                return Err(Error::UnsupportedRepresentation(format!(
                    "{r} is not available for {}",
                    self.model()
                )))
            }
        }
        let mut out = Self {
            rep,
            engine: Arc::clone(&self.engine),
            theta: None,
        };
        if rep == RepTag::SupNorm {
            out.theta = Some(match opts.theta {
                ThetaSource::Fixed(t) => {
                    if !(t >= 1.0 && t <= n as f64) {
                        return Err(Error::invalid(format!("theta must lie in [1, {n}], got {t}")));
                    }
                    ThetaEstimate {
                        value: t,
                        se: 0.0,
                        reps: 0,
                        overridden: true,
                    }
                }
                ThetaSource::Pilot { reps, seed } => {
                    let mut rng = RngStream::for_replication(seed, StreamPurpose::ThetaPilot, 0);
                    theta_from_sumnorm(&out, reps, &mut rng)?
                }
            });
        }
        Ok(out)
    }

    pub fn rep(&self) -> RepTag {
        self.rep
    }

    pub fn len(&self) -> usize {
        self.grid().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> &Grid {
        match &*self.engine {
            Engine::Br(e) => &e.grid,
            Engine::Et(e) => &e.grid,
        }
    }

    pub fn model(&self) -> &ModelSpec {
        match &*self.engine {
            Engine::Br(e) => &e.model,
            Engine::Et(e) => &e.model,
        }
    }

    /// Index of the pinned site of the original representation.
    pub fn anchor(&self) -> Option<usize> {
        match &*self.engine {
            Engine::Br(e) => Some(e.anchor),
            Engine::Et(_) => None,
        }
    }

    pub fn theta(&self) -> Option<ThetaEstimate> {
        self.theta
    }

    /// Almost-sure bound on `sup v`, when the representation has one.
    pub fn bound(&self) -> Option<f64> {
        match self.rep {
            RepTag::SumNorm => Some(self.len() as f64),
            RepTag::SupNorm => self.theta.map(|t| t.value),
            _ => None,
        }
    }

    /// Whether the minimal-variance covariance is provably minimal (only
    /// meaningful for the minimal-variance representation).
    pub fn minvar_kind(&self) -> Option<MinVarKind> {
        match (&*self.engine, self.rep) {
            (Engine::Br(e), RepTag::MinVar) => e.minvar().ok().map(|m| m.1),
            _ => None,
        }
    }

    pub(crate) fn br_engine(&self) -> Option<&BrEngine> {
        match &*self.engine {
            Engine::Br(e) => Some(e),
            Engine::Et(_) => None,
        }
    }

    /// Prepares the laws `P_k` used by the extremal-functions algorithm.
    pub fn ensure_pk(&self) -> Result<()> {
        match &*self.engine {
            Engine::Br(e) => e.shift().map(|_| ()),
            Engine::Et(e) => e.corr_factor().map(|_| ()),
        }
    }

    /// One draw from the configured representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpectralDraw {
        let one = |values| SpectralDraw {
            values,
            gaussian_draws: 1,
            proposals: 0,
        };
        match self.rep {
            RepTag::Original => one(self.sample_original(rng)),
            RepTag::MinVar => one(self.sample_minvar(rng)),
            RepTag::Shifted => {
                let k = rng.random_range(0..self.len());
                one(self.sample_pk(k, rng))
            }
            RepTag::SumNorm => one(self.sample_sumnorm(rng)),
            RepTag::SupNorm => {
                let (values, proposals) = self.sample_supnorm_rejection(rng);
                SpectralDraw {
                    values,
                    gaussian_draws: proposals,
                    proposals,
                }
            }
            RepTag::Pk(k) | RepTag::ExtremalTPk(k) => one(self.sample_pk(k, rng)),
            RepTag::ExtremalT => one(self.sample_extremal_t(rng)),
            RepTag::ExtremalFunctions => unreachable!("rejected at construction"),
        }
    }

    /// `exp(W(x) - sigma^2(x)/2)` with `W` pinned to zero at the anchor.
    pub fn sample_original<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let e = self.br_engine().expect("Brown-Resnick model");
        e.original().expect(VALIDATED).sample(rng)
    }

    pub fn sample_minvar<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let e = self.br_engine().expect("Brown-Resnick model");
        e.minvar().expect(VALIDATED).0.sample(rng)
    }

    pub fn sample_extremal_t<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let Engine::Et(e) = &*self.engine else {
            panic!("extremal-t model required");
        };
        e.sample_direct(&e.corr_factor().expect(VALIDATED), rng)
    }

    /// Draw from `P_k`, the law of the spectral process seen from site `k`;
    /// `v(x_k) = 1` exactly. Costs one Gaussian field draw.
    ///
    /// Panics unless [`SpectralSampler::ensure_pk`] succeeded.
    pub fn sample_pk<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        match &*self.engine {
            Engine::Br(e) => e
                .shift()
                .expect("P_k laws unavailable; call ensure_pk first")
                .sample_pk(e.grid.len(), k, rng),
            Engine::Et(e) => e.sample_pk(
                &e.corr_factor().expect("P_k laws unavailable; call ensure_pk first"),
                k,
                rng,
            ),
        }
    }

    /// `N y / |y|_1` with `y ~ P_k`, `k` uniform.
    pub fn sample_sumnorm<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.len();
        let k = rng.random_range(0..n);
        let mut y = self.sample_pk(k, rng);
        let scale = n as f64 / y.iter().sum::<f64>();
        for v in &mut y {
            *v *= scale;
        }
        y
    }

    /// Rejection sampler for the sup-normalized process. Returns the draw,
    /// rescaled so that its maximum is `theta`, and the number of
    /// sum-normalized proposals consumed.
    pub fn sample_supnorm_rejection<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, u64) {
        let theta = self
            .theta
            .expect("sup-normalized sampler carries a theta estimate")
            .value;
        let (mut v, m, argmax, proposals) = self.propose_until_accepted(rng);
        let scale = theta / m;
        for x in &mut v {
            *x *= scale;
        }
        v[argmax] = theta;
        (v, proposals)
    }

    /// Pareto process: `P v / theta` with `v` sup-normalized and `P`
    /// standard Pareto, so that `max = P` exactly.
    pub fn sample_pareto<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, u64)> {
        if self.rep != RepTag::SupNorm {
            return Err(Error::UnsupportedRepresentation(
                "Pareto draws need the sup-normalized sampler".into(),
            ));
        }
        let (mut v, m, argmax, proposals) = self.propose_until_accepted(rng);
        let p = 1.0 / (1.0 - rng.random::<f64>());
        let scale = p / m;
        for x in &mut v {
            *x *= scale;
        }
        v[argmax] = p;
        Ok((v, proposals))
    }

    fn propose_until_accepted<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64, usize, u64) {
        let n = self.len() as f64;
        let mut proposals = 0;
        loop {
            let v = self.sample_sumnorm(rng);
            proposals += 1;
            let (argmax, m) = argmax(&v);
            if rng.random::<f64>() * n < m {
                return (v, m, argmax, proposals);
            }
        }
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

fn theta_from_sumnorm<R: Rng + ?Sized>(sampler: &SpectralSampler, reps: usize, rng: &mut R) -> Result<ThetaEstimate> {
    if reps < 2 {
        return Err(Error::invalid(format!("theta estimation needs >= 2 draws, got {reps}")));
    }
    let n = sampler.len();
    let maxima: Vec<f64> = (0..reps).map(|_| argmax(&sampler.sample_sumnorm(rng)).1).collect();
    let est = mean_se(&maxima);
    // Sum-normalized draws satisfy 1 <= max <= N, so the mean does as well.
    debug_assert!(est.value >= 1.0 - 3.0 * est.se - 1e-12 && est.value <= n as f64 + 3.0 * est.se + 1e-9);
    Ok(ThetaEstimate {
        value: est.value.clamp(1.0, n as f64),
        se: est.se,
        reps,
        overridden: false,
    })
}

/// Monte Carlo estimate of `theta = E max_i V(x_i)` from `reps`
/// sum-normalized draws.
pub fn estimate_theta_sup(model: ModelSpec, grid: Grid, reps: usize, seed: u64) -> Result<ThetaEstimate> {
    let sampler = SpectralSampler::new(model, grid, RepTag::SumNorm)?;
    let mut rng = RngStream::for_replication(seed, StreamPurpose::ThetaPilot, 0);
    theta_from_sumnorm(&sampler, reps, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid_1d;

    fn br_sampler(n: usize, rep: RepTag) -> SpectralSampler {
        let g = make_grid_1d(-1.0, 1.0, n).unwrap();
        SpectralSampler::new(ModelSpec::brown_resnick(1.0, 1.0).unwrap(), g, rep).unwrap()
    }

    #[test]
    fn sumnorm_sums_to_n() {
        let s = br_sampler(101, RepTag::SumNorm);
        let mut rng = RngStream::new(1, 0);
        for _ in 0..200 {
            let v = s.sample(&mut rng).values;
            let sum: f64 = v.iter().sum();
            assert!((sum / 101.0 - 1.0).abs() < 1e-9);
            assert!(v.iter().all(|&x| (0.0..=101.0).contains(&x)));
        }
    }

    #[test]
    fn pk_is_pinned() {
        let s = br_sampler(21, RepTag::SumNorm);
        let mut rng = RngStream::new(2, 0);
        for k in 0..21 {
            assert_eq!(s.sample_pk(k, &mut rng)[k], 1.0);
        }
        let et = SpectralSampler::new(
            ModelSpec::extremal_t(2.0, 0.5).unwrap(),
            make_grid_1d(-1.0, 1.0, 21).unwrap(),
            RepTag::SumNorm,
        )
        .unwrap();
        for k in 0..21 {
            assert_eq!(et.sample_pk(k, &mut rng)[k], 1.0);
        }
    }

    #[test]
    fn original_is_one_at_anchor() {
        let s = br_sampler(11, RepTag::Original);
        assert_eq!(s.anchor(), Some(5));
        let mut rng = RngStream::new(3, 0);
        for _ in 0..50 {
            assert_eq!(s.sample(&mut rng).values[5], 1.0);
        }
    }

    #[test]
    fn supnorm_max_is_theta() {
        let s = br_sampler(31, RepTag::SupNorm);
        let theta = s.theta().unwrap().value;
        let mut rng = RngStream::new(4, 0);
        for _ in 0..100 {
            let d = s.sample(&mut rng);
            let m = d.values.iter().copied().fold(0.0, f64::max);
            assert!((m / theta - 1.0).abs() < 1e-9);
            assert_eq!(d.gaussian_draws, d.proposals);
            assert!(d.proposals >= 1);
        }
    }

    #[test]
    fn single_site_cases() {
        let g = make_grid_1d(0.0, 1.0, 1).unwrap();
        let m = ModelSpec::brown_resnick(1.0, 1.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        for rep in [RepTag::Original, RepTag::Shifted, RepTag::MinVar, RepTag::SumNorm, RepTag::SupNorm] {
            let s = SpectralSampler::new(m, g.clone(), rep).unwrap();
            let d = s.sample(&mut rng);
            assert_eq!(d.values.len(), 1);
            if rep != RepTag::MinVar {
                assert_eq!(d.values[0], 1.0, "{rep}");
            }
            if rep == RepTag::SupNorm {
                assert_eq!(d.proposals, 1);
                assert_eq!(s.theta().unwrap().value, 1.0);
            }
        }
        let s = SpectralSampler::new(m, g, RepTag::SupNorm).unwrap();
        let (p, _) = s.sample_pareto(&mut rng).unwrap();
        assert!(p[0] >= 1.0);
    }

    #[test]
    fn fully_dependent_stub() {
        let g = make_grid_1d(-1.0, 1.0, 9).unwrap();
        let m = ModelSpec::brown_resnick(1.0, f64::INFINITY).unwrap();
        let mut rng = RngStream::new(6, 0);
        let s = SpectralSampler::new(m, g.clone(), RepTag::Original).unwrap();
        assert!(s.sample(&mut rng).values.iter().all(|&v| v == 1.0));
        let t = estimate_theta_sup(m, g, 100, 1).unwrap();
        assert!((t.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_reps() {
        let g = make_grid_1d(-1.0, 1.0, 5).unwrap();
        let br = ModelSpec::brown_resnick(1.0, 1.0).unwrap();
        let et = ModelSpec::extremal_t(1.0, 1.0).unwrap();
        assert!(SpectralSampler::new(br, g.clone(), RepTag::ExtremalT).is_err());
        assert!(SpectralSampler::new(et, g.clone(), RepTag::Original).is_err());
        assert!(SpectralSampler::new(br, g.clone(), RepTag::Pk(5)).is_err());
        assert!(SpectralSampler::new(br, g, RepTag::ExtremalFunctions).is_err());
    }

    #[test]
    fn shifted_needs_budget_off_lattice() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sqrt()]).collect();
        let g = Grid::from_points(&pts).unwrap();
        let m = ModelSpec::brown_resnick(1.0, 1.0).unwrap();
        let opts = SamplerOptions {
            cache_budget_bytes: 100,
            ..SamplerOptions::default()
        };
        assert!(matches!(
            SpectralSampler::with_options(m, g.clone(), RepTag::Shifted, &opts),
            Err(Error::UnsupportedRepresentation(_))
        ));
        let s = SpectralSampler::new(m, g, RepTag::Shifted).unwrap();
        let mut rng = RngStream::new(7, 0);
        assert_eq!(s.sample_pk(3, &mut rng)[3], 1.0);
    }

    #[test]
    fn draws_are_reproducible() {
        let s = br_sampler(51, RepTag::SupNorm);
        let a = s.sample(&mut RngStream::new(9, 4));
        let b = s.sample(&mut RngStream::new(9, 4));
        assert_eq!(a, b);
    }
}
