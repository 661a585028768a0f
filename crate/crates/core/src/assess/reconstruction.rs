//! Error of threshold stopping for unbounded Brown-Resnick representations,
//! obtained by rebuilding the relevant part of the Poisson process around an
//! exact sample.
//!
//! Given an extremal function `phi = u V`, the magnitude `u` has posterior
//! density proportional to `u^-2 p_V(phi/u) u^-N` in `u`, which in
//! `t = log u` reads `exp(-t) p_L(log phi - t)`, with `L = log V` Gaussian.
//! Completing the square gives a normal law for `t`; pinned coordinates
//! determine `t` outright.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian::{cov_from_variogram, cov_minvar, CovMatrix};
use crate::model::{ModelKind, RepTag};
use crate::simulate::{extremal_functions_trace, EfConfig};
use crate::spectral::{LogGaussian, SpectralSampler};

use super::{summarize, AssessMode, ErrorReport, RepOutcome, RepPlan};

/// Relative eigenvalue level below which a direction counts as degenerate.
const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Posterior {
    /// `t = y[idx] - mean[idx]`.
    Pinned { idx: usize, mean: f64 },
    /// `t = q'(y - m) / q'1` along a degenerate direction `q`.
    Projected { q: Vec<f64>, q1: f64, mean: Vec<f64> },
    /// `t ~ N((w'(y - m) - 1)/a, 1/a)` with `w = C^+ 1`, `a = 1'C^+ 1`.
    Normal { w: Vec<f64>, a: f64, mean: Vec<f64> },
    /// Mixture over the pinned site `s` of the shifted representation.
    Shifted { laws: Vec<LogGaussian> },
}

/// Sampler of the magnitude `u` of a spectral function `u V` given its
/// trace `phi = u V` on the grid.
#[derive(Debug, Clone)]
pub struct UPosterior {
    inner: Posterior,
}

impl UPosterior {
    /// Posterior for `V = exp(L)`, `L ~ N(mean, c)`.
    pub fn log_gaussian(c: &CovMatrix, mean: &[f64]) -> Result<Self> {
        let n = c.n();
        if mean.len() != n {
            return Err(Error::invalid("mean and covariance sizes differ"));
        }
        let diag = c.diagonal();
        let max_diag = diag.iter().copied().fold(0.0, f64::max);
        if let Some(idx) = (0..n).find(|&i| diag[i] <= 1e-14 * max_diag) {
            return Ok(Self {
                inner: Posterior::Pinned { idx, mean: mean[idx] },
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| c.get(i, j));
        let eig = SymmetricEigen::new(m);
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut w = vec![0.0; n];
        let mut best_null: Option<(f64, Vec<f64>)> = None;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let q: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let q1: f64 = q.iter().sum();
            if lam <= NULL_TOL * lmax {
                if q1.abs() > 1e-6 * (n as f64).sqrt() && best_null.as_ref().is_none_or(|b| q1.abs() > b.0.abs()) {
                    best_null = Some((q1, q));
                }
            } else {
                for i in 0..n {
                    w[i] += q[i] * q1 / lam;
                }
            }
        }
        if let Some((q1, q)) = best_null {
            return Ok(Self {
                inner: Posterior::Projected {
                    q,
                    q1,
                    mean: mean.to_vec(),
                },
            });
        }
        let a: f64 = w.iter().sum();
        if !(a > 0.0) {
            return Err(Error::numeric(format!(
                "posterior of the magnitude is improper (precision {a:e})"
            )));
        }
        Ok(Self {
            inner: Posterior::Normal {
                w,
                a,
                mean: mean.to_vec(),
            },
        })
    }

    /// Posterior matching the spectral law of a Brown-Resnick sampler with
    /// representation original, shifted or minimal-variance.
    pub fn for_sampler(sampler: &SpectralSampler) -> Result<Self> {
        if sampler.model().kind() != ModelKind::BrownResnick {
            return Err(Error::UnsupportedRepresentation(
                "magnitude posteriors need the log-Gaussian Brown-Resnick law".into(),
            ));
        }
        let grid = sampler.grid();
        let model = sampler.model();
        let half = |c: &CovMatrix| c.diagonal().iter().map(|v| -0.5 * v).collect::<Vec<_>>();
        match sampler.rep() {
            RepTag::Original => {
                let c = cov_from_variogram(grid, model, sampler.anchor().expect("Brown-Resnick anchor"))?;
                Self::log_gaussian(&c, &half(&c))
            }
            RepTag::MinVar => {
                let (c, _) = cov_minvar(grid, model)?;
                Self::log_gaussian(&c, &half(&c))
            }
            RepTag::Shifted => {
                let laws = (0..grid.len())
                    .map(|s| LogGaussian::from_cov(&cov_from_variogram(grid, model, s)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self {
                    inner: Posterior::Shifted { laws },
                })
            }
            r => Err(Error::UnsupportedRepresentation(format!(
                "no magnitude posterior for the {r} representation"
            ))),
        }
    }

    /// Draws `u` given `phi`.
    pub fn sample<R: Rng + ?Sized>(&self, phi: &[f64], rng: &mut R) -> Result<f64> {
        let y: Vec<f64> = phi.iter().map(|p| p.ln()).collect();
        let t = match &self.inner {
            Posterior::Pinned { idx, mean } => y[*idx] - mean,
            Posterior::Projected { q, q1, mean } => {
                q.iter().zip(&y).zip(mean).map(|((q, y), m)| q * (y - m)).sum::<f64>() / q1
            }
            Posterior::Normal { w, a, mean } => {
                let b: f64 = w.iter().zip(&y).zip(mean).map(|((w, y), m)| w * (y - m)).sum();
                let z: f64 = rng.sample(StandardNormal);
                (b - 1.0) / a + z / a.sqrt()
            }
            Posterior::Shifted { laws } => {
                // Component s pins t = y_s; its weight is
                // exp(-y_s) times the density of the remaining coordinates.
                let logw: Vec<f64> = laws
                    .iter()
                    .enumerate()
                    .map(|(s, law)| {
                        let x: Vec<f64> = y
                            .iter()
                            .zip(&law.drift)
                            .map(|(yi, d)| yi - y[s] - d)
                            .collect();
                        -y[s] + law.factor.log_density_active(&x)
                    })
                    .collect();
                let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !top.is_finite() {
                    return Err(Error::numeric("all shift components have zero posterior weight"));
                }
                let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut s = w.len() - 1;
                for (k, wk) in w.iter().enumerate() {
                    if u < *wk {
                        s = k;
                        break;
                    }
                    u -= wk;
                }
                y[s]
            }
        };
        if !t.is_finite() {
            return Err(Error::numeric(format!("non-finite magnitude posterior draw for phi = {phi:?}")));
        }
        Ok(t.exp())
    }
}

struct Point {
    u: f64,
    values: Vec<f64>,
    extremal: bool,
}

/// Error of threshold stopping at `tau` for an unbounded Brown-Resnick
/// representation, from exact samples and their reconstructed Poisson
/// points.
///
/// Per replication: an exact sample with its extremal functions; the
/// magnitude of each extremal function drawn from its posterior; the
/// non-extremal points above the smallest magnitude drawn from the
/// thinned Poisson process; then threshold stopping replayed on the merged
/// points.
pub fn assess_reconstruction(
    sampler: &SpectralSampler,
    tau: f64,
    eps: &[f64],
    plan: &RepPlan,
) -> Result<ErrorReport> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let posterior = UPosterior::for_sampler(sampler)?;
    sampler.ensure_pk()?;
    let n = sampler.len();
    let ef_cfg = EfConfig {
        record_functions: true,
        ..EfConfig::default()
    };
    let outcomes = plan.run(|rng| {
        let tr = extremal_functions_trace(sampler, &ef_cfg, n, rng)?;
        let z = tr.sample.values;
        let mut points = Vec::with_capacity(tr.functions.len());
        for f in &tr.functions {
            let u = posterior.sample(&f.values, rng)?;
            points.push(Point {
                u,
                values: f.values.clone(),
                extremal: true,
            });
        }
        let u_min = points.iter().map(|p| p.u).fold(f64::INFINITY, f64::min);
        let count = Poisson::new(1.0 / u_min)
            .map_err(|e| Error::numeric(format!("Poisson mean {}: {e}", 1.0 / u_min)))?
            .sample(rng) as u64;
        for _ in 0..count {
            let u = u_min / (1.0 - rng.random::<f64>());
            let d = sampler.sample(rng);
            let values: Vec<f64> = d.values.iter().map(|v| u * v).collect();
            if values.iter().zip(&z).all(|(a, b)| a < b) {
                points.push(Point {
                    u,
                    values,
                    extremal: false,
                });
            }
        }
        points.sort_by(|a, b| b.u.partial_cmp(&a.u).expect("finite magnitudes"));
        replay(&points, &z, tau, sampler, u_min, rng)
    })?;
    let mut report = summarize(AssessMode::Reconstruction, sampler.rep(), tau, eps, &outcomes);
    report.mean_nw = report.mean_t;
    Ok(report)
}

/// Threshold stopping on the merged points; past the last reconstructed
/// point the process continues with fresh thinned points below `u_min`.
fn replay<R: Rng + ?Sized>(
    points: &[Point],
    z_exact: &[f64],
    tau: f64,
    sampler: &SpectralSampler,
    u_min: f64,
    rng: &mut R,
) -> Result<RepOutcome> {
    let n = z_exact.len();
    let mut z = vec![0.0; n];
    let min_of = |z: &[f64]| z.iter().copied().fold(f64::INFINITY, f64::min);
    for (j, p) in points.iter().enumerate() {
        for (zi, v) in z.iter_mut().zip(&p.values) {
            if *v > *zi {
                *zi = *v;
            }
        }
        if let Some(next) = points.get(j + 1) {
            if tau * next.u < min_of(&z) {
                let missing = points[j + 1..].iter().filter(|q| q.extremal).count();
                let mut abs = 0.0f64;
                let mut rel = 0.0f64;
                for (a, e) in z.iter().zip(z_exact) {
                    abs = abs.max(e - a);
                    rel = rel.max((e - a) / a);
                }
                let t = (j + 1) as u64;
                return Ok(RepOutcome {
                    error: missing > 0,
                    missing,
                    abs_dev: abs,
                    rel_dev: rel,
                    t,
                    nw: t,
                });
            }
        }
    }
    // Every extremal function is in; count the remaining draws to stop.
    let mut t = points.len() as u64;
    let floor = min_of(&z);
    let mut gamma = 1.0 / u_min;
    loop {
        gamma += rng.sample::<f64, _>(rand_distr::Exp1);
        if tau / gamma < floor {
            break;
        }
        // Points there exist only where dominated by the exact field.
        let v = sampler.sample(rng).values;
        if v.iter().zip(z_exact).all(|(v, e)| v / gamma < *e) {
            t += 1;
        }
    }
    Ok(RepOutcome {
        error: false,
        missing: 0,
        abs_dev: 0.0,
        rel_dev: 0.0,
        t,
        nw: t,
    })
}
