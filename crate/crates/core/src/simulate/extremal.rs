use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{FieldSample, RepTag};
use crate::spectral::SpectralSampler;

use super::{RunStats, DEFAULT_MAX_ITERATIONS};

#[derive(Debug, Clone, PartialEq)]
pub struct EfConfig {
    /// Site visiting order; grid order when `None`.
    pub order: Option<Vec<usize>>,
    pub max_iterations: u64,
    /// Keep every accepted function (needed for error reconstruction).
    pub record_functions: bool,
}

impl Default for EfConfig {
    fn default() -> Self {
        Self {
            order: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            record_functions: false,
        }
    }
}

/// A function accepted by the extremal-functions algorithm: `values =
/// v / gamma` with `v ~ P_site`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalFunction {
    pub site: usize,
    pub gamma: f64,
    pub values: Vec<f64>,
}

/// Output of a run over a prefix of the visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct EfTrace {
    pub sample: FieldSample,
    pub stats: RunStats,
    /// Visiting order actually used.
    pub order: Vec<usize>,
    /// `P_k` draws consumed through each visited position.
    pub draws_through: Vec<u64>,
    /// Whether a function was accepted at each visited position.
    pub accepted: Vec<bool>,
    pub functions: Vec<ExtremalFunction>,
}

impl EfTrace {
    /// Number of functions accepted at positions `>= n` of the order.
    pub fn accepted_after(&self, n: usize) -> usize {
        self.accepted.iter().skip(n).filter(|&&a| a).count()
    }
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &k in order {
        if k >= n || seen[k] {
            return Err(Error::invalid(format!(
                "site order must list distinct indices below {n}"
            )));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Runs the extremal-functions loop over the sites `order[..positions]`.
pub fn extremal_functions_trace<R: Rng + ?Sized>(
    sampler: &SpectralSampler,
    cfg: &EfConfig,
    positions: usize,
    rng: &mut R,
) -> Result<EfTrace> {
    sampler.ensure_pk()?;
    let n = sampler.len();
    let order: Vec<usize> = match &cfg.order {
        Some(o) => {
            check_order(o, n)?;
            o.clone()
        }
        None => (0..n).collect(),
    };
    if positions == 0 || positions > order.len() {
        return Err(Error::invalid(format!(
            "number of sites must lie in 1..={}, got {positions}",
            order.len()
        )));
    }
    let mut z = vec![0.0; n];
    let mut t = 0u64;
    let mut draws_through = Vec::with_capacity(positions);
    let mut accepted = Vec::with_capacity(positions);
    let mut functions = Vec::new();
    let mut visited: Vec<usize> = Vec::with_capacity(positions);
    for &site in &order[..positions] {
        let mut gamma: f64 = rng.sample(Exp1);
        let mut hit = false;
        while 1.0 / gamma >= z[site] {
            if t >= cfg.max_iterations {
                return Err(Error::Runaway {
                    iterations: t,
                    partial: Box::new(FieldSample {
                        values: z,
                        stopping_time: t,
                        gaussian_draws: t,
                        exact: false,
                        rep: RepTag::ExtremalFunctions,
                    }),
                });
            }
            let v = sampler.sample_pk(site, rng);
            t += 1;
            // Ties count as dominated.
            if visited.iter().all(|&k| v[k] / gamma < z[k]) {
                let scaled: Vec<f64> = v.iter().map(|x| x / gamma).collect();
                for (zi, &s) in z.iter_mut().zip(&scaled) {
                    if s > *zi {
                        *zi = s;
                    }
                }
                if cfg.record_functions {
                    functions.push(ExtremalFunction {
                        site,
                        gamma,
                        values: scaled,
                    });
                }
                hit = true;
                break;
            }
            gamma += rng.sample::<f64, _>(Exp1);
        }
        visited.push(site);
        draws_through.push(t);
        accepted.push(hit);
    }
    let exact = positions == n;
    let stats = RunStats {
        stopping_time: t,
        gaussian_draws: t,
        exact,
    };
    Ok(EfTrace {
        sample: FieldSample {
            values: z,
            stopping_time: t,
            gaussian_draws: t,
            exact,
            rep: RepTag::ExtremalFunctions,
        },
        stats,
        order,
        draws_through,
        accepted,
        functions,
    })
}

/// Exact simulation on every site by the extremal-functions algorithm.
pub fn extremal_functions<R: Rng + ?Sized>(
    sampler: &SpectralSampler,
    cfg: &EfConfig,
    rng: &mut R,
) -> Result<(FieldSample, RunStats)> {
    let tr = extremal_functions_trace(sampler, cfg, sampler.len(), rng)?;
    Ok((tr.sample, tr.stats))
}

/// Extremal functions over `n` equidistant sites (both endpoints when
/// `n >= 2`): exact there, approximate elsewhere.
pub fn extremal_functions_partial<R: Rng + ?Sized>(
    sampler: &SpectralSampler,
    n: usize,
    max_iterations: u64,
    rng: &mut R,
) -> Result<(FieldSample, RunStats)> {
    let subset = sampler.grid().equidistant_subset(n)?;
    let cfg = EfConfig {
        order: Some(subset.clone()),
        max_iterations,
        record_functions: false,
    };
    let tr = extremal_functions_trace(sampler, &cfg, subset.len(), rng)?;
    Ok((tr.sample, tr.stats))
}

/// Visiting order that starts with `n` equidistant sites and continues
/// with the remaining ones in grid order.
pub fn subset_first_order(grid_len: usize, subset: &[usize]) -> Vec<usize> {
    let mut in_subset = vec![false; grid_len];
    for &k in subset {
        in_subset[k] = true;
    }
    subset
        .iter()
        .copied()
        .chain((0..grid_len).filter(|&k| !in_subset[k]))
        .collect()
}
