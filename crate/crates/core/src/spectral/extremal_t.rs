//! Spectral processes of extremal-t fields.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gaussian::{corr_matrix, factorize, CholFactor};
use crate::grid::Grid;
use crate::model::ModelSpec;

/// `c_nu = sqrt(pi) 2^(1 - nu/2) / Gamma((nu + 1)/2)`, so that
/// `E[c_nu max(W, 0)^nu] = 1` for standard normal `W`.
pub fn extremal_t_constant(nu: f64) -> f64 {
    std::f64::consts::PI.sqrt() * 2f64.powf(1.0 - 0.5 * nu) / gamma(0.5 * (nu + 1.0))
}

#[derive(Debug)]
pub(crate) struct EtEngine {
    pub grid: Grid,
    pub model: ModelSpec,
    pub nu: f64,
    pub c_nu: f64,
    chi: ChiSquared<f64>,
    corr: OnceLock<Result<Arc<CholFactor>>>,
}

impl EtEngine {
    pub fn new(grid: Grid, model: ModelSpec) -> Result<Self> {
        let ModelSpec::ExtremalT { nu, .. } = model else {
            return Err(Error::invalid("extremal-t engine needs an extremal-t model"));
        };
        let chi = ChiSquared::new(nu + 1.0)
            .map_err(|e| Error::invalid(format!("chi-square law with {} df: {e}", nu + 1.0)))?;
        Ok(Self {
            grid,
            model,
            nu,
            c_nu: extremal_t_constant(nu),
            chi,
            corr: OnceLock::new(),
        })
    }

    pub fn corr_factor(&self) -> Result<Arc<CholFactor>> {
        self.corr
            .get_or_init(|| Ok(Arc::new(factorize(&corr_matrix(&self.grid, &self.model)?)?)))
            .clone()
    }

    /// `c_nu max(W, 0)^nu` with `W` the standard Gaussian field.
    pub fn sample_direct<R: Rng + ?Sized>(&self, factor: &CholFactor, rng: &mut R) -> Vec<f64> {
        factor
            .sample(rng)
            .into_iter()
            .map(|w| if w > 0.0 { self.c_nu * w.powf(self.nu) } else { 0.0 })
            .collect()
    }

    /// Law `P_k`: `max(T, 0)^nu` with `T` Student-t (`nu + 1` df), location
    /// `rho_k` and scale `(Sigma - rho_k rho_k') / (nu + 1)`.
    ///
    /// `G - rho_k G_k` has covariance `Sigma - rho_k rho_k'` when `G` has
    /// covariance `Sigma`, so one factor of `Sigma` serves every `k`.
    pub fn sample_pk<R: Rng + ?Sized>(&self, factor: &CholFactor, k: usize, rng: &mut R) -> Vec<f64> {
        let g = factor.sample(rng);
        let chi2 = self.chi.sample(rng);
        let inv = 1.0 / chi2.sqrt();
        let gk = g[k];
        (0..g.len())
            .map(|i| {
                if i == k {
                    return 1.0;
                }
                let rho = self.model.correlation(self.grid.distance(i, k));
                let t = rho + (g[i] - rho * gk) * inv;
                if t > 0.0 {
                    t.powf(self.nu)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert!((extremal_t_constant(1.0) - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((extremal_t_constant(2.0) - 2.0).abs() < 1e-12);
    }
}
