//! Log-Gaussian spectral processes of Brown-Resnick fields.

use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussian::{cov_from_variogram, cov_minvar, factorize, CholFactor, CovMatrix, MinVarKind};
use crate::grid::{Grid, LatticeMeta};
use crate::model::ModelSpec;

/// `exp(W(x) + drift(x))` with `W ~ N(0, C)` and `drift = -diag(C)/2`.
#[derive(Debug, Clone)]
pub struct LogGaussian {
    pub factor: CholFactor,
    pub drift: Vec<f64>,
}

impl LogGaussian {
    pub fn from_cov(c: &CovMatrix) -> Result<Self> {
        let factor = factorize(c)?;
        let drift = c.diagonal().iter().map(|v| -0.5 * v).collect();
        Ok(Self { factor, drift })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let w = self.factor.sample(rng);
        w.iter().zip(&self.drift).map(|(w, d)| (w + d).exp()).collect()
    }
}

/// Source of the shifted field `W_orig(x - x_k)`, i.e. of the laws `P_k`.
#[derive(Debug)]
pub(crate) enum ShiftEngine {
    /// One factor on the difference lattice, lag zero pinned.
    Lattice {
        factor: CholFactor,
        /// `-gamma(lag)/2` per difference-lattice index.
        drift: Vec<f64>,
        grid_meta: LatticeMeta,
        diff_counts: Vec<usize>,
        /// Active rows needed to cover every lag seen from anchor `k`.
        rows_needed: Vec<usize>,
    },
    /// One anchored factor per grid point (non-lattice grids).
    PerAnchor(Vec<LogGaussian>),
}

impl ShiftEngine {
    fn lag_index(grid_meta: &LatticeMeta, diff_counts: &[usize], i: usize, k: usize) -> usize {
        let mi = grid_meta.multi_index(i);
        let mk = grid_meta.multi_index(k);
        let mut idx = 0;
        for a in 0..mi.len() {
            let off = mi[a] + grid_meta.counts[a] - 1 - mk[a];
            idx = idx * diff_counts[a] + off;
        }
        idx
    }

    pub(crate) fn sample_pk<R: Rng + ?Sized>(&self, n: usize, k: usize, rng: &mut R) -> Vec<f64> {
        match self {
            ShiftEngine::Lattice {
                factor,
                drift,
                grid_meta,
                diff_counts,
                rows_needed,
                ..
            } => {
                let mut buf = vec![0.0; factor.n()];
                factor.sample_rows(rng, rows_needed[k], &mut buf);
                (0..n)
                    .map(|i| {
                        let idx = Self::lag_index(grid_meta, diff_counts, i, k);
                        (buf[idx] + drift[idx]).exp()
                    })
                    .collect()
            }
            ShiftEngine::PerAnchor(fields) => fields[k].sample(rng),
        }
    }
}

#[derive(Debug)]
pub(crate) struct BrEngine {
    pub grid: Grid,
    pub model: ModelSpec,
    pub anchor: usize,
    budget_bytes: usize,
    orig: OnceLock<Result<Arc<LogGaussian>>>,
    minvar: OnceLock<Result<Arc<(LogGaussian, MinVarKind)>>>,
    shift: OnceLock<Result<Arc<ShiftEngine>>>,
}

impl BrEngine {
    pub fn new(grid: Grid, model: ModelSpec, budget_bytes: usize) -> Self {
        let anchor = grid.nearest_to_origin();
        Self {
            grid,
            model,
            anchor,
            budget_bytes,
            orig: OnceLock::new(),
            minvar: OnceLock::new(),
            shift: OnceLock::new(),
        }
    }

    pub fn original(&self) -> Result<Arc<LogGaussian>> {
        self.orig
            .get_or_init(|| {
                let c = cov_from_variogram(&self.grid, &self.model, self.anchor)?;
                Ok(Arc::new(LogGaussian::from_cov(&c)?))
            })
            .clone()
    }

    pub fn minvar(&self) -> Result<Arc<(LogGaussian, MinVarKind)>> {
        self.minvar
            .get_or_init(|| {
                let (c, kind) = cov_minvar(&self.grid, &self.model)?;
                Ok(Arc::new((LogGaussian::from_cov(&c)?, kind)))
            })
            .clone()
    }

    pub fn shift(&self) -> Result<Arc<ShiftEngine>> {
        self.shift.get_or_init(|| self.build_shift().map(Arc::new)).clone()
    }

    fn build_shift(&self) -> Result<ShiftEngine> {
        let n = self.grid.len();
        if let Some(meta) = self.grid.lattice_meta() {
            let diff = meta.difference_lattice();
            let diff_grid = Grid::lattice(&diff.origin, &diff.step, &diff.counts)?;
            let zero = diff.len() / 2;
            debug_assert!(diff_grid.point(zero).iter().all(|&c| c.abs() < 1e-12));
            let c = cov_from_variogram(&diff_grid, &self.model, zero)?;
            let factor = factorize(&c)?;
            let drift = c.diagonal().iter().map(|v| -0.5 * v).collect();
            let mut active_pos = vec![None; diff.len()];
            for (r, &idx) in factor.active().iter().enumerate() {
                active_pos[idx] = Some(r);
            }
            let mut rows_needed = Vec::with_capacity(n);
            for k in 0..n {
                let rows = (0..n)
                    .filter_map(|i| active_pos[ShiftEngine::lag_index(meta, &diff.counts, i, k)])
                    .max()
                    .map_or(0, |r| r + 1);
                rows_needed.push(rows);
            }
            Ok(ShiftEngine::Lattice {
                factor,
                drift,
                grid_meta: meta.clone(),
                diff_counts: diff.counts,
                rows_needed,
            })
        } else {
            let bytes = n.saturating_mul(n).saturating_mul(n).saturating_mul(8);
            if bytes > self.budget_bytes {
                return Err(Error::UnsupportedRepresentation(format!(
                    "shifted fields on a non-lattice grid of {n} points need {bytes} bytes of \
                     per-anchor factors, above the {} byte budget",
                    self.budget_bytes
                )));
            }
            let fields = (0..n)
                .map(|k| LogGaussian::from_cov(&cov_from_variogram(&self.grid, &self.model, k)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(ShiftEngine::PerAnchor(fields))
        }
    }
}
