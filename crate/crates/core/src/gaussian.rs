//! Covariance construction, Cholesky factorization and centered Gaussian
//! draws on a grid.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{dist, Grid};
use crate::model::ModelSpec;

/// Diagonal entries at or below this fraction of the largest one are treated
/// as exactly degenerate and pinned to zero.
const ZERO_VARIANCE_TOL: f64 = 1e-14;
const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric covariance matrix on a grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    n: usize,
    entries: Vec<f64>,
    /// Grid index pinned to zero variance, if any.
    pub anchor: Option<usize>,
}

impl CovMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let c = f(i, j);
                entries[i * n + j] = c;
                entries[j * n + i] = c;
            }
        }
        Self {
            n,
            entries,
            anchor: None,
        }
    }

    /// Builds from a row-major buffer; symmetry is checked.
    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid("covariance buffer has the wrong length"));
        }
        let m = Self {
            n,
            entries,
            anchor: None,
        };
        if m.asymmetry() > SYMMETRY_TOL {
            return Err(Error::invalid(format!(
                "covariance is not symmetric (max deviation {:e})",
                m.asymmetry()
            )));
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.entries
    }
}

/// How a minimal-variance covariance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinVarKind {
    /// Closed-form stationary covariance (d = 1, alpha <= 1). Minimal.
    ClosedForm,
    /// Vertex-average transform with alpha >= 1. Minimal.
    VertexAverage,
    /// Vertex-average transform for d >= 2 and alpha < 1: a variance
    /// reducing surrogate, not known to be minimal.
    VertexAverageSurrogate,
}

impl MinVarKind {
    pub fn is_minimal(self) -> bool {
        !matches!(self, MinVarKind::VertexAverageSurrogate)
    }
}

fn require_br(model: &ModelSpec) -> Result<()> {
    match model {
        ModelSpec::BrownResnick { .. } => Ok(()),
        ModelSpec::ExtremalT { .. } => Err(Error::invalid(
            "variogram covariance requires a Brown-Resnick model",
        )),
    }
}

/// Covariance of the Gaussian field with variogram `gamma` pinned to zero at
/// `anchor`: `C(x, y) = (gamma(x - x_o) + gamma(y - x_o) - gamma(x - y)) / 2`.
pub fn cov_from_variogram(grid: &Grid, model: &ModelSpec, anchor: usize) -> Result<CovMatrix> {
    require_br(model)?;
    if anchor >= grid.len() {
        return Err(Error::invalid(format!(
            "anchor {anchor} out of range for a grid of {} points",
            grid.len()
        )));
    }
    let o = grid.point(anchor);
    let g_o: Vec<f64> = grid.points().map(|p| model.variogram(dist(p, o))).collect();
    let mut c = CovMatrix::from_fn(grid.len(), |i, j| {
        0.5 * (g_o[i] + g_o[j] - model.variogram(grid.distance(i, j)))
    });
    c.anchor = Some(anchor);
    Ok(c)
}

/// `Gamma((2 - alpha)/2) Gamma((1 + alpha)/2) / Gamma(1/2)`.
pub(crate) fn minvar_constant(alpha: f64) -> f64 {
    gamma((2.0 - alpha) / 2.0) * gamma((1.0 + alpha) / 2.0) / gamma(0.5)
}

/// Covariance with reduced (minimal, where known) maximal variance over the
/// grid's bounding box `[c - R, c + R]`, for the same variogram.
///
/// For `d = 1`, `alpha <= 1` this is the stationary closed form
/// `C(x, y) = (k_alpha * gamma(R) - gamma(x - y)) / 2`, with
/// `k_alpha = Gamma((2-alpha)/2) Gamma((1+alpha)/2) / Gamma(1/2)`. Otherwise
/// the field `W(x) - 2^-d sum_v W(v)` over the box vertices `v` is used.
pub fn cov_minvar(grid: &Grid, model: &ModelSpec) -> Result<(CovMatrix, MinVarKind)> {
    require_br(model)?;
    let alpha = model.shape();
    let (lo, hi) = grid.bounding_box();
    let d = grid.dim();
    if d == 1 && alpha <= 1.0 {
        let half_width = 0.5 * (hi[0] - lo[0]);
        let level = minvar_constant(alpha) * model.variogram(half_width);
        let c = CovMatrix::from_fn(grid.len(), |i, j| {
            0.5 * (level - model.variogram(grid.distance(i, j)))
        });
        return Ok((c, MinVarKind::ClosedForm));
    }
    let vertices = box_vertices(&lo, &hi);
    let kind = if alpha >= 1.0 {
        MinVarKind::VertexAverage
    } else {
        MinVarKind::VertexAverageSurrogate
    };
    Ok((vertex_average_cov(grid, model, &vertices), kind))
}

fn box_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    (0..1usize << d)
        .map(|mask| {
            (0..d)
                .map(|a| if mask >> a & 1 == 1 { hi[a] } else { lo[a] })
                .collect()
        })
        .collect()
}

/// Covariance of `W(x) - mean_v W(v)`. Both sides are zero-sum combinations
/// of an intrinsic field, so the covariance is `-1/2 sum a_i b_j gamma(p_i - q_j)`.
fn vertex_average_cov(grid: &Grid, model: &ModelSpec, vertices: &[Vec<f64>]) -> CovMatrix {
    let m = vertices.len() as f64;
    let to_vertices: Vec<f64> = grid
        .points()
        .map(|p| vertices.iter().map(|v| model.variogram(dist(p, v))).sum::<f64>() / m)
        .collect();
    let among_vertices: f64 = vertices
        .iter()
        .flat_map(|v| vertices.iter().map(move |w| (v, w)))
        .map(|(v, w)| model.variogram(dist(v, w)))
        .sum::<f64>()
        / (m * m);
    CovMatrix::from_fn(grid.len(), |i, j| {
        0.5 * (to_vertices[i] + to_vertices[j] - model.variogram(grid.distance(i, j)) - among_vertices)
    })
}

/// Exponential correlation matrix `exp(-|x - y| / s)` (extremal-t).
pub fn corr_matrix(grid: &Grid, model: &ModelSpec) -> Result<CovMatrix> {
    match model {
        ModelSpec::ExtremalT { .. } => Ok(CovMatrix::from_fn(grid.len(), |i, j| {
            if i == j {
                1.0
            } else {
                model.correlation(grid.distance(i, j))
            }
        })),
        ModelSpec::BrownResnick { .. } => Err(Error::invalid(
            "correlation matrix requires an extremal-t model",
        )),
    }
}

/// Lower-triangular factor of `C + jitter I` restricted to the coordinates
/// with nonzero variance. Pinned coordinates are always sampled as exact 0.
#[derive(Debug, Clone)]
pub struct CholFactor {
    n: usize,
    active: Vec<usize>,
    /// Row-major `m x m` lower-triangular factor, `m = active.len()`.
    l: Vec<f64>,
    jitter: f64,
}

impl CholFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid indices that carry randomness, in factor order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Entry `(r, c)` of the factor in active coordinates.
    pub fn l(&self, r: usize, c: usize) -> f64 {
        self.l[r * self.active.len() + c]
    }

    /// Draws `L xi` with `xi` i.i.d. standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.sample_rows(rng, self.active.len(), &mut out);
        out
    }

    /// Fills only the first `rows` active coordinates of `out`, consuming
    /// `rows` standard normals. Rows of a lower-triangular factor depend
    /// only on the leading normals, so the filled entries have the same law
    /// as in a full draw.
    pub fn sample_rows<R: Rng + ?Sized>(&self, rng: &mut R, rows: usize, out: &mut [f64]) {
        let m = self.active.len();
        debug_assert!(rows <= m && out.len() == self.n);
        let xi: Vec<f64> = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        for r in 0..rows {
            let row = &self.l[r * m..r * m + r + 1];
            let v: f64 = row.iter().zip(&xi[..=r]).map(|(a, b)| a * b).sum();
            out[self.active[r]] = v;
        }
    }

    /// `L L^T` embedded back into the full `n x n` index space.
    pub fn reconstruct(&self) -> CovMatrix {
        let m = self.active.len();
        let mut full = vec![0.0; self.n * self.n];
        for r in 0..m {
            for c in 0..=r {
                let s: f64 = (0..=c).map(|k| self.l(r, k) * self.l(c, k)).sum();
                let (i, j) = (self.active[r], self.active[c]);
                full[i * self.n + j] = s;
                full[j * self.n + i] = s;
            }
        }
        CovMatrix {
            n: self.n,
            entries: full,
            anchor: None,
        }
    }

    /// Gaussian log-density of the active coordinates of `x`.
    pub fn log_density_active(&self, x: &[f64]) -> f64 {
        let m = self.active.len();
        let mut y = vec![0.0; m];
        let mut log_det = 0.0;
        for r in 0..m {
            let mut s = x[self.active[r]];
            for c in 0..r {
                s -= self.l(r, c) * y[c];
            }
            let d = self.l(r, r);
            y[r] = s / d;
            log_det += d.ln();
        }
        let q: f64 = y.iter().map(|v| v * v).sum();
        -0.5 * q - log_det - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Cholesky factorization with zero-variance pinning and escalating jitter.
///
/// Coordinates whose variance is (numerically) zero are pinned to exactly 0
/// and removed before factorizing. If the remaining block is not positive
/// definite, `j * trace(C)/N` is added to its diagonal for
/// `j = 1e-12, 1e-11, ..., 1e-6`.
pub fn factorize(c: &CovMatrix) -> Result<CholFactor> {
    let n = c.n();
    if c.asymmetry() > SYMMETRY_TOL {
        return Err(Error::invalid("cannot factorize a non-symmetric matrix"));
    }
    let diag = c.diagonal();
    let max_diag = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| d < -ZERO_VARIANCE_TOL * max_diag.max(1.0)) {
        return Err(Error::numeric("covariance has a negative diagonal entry"));
    }
    let active: Vec<usize> = (0..n)
        .filter(|&i| diag[i] > ZERO_VARIANCE_TOL * max_diag)
        .collect();
    let m = active.len();
    if m == 0 {
        return Ok(CholFactor {
            n,
            active,
            l: Vec::new(),
            jitter: 0.0,
        });
    }
    let sub = DMatrix::from_fn(m, m, |r, s| c.get(active[r], active[s]));
    let base = c.trace() / n as f64;
    let mut jitter = 0.0;
    loop {
        let mut a = sub.clone();
        for i in 0..m {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = a.cholesky() {
            let lm = chol.l();
            let mut l = vec![0.0; m * m];
            for r in 0..m {
                for s in 0..=r {
                    l[r * m + s] = lm[(r, s)];
                }
            }
            return Ok(CholFactor {
                n,
                active,
                l,
                jitter,
            });
        }
        jitter = if jitter == 0.0 {
            JITTER_START * base
        } else {
            jitter * 10.0
        };
        if jitter > JITTER_MAX * base * (1.0 + 1e-9) {
            break;
        }
    }
    let eig = SymmetricEigen::new(sub).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Err(Error::numeric(format!(
        "Cholesky failed at maximum jitter {:e}; eigenvalues in [{lo:e}, {hi:e}], condition {:e}",
        JITTER_MAX * base,
        hi / lo.abs().max(f64::MIN_POSITIVE)
    )))
}

/// One centered Gaussian vector `L xi`. Each call is one Gaussian field draw
/// in the cost accounting.
pub fn sample_gaussian<R: Rng + ?Sized>(factor: &CholFactor, rng: &mut R) -> Vec<f64> {
    factor.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid_1d;
    use crate::rng::RngStream;

    fn br(alpha: f64, scale: f64) -> ModelSpec {
        ModelSpec::brown_resnick(alpha, scale).unwrap()
    }

    fn three_points(xs: &[f64]) -> Grid {
        Grid::from_points(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn anchored_covariance_entries() {
        let g = three_points(&[0.0, 1.0, -1.0]);
        let c = cov_from_variogram(&g, &br(1.0, 1.0), 0).unwrap();
        assert_eq!(c.get(1, 1), 1.0);
        assert_eq!(c.get(1, 2), 0.0);
        for j in 0..3 {
            assert_eq!(c.get(0, j), 0.0);
        }
        let g = three_points(&[0.0, 0.5, 1.0]);
        let c = cov_from_variogram(&g, &br(1.5, 1.0), 0).unwrap();
        let expected = 0.5 * (0.5f64.powf(1.5) + 1.0 - 0.5f64.powf(1.5));
        assert!((c.get(1, 2) - expected).abs() < 1e-15);
        assert!((c.get(1, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn anchored_diagonal_is_variogram() {
        let g = make_grid_1d(-1.0, 1.0, 21).unwrap();
        let m = br(0.7, 0.6);
        let c = cov_from_variogram(&g, &m, 4).unwrap();
        for i in 0..g.len() {
            assert_eq!(c.get(4, i), 0.0);
            assert!((c.get(i, i) - m.variogram(g.distance(i, 4))).abs() < 1e-14);
        }
        assert!(cov_from_variogram(&g, &m, 21).is_err());
    }

    #[test]
    fn minvar_closed_form_alpha_one() {
        let g = make_grid_1d(-1.0, 1.0, 11).unwrap();
        let (c, kind) = cov_minvar(&g, &br(1.0, 1.0)).unwrap();
        assert_eq!(kind, MinVarKind::ClosedForm);
        assert!((minvar_constant(1.0) - 1.0).abs() < 1e-14);
        for i in 0..g.len() {
            assert!((c.get(i, i) - 0.5).abs() < 1e-14);
        }
        assert!((c.get(0, 10) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn vertex_average_at_vertex() {
        // alpha = 1 through the vertex route: Var(W(R) - (W(-R) + W(R))/2) = gamma(2R)/4
        let g = make_grid_1d(-1.0, 1.0, 11).unwrap();
        let m = br(1.0, 1.0);
        let (lo, hi) = g.bounding_box();
        let c = vertex_average_cov(&g, &m, &box_vertices(&lo, &hi));
        assert!((c.get(10, 10) - 0.5).abs() < 1e-14);
        assert!((c.get(0, 0) - 0.5).abs() < 1e-14);
        // agrees with the closed form at alpha = 1
        let (closed, _) = cov_minvar(&g, &m).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                assert!((c.get(i, j) - closed.get(i, j)).abs() < 1e-13);
            }
        }
    }

    /// Oracle: explicit linear transform `A C A^T` of the anchored covariance
    /// on grid + vertices.
    #[test]
    fn vertex_average_matches_linear_transform() {
        let g = Grid::lattice(&[-1.0, -0.5], &[0.5, 0.5], &[5, 3]).unwrap();
        let m = br(1.4, 0.8);
        let (c, kind) = cov_minvar(&g, &m).unwrap();
        assert_eq!(kind, MinVarKind::VertexAverage);
        let (lo, hi) = g.bounding_box();
        let verts = box_vertices(&lo, &hi);
        let mut pts: Vec<Vec<f64>> = g.points().map(|p| p.to_vec()).collect();
        pts.push(vec![0.13, 0.07]); // anchor location off the box vertices
        let anchor = pts.len() - 1;
        let nv = verts.len();
        let vertex_rows: Vec<usize> = verts
            .iter()
            .map(|v| pts.iter().position(|p| p == v).unwrap())
            .collect();
        let aug = Grid::from_points(&pts).unwrap();
        let base = cov_from_variogram(&aug, &m, anchor).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                let mut s = base.get(i, j);
                for &v in &vertex_rows {
                    s -= (base.get(v, j) + base.get(i, v)) / nv as f64;
                }
                for &v in &vertex_rows {
                    for &w in &vertex_rows {
                        s += base.get(v, w) / (nv * nv) as f64;
                    }
                }
                assert!((s - c.get(i, j)).abs() < 1e-12, "({i},{j}) {s} vs {}", c.get(i, j));
            }
        }
    }

    #[test]
    fn transforms_preserve_the_variogram() {
        let g = make_grid_1d(-1.0, 1.0, 15).unwrap();
        for &(alpha, s) in &[(0.3, 0.5), (1.0, 1.0), (1.5, 2.0), (1.9, 0.3)] {
            let m = br(alpha, s);
            let (c, _) = cov_minvar(&g, &m).unwrap();
            for i in 0..g.len() {
                for j in 0..g.len() {
                    let vg = c.get(i, i) + c.get(j, j) - 2.0 * c.get(i, j);
                    assert!((vg - m.variogram(g.distance(i, j))).abs() < 1e-9);
                }
            }
        }
        let g2 = Grid::lattice(&[-1.0, -1.0], &[0.5, 0.5], &[5, 5]).unwrap();
        let m = br(0.5, 1.0);
        let (c, kind) = cov_minvar(&g2, &m).unwrap();
        assert_eq!(kind, MinVarKind::VertexAverageSurrogate);
        assert!(!kind.is_minimal());
        for i in 0..g2.len() {
            for j in 0..g2.len() {
                let vg = c.get(i, i) + c.get(j, j) - 2.0 * c.get(i, j);
                assert!((vg - m.variogram(g2.distance(i, j))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn minvar_reduces_max_variance() {
        for &alpha in &[0.2, 0.5, 0.8, 1.0] {
            for &s in &[0.5, 1.0, 3.0] {
                for &r in &[0.5, 1.0, 2.0] {
                    let g = make_grid_1d(-r, r, 41).unwrap();
                    let m = br(alpha, s);
                    let (mv, _) = cov_minvar(&g, &m).unwrap();
                    let orig = cov_from_variogram(&g, &m, g.nearest_to_origin()).unwrap();
                    let max_mv = mv.diagonal().into_iter().fold(0.0, f64::max);
                    let max_orig = orig.diagonal().into_iter().fold(0.0, f64::max);
                    assert!(max_mv <= max_orig, "alpha={alpha} s={s} R={r}");
                }
            }
        }
    }

    #[test]
    fn correlation_matrix_entries() {
        let g = three_points(&[0.0, 0.5, 1e6]);
        let c = corr_matrix(&g, &ModelSpec::extremal_t(1.0, 0.5).unwrap()).unwrap();
        assert_eq!(c.get(1, 1), 1.0);
        assert!((c.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(c.get(0, 2) < 1e-300);
        assert!(corr_matrix(&g, &br(1.0, 1.0)).is_err());
    }

    #[test]
    fn identity_factor() {
        let c = CovMatrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.0 });
        let f = factorize(&c).unwrap();
        assert_eq!(f.jitter(), 0.0);
        for r in 0..4 {
            for s in 0..4 {
                assert_eq!(f.l(r, s), if r == s { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rank_one_needs_jitter() {
        let a = [1.0, 2.0, -0.5];
        let c = CovMatrix::from_fn(3, |i, j| a[i] * a[j]);
        let f = factorize(&c).unwrap();
        assert!(f.jitter() > 0.0);
        let rec = f.reconstruct();
        let tol = 1e-8 * c.max_abs().max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                let target = c.get(i, j) + if i == j { f.jitter() } else { 0.0 };
                assert!((rec.get(i, j) - target).abs() <= tol);
            }
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let c = CovMatrix::from_row_major(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(factorize(&c), Err(Error::NumericFailure { .. })));
        assert!(CovMatrix::from_row_major(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
    }

    #[test]
    fn anchored_coordinate_is_exact_zero() {
        let g = make_grid_1d(-1.0, 1.0, 31).unwrap();
        let c = cov_from_variogram(&g, &br(1.0, 1.0), 15).unwrap();
        let f = factorize(&c).unwrap();
        assert!(!f.active().contains(&15));
        let mut rng = RngStream::new(1, 1);
        for _ in 0..50 {
            assert_eq!(sample_gaussian(&f, &mut rng)[15], 0.0);
        }
    }

    #[test]
    fn zero_factor_gives_zero_vector() {
        let c = CovMatrix::from_fn(3, |_, _| 0.0);
        let f = factorize(&c).unwrap();
        let mut rng = RngStream::new(5, 0);
        assert_eq!(f.sample(&mut rng), vec![0.0; 3]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let c = CovMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.0 });
        let f = factorize(&c).unwrap();
        let a = f.sample(&mut RngStream::new(9, 2));
        let b = f.sample(&mut RngStream::new(9, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn log_density_of_standard_normal() {
        let c = CovMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 0.0 });
        let f = factorize(&c).unwrap();
        let lp = f.log_density_active(&[0.0, 0.0]);
        assert!((lp + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }
}
