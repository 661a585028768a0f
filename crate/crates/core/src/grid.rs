//! Finite simulation domains.
//!
//! Points of a d-dimensional lattice are stored in row-major order: the last
//! axis varies fastest.

use crate::error::{Error, Result};

/// Regular-lattice descriptor: point with multi-index `m` sits at
/// `origin + m * step` (componentwise), `0 <= m[a] < counts[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMeta {
    pub origin: Vec<f64>,
    pub step: Vec<f64>,
    pub counts: Vec<usize>,
}

impl LatticeMeta {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major multi-index of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let d = self.counts.len();
        let mut m = vec![0; d];
        for a in (0..d).rev() {
            m[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        m
    }

    /// Lattice of all pairwise differences: `2 n_a - 1` points per axis,
    /// with lag zero at its centre.
    pub fn difference_lattice(&self) -> LatticeMeta {
        let counts: Vec<usize> = self.counts.iter().map(|&n| 2 * n - 1).collect();
        let origin = self
            .step
            .iter()
            .zip(&self.counts)
            .map(|(&h, &n)| -(n as f64 - 1.0) * h)
            .collect();
        LatticeMeta {
            origin,
            step: self.step.clone(),
            counts,
        }
    }
}

/// Ordered set of N distinct locations in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    coords: Vec<f64>,
    lattice: Option<LatticeMeta>,
}

impl Grid {
    /// Arbitrary point set. Points must be distinct and share one dimension.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("a grid needs at least one point"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::invalid("points have mixed dimensions"));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("point coordinates must be finite"));
            }
            coords.extend_from_slice(p);
        }
        let grid = Self {
            dim,
            coords,
            lattice: None,
        };
        grid.check_distinct()?;
        Ok(grid)
    }

    /// Regular lattice `origin + m * step`, row-major.
    pub fn lattice(origin: &[f64], step: &[f64], counts: &[usize]) -> Result<Self> {
        let d = origin.len();
        if d == 0 || step.len() != d || counts.len() != d {
            return Err(Error::invalid("origin, step and counts must share a positive length"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("lattice counts must be >= 1"));
        }
        if step.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::invalid("lattice steps must be positive and finite"));
        }
        let meta = LatticeMeta {
            origin: origin.to_vec(),
            step: step.to_vec(),
            counts: counts.to_vec(),
        };
        let n = meta.len();
        let mut coords = Vec::with_capacity(n * d);
        for flat in 0..n {
            let m = meta.multi_index(flat);
            for a in 0..d {
                coords.push(origin[a] + m[a] as f64 * step[a]);
            }
        }
        Ok(Self {
            dim: d,
            coords,
            lattice: Some(meta),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn lattice_meta(&self) -> Option<&LatticeMeta> {
        self.lattice.as_ref()
    }

    /// Euclidean distance between points `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.point(i), self.point(j))
    }

    /// Index of the point nearest the origin (first one on ties).
    pub fn nearest_to_origin(&self) -> usize {
        let zero = vec![0.0; self.dim];
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points().enumerate() {
            let d = dist(p, &zero);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Axis-aligned bounding box as (lower, upper) corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// `n` equidistant indices from `0` to `N - 1`, both endpoints included
    /// when `n >= 2`.
    pub fn equidistant_subset(&self, n: usize) -> Result<Vec<usize>> {
        let total = self.len();
        if n == 0 || n > total {
            return Err(Error::invalid(format!(
                "subset size must lie in 1..={total}, got {n}"
            )));
        }
        if n == 1 {
            return Ok(vec![0]);
        }
        let mut idx: Vec<usize> = (0..n)
            .map(|i| ((i * (total - 1)) as f64 / (n - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        Ok(idx)
    }

    fn check_distinct(&self) -> Result<()> {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .partial_cmp(self.point(b))
                .expect("finite coordinates")
        });
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Err(Error::invalid(format!(
                    "grid points {} and {} coincide",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `n` equidistant points from `a` to `b` inclusive.
pub fn make_grid_1d(a: f64, b: f64, n: usize) -> Result<Grid> {
    if n == 0 {
        return Err(Error::invalid("grid needs N >= 1 points"));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("need finite a < b, got [{a}, {b}]")));
    }
    let step = if n == 1 { b - a } else { (b - a) / (n - 1) as f64 };
    // Weighted form keeps both endpoints exact.
    let denom = (n.max(2) - 1) as f64;
    let coords: Vec<f64> = (0..n)
        .map(|i| ((denom - i as f64) * a + i as f64 * b) / denom)
        .collect();
    Ok(Grid {
        dim: 1,
        coords,
        lattice: Some(LatticeMeta {
            origin: vec![a],
            step: vec![step],
            counts: vec![n],
        }),
    })
}

/// Parses `a:b:N` into an equidistant 1-D grid, or comma-separated
/// `a:b:N` parts into a row-major lattice with one part per axis.
pub fn parse_grid(spec: &str) -> Result<Grid> {
    let axes = spec
        .split(',')
        .map(|part| {
            let f: Vec<&str> = part.trim().split(':').collect();
            if f.len() != 3 {
                return Err(Error::invalid(format!("grid axis {part:?} is not of the form a:b:N")));
            }
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad grid bound {x:?} in {part:?}")))
            };
            let n = f[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad point count {:?} in {part:?}", f[2])))?;
            Ok((num(f[0])?, num(f[1])?, n))
        })
        .collect::<Result<Vec<_>>>()?;
    if let [(a, b, n)] = axes[..] {
        return make_grid_1d(a, b, n);
    }
    let mut origin = Vec::new();
    let mut step = Vec::new();
    let mut counts = Vec::new();
    for (a, b, n) in axes {
        // Reuse the 1-D checks for each axis.
        let g = make_grid_1d(a, b, n)?;
        origin.push(a);
        step.push(g.lattice_meta().expect("1-D grids are lattices").step[0]);
        counts.push(n);
    }
    Grid::lattice(&origin, &step, &counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fine_grid_spacing_and_endpoints() {
        let g = make_grid_1d(-1.0, 1.0, 501).unwrap();
        assert_eq!(g.len(), 501);
        assert!((g.lattice_meta().unwrap().step[0] - 0.004).abs() < 1e-15);
        assert_eq!(g.point(0)[0], -1.0);
        assert_eq!(g.point(500)[0], 1.0);
        assert!((g.point(1)[0] + 0.996).abs() < 1e-15);
    }

    #[test]
    fn endpoints_only() {
        let g = make_grid_1d(0.0, 1.0, 2).unwrap();
        assert_eq!(g.point(0), &[0.0]);
        assert_eq!(g.point(1), &[1.0]);
    }

    #[test]
    fn midpoint_of_101() {
        let g = make_grid_1d(-1.0, 1.0, 101).unwrap();
        assert!((g.lattice_meta().unwrap().step[0] - 0.02).abs() < 1e-15);
        // index 51 counting from one
        assert_eq!(g.point(50)[0], 0.0);
        assert_eq!(g.nearest_to_origin(), 50);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(make_grid_1d(0.0, 1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid_1d(1.0, 1.0, 5), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid_1d(2.0, 1.0, 5), Err(Error::InvalidArgument(_))));
        assert!(Grid::from_points(&[vec![0.0, 1.0], vec![0.0, 1.0]]).is_err());
        assert!(Grid::from_points(&[]).is_err());
    }

    #[test]
    fn lattice_is_row_major() {
        let g = Grid::lattice(&[0.0, 0.0], &[1.0, 0.5], &[2, 3]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(1), &[0.0, 0.5]);
        assert_eq!(g.point(3), &[1.0, 0.0]);
        let meta = g.lattice_meta().unwrap();
        assert_eq!(meta.multi_index(5), vec![1, 2]);
        let diff = meta.difference_lattice();
        assert_eq!(diff.counts, vec![3, 5]);
        assert_eq!(diff.origin, vec![-1.0, -1.0]);
    }

    #[test]
    fn parses_grid_specs() {
        let g = parse_grid("-1:1:101").unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g.point(100), &[1.0]);
        let l = parse_grid("0:1:3, 0:2:5").unwrap();
        assert_eq!(l.dim(), 2);
        assert_eq!(l.len(), 15);
        assert_eq!(l.point(14), &[1.0, 2.0]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:x:3").is_err());
        assert!(parse_grid("1:0:3").is_err());
    }

    #[test]
    fn subsets_include_endpoints() {
        let g = make_grid_1d(-1.0, 1.0, 101).unwrap();
        assert_eq!(g.equidistant_subset(1).unwrap(), vec![0]);
        assert_eq!(g.equidistant_subset(3).unwrap(), vec![0, 50, 100]);
        assert_eq!(g.equidistant_subset(101).unwrap(), (0..101).collect::<Vec<_>>());
        let s = g.equidistant_subset(7).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(*s.last().unwrap(), 100);
    }
}
