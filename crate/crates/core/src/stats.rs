//! Small Monte Carlo statistics helpers.

use serde::Serialize;
use statrs::function::erf::erfc;

/// Point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// Whether `other` lies within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * combined_se(self.se, other.se)
    }

    /// Whether the fixed value `x` lies within `k` standard errors.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.se
    }
}

pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Neumaier-compensated sum; the result depends only on the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and its standard error (two-pass, compensated).
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = compensated_sum(xs.iter().copied()) / n as f64;
    if n == 1 {
        return Estimate {
            value: mean,
            se: 0.0,
        };
    }
    let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    let var = ss / (n - 1) as f64;
    Estimate {
        value: mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Proportion of `true` with its binomial standard error.
pub fn proportion(flags: impl IntoIterator<Item = bool>) -> Estimate {
    let (mut hits, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        hits += f as usize;
    }
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            se: f64::NAN,
        };
    }
    let p = hits as f64 / n as f64;
    Estimate {
        value: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Ratio of means `mean(a) / mean(b)` with a delta-method standard error.
pub fn ratio_of_means(a: &[f64], b: &[f64]) -> Estimate {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = compensated_sum(a.iter().copied()) / n;
    let mb = compensated_sum(b.iter().copied()) / n;
    let r = ma / mb;
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - r * y).collect();
    let s = mean_se(&resid);
    Estimate {
        value: r,
        se: s.se / mb.abs(),
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov-Smirnov statistic against the continuous CDF `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in KS sample"));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Empirical pairwise extremal coefficient from unit-Fréchet pairs, using
/// `1 / max(Z1, Z2) ~ Exp(theta)`.
pub fn pairwise_extremal_coefficient(z1: &[f64], z2: &[f64]) -> Estimate {
    let recips: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| 1.0 / a.max(*b)).collect();
    let m = mean_se(&recips);
    Estimate {
        value: 1.0 / m.value,
        se: m.se / (m.value * m.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn mean_and_se() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-11);
    }

    #[test]
    fn ks_of_perfect_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn proportion_se() {
        let p = proportion([true, false, false, false]);
        assert_eq!(p.value, 0.25);
        assert!((p.se - (0.25f64 * 0.75 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ratio_of_constant_means() {
        let r = ratio_of_means(&[2.0, 2.0, 2.0], &[4.0, 4.0, 4.0]);
        assert_eq!(r.value, 0.5);
        assert_eq!(r.se, 0.0);
    }
}
