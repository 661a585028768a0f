use std::fmt;

use crate::error::{Error, Result};

/// Parameterization of the max-stable model.
///
/// Brown-Resnick models are stored in the scale form
/// `gamma(h) = |h / scale|^alpha`; extremal-t models carry the exponential
/// correlation `rho(h) = exp(-|h| / scale)`. A scale of `+inf` is accepted
/// and gives the fully dependent limit (`gamma = 0`, `rho = 1`), where the
/// field is a.s. constant in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    BrownResnick { alpha: f64, scale: f64 },
    ExtremalT { nu: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    BrownResnick,
    ExtremalT,
}

impl ModelSpec {
    pub fn brown_resnick(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        if !(scale > 0.0) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(ModelSpec::BrownResnick { alpha, scale })
    }

    /// Variance form `gamma(h) = 2 v |h|^alpha`, stored as
    /// `scale = (2 v)^(-1/alpha)`.
    pub fn brown_resnick_variance(alpha: f64, v: f64) -> Result<Self> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("variance parameter must be positive, got {v}")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        Self::brown_resnick(alpha, (2.0 * v).powf(-1.0 / alpha))
    }

    pub fn extremal_t(nu: f64, scale: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::invalid(format!("nu must be positive, got {nu}")));
        }
        if !(scale > 0.0) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        Ok(ModelSpec::ExtremalT { nu, scale })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::BrownResnick { .. } => ModelKind::BrownResnick,
            ModelSpec::ExtremalT { .. } => ModelKind::ExtremalT,
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            ModelSpec::BrownResnick { scale, .. } | ModelSpec::ExtremalT { scale, .. } => scale,
        }
    }

    /// Variogram at lag distance `h` (Brown-Resnick only).
    pub fn variogram(&self, h: f64) -> f64 {
        match *self {
            ModelSpec::BrownResnick { alpha, scale } => {
                if scale.is_infinite() {
                    0.0
                } else {
                    (h.abs() / scale).powf(alpha)
                }
            }
            ModelSpec::ExtremalT { .. } => panic!("variogram requested for an extremal-t model"),
        }
    }

    /// Exponential correlation at lag distance `h` (extremal-t only).
    pub fn correlation(&self, h: f64) -> f64 {
        match *self {
            ModelSpec::ExtremalT { scale, .. } => (-h.abs() / scale).exp(),
            ModelSpec::BrownResnick { .. } => panic!("correlation requested for a Brown-Resnick model"),
        }
    }

    /// First shape parameter: alpha (BR) or nu (extremal-t).
    pub fn shape(&self) -> f64 {
        match *self {
            ModelSpec::BrownResnick { alpha, .. } => alpha,
            ModelSpec::ExtremalT { nu, .. } => nu,
        }
    }

    /// Second parameter as reported in outputs: the variance form `v` for
    /// Brown-Resnick, the scale `s` for extremal-t.
    pub fn v_or_s(&self) -> f64 {
        match *self {
            ModelSpec::BrownResnick { alpha, scale } => 0.5 * scale.powf(-alpha),
            ModelSpec::ExtremalT { scale, .. } => scale,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::BrownResnick { alpha, scale } => {
                write!(f, "brown-resnick(alpha={alpha}, scale={scale})")
            }
            ModelSpec::ExtremalT { nu, scale } => write!(f, "extremal-t(nu={nu}, scale={scale})"),
        }
    }
}

/// Identifies the spectral representation that produced a draw or sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepTag {
    Original,
    Shifted,
    MinVar,
    SumNorm,
    SupNorm,
    Pk(usize),
    ExtremalT,
    ExtremalTPk(usize),
    /// Output of the extremal-functions algorithm (mixture of all `P_k`).
    ExtremalFunctions,
}

impl fmt::Display for RepTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepTag::Original => f.write_str("original"),
            RepTag::Shifted => f.write_str("shifted"),
            RepTag::MinVar => f.write_str("minvar"),
            RepTag::SumNorm => f.write_str("sumnorm"),
            RepTag::SupNorm => f.write_str("supnorm"),
            RepTag::Pk(k) => write!(f, "pk{k}"),
            RepTag::ExtremalT => f.write_str("extremal-t"),
            RepTag::ExtremalTPk(k) => write!(f, "extremal-t-pk{k}"),
            RepTag::ExtremalFunctions => f.write_str("extremal-functions"),
        }
    }
}

/// One realization on the grid plus its cost instrumentation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    /// Number of spectral draws consumed.
    pub stopping_time: u64,
    /// Number of Gaussian field draws consumed.
    pub gaussian_draws: u64,
    pub exact: bool,
    pub rep: RepTag,
}

impl FieldSample {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Unit Fréchet distribution function `exp(-1/z)`; zero for `z <= 0`.
pub fn frechet_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-1.0 / z).exp()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frechet_values() {
        assert!((frechet_cdf(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((frechet_cdf(1.0) - 0.367879).abs() < 1e-6);
        assert!((frechet_cdf(1.0 / std::f64::consts::LN_2) - 0.5).abs() < 1e-15);
        assert_eq!(frechet_cdf(f64::INFINITY), 1.0);
        assert!(frechet_cdf(1e12) > 1.0 - 1e-11);
        assert_eq!(frechet_cdf(0.0), 0.0);
        assert_eq!(frechet_cdf(-3.0), 0.0);
    }

    #[test]
    fn variance_form_is_canonicalized() {
        let m = ModelSpec::brown_resnick_variance(1.0, 1.0).unwrap();
        // gamma(h) = 2 |h|
        assert!((m.variogram(0.5) - 1.0).abs() < 1e-14);
        assert!((m.v_or_s() - 1.0).abs() < 1e-14);
        let m = ModelSpec::brown_resnick_variance(1.5, 0.5).unwrap();
        assert!((m.variogram(2.0) - 2.0f64.powf(1.5)).abs() < 1e-12);
        assert!((m.v_or_s() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelSpec::brown_resnick(0.0, 1.0).is_err());
        assert!(ModelSpec::brown_resnick(2.0, 1.0).is_err());
        assert!(ModelSpec::brown_resnick(1.0, 0.0).is_err());
        assert!(ModelSpec::brown_resnick_variance(1.0, -1.0).is_err());
        assert!(ModelSpec::extremal_t(0.0, 1.0).is_err());
        assert!(ModelSpec::extremal_t(1.0, -2.0).is_err());
        assert!(ModelSpec::brown_resnick(1.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn correlation_values() {
        let m = ModelSpec::extremal_t(2.0, 0.5).unwrap();
        assert_eq!(m.correlation(0.0), 1.0);
        assert!((m.correlation(0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(m.correlation(1e6) < 1e-300);
    }
}
