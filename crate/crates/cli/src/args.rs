use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxstable::bench::Method;
use maxstable::{parse_grid, Grid, ModelSpec, SamplerOptions, ThetaSource};

#[derive(Debug, Parser)]
#[command(name = "maxsim", version, about = "Simulate max-stable random fields on finite grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw realizations and write one CSV row per replication.
    Simulate(SimulateArgs),
    /// Estimate the error of threshold stopping at a given threshold.
    AssessError(AssessArgs),
    /// Calibrate a method to a target error probability.
    Calibrate(CalibrateArgs),
    /// Run a benchmark scenario file and write the results table.
    Bench(BenchArgs),
    /// Estimate the sup-norm extremal coefficient of the grid.
    Theta(ThetaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKindArg {
    #[value(alias = "brown-resnick")]
    Br,
    #[value(alias = "extremal-t")]
    Et,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Brown-Resnick (br) or extremal-t (et).
    #[arg(long, value_enum)]
    pub model: ModelKindArg,
    /// Brown-Resnick variogram exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Brown-Resnick variance form: gamma(h) = 2 v |h|^alpha.
    #[arg(long = "v")]
    pub v: Option<f64>,
    /// Brown-Resnick scale form: gamma(h) = |h / scale|^alpha.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Extremal-t degrees of freedom.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Extremal-t correlation range: rho(h) = exp(-|h| / s).
    #[arg(long = "s")]
    pub s: Option<f64>,
    /// Grid as a:b:N, or comma-separated a:b:N parts for a lattice.
    #[arg(long, default_value = "-1:1:101", allow_hyphen_values = true)]
    pub grid: String,
    /// Anchor index of the original representation.
    #[arg(long)]
    pub anchor: Option<usize>,
    /// Fixed sup-norm constant instead of a pilot estimate.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Draws behind the pilot estimate of the sup-norm constant.
    #[arg(long, default_value_t = maxstable::spectral::DEFAULT_THETA_PILOT)]
    pub theta_pilot: usize,
}

impl ModelArgs {
    pub fn model(&self) -> Result<ModelSpec, String> {
        match self.model {
            ModelKindArg::Br => {
                if self.nu.is_some() || self.s.is_some() {
                    return Err("--nu and --s apply to extremal-t models".into());
                }
                let alpha = self.alpha.ok_or("Brown-Resnick needs --alpha")?;
                let m = match (self.v, self.scale) {
                    (Some(v), None) => ModelSpec::brown_resnick_variance(alpha, v),
                    (None, Some(s)) => ModelSpec::brown_resnick(alpha, s),
                    _ => return Err("Brown-Resnick needs exactly one of --v and --scale".into()),
                };
                m.map_err(|e| e.to_string())
            }
            ModelKindArg::Et => {
                if self.alpha.is_some() || self.v.is_some() || self.scale.is_some() {
                    return Err("--alpha, --v and --scale apply to Brown-Resnick models".into());
                }
                let nu = self.nu.ok_or("extremal-t needs --nu")?;
                let s = self.s.ok_or("extremal-t needs --s")?;
                ModelSpec::extremal_t(nu, s).map_err(|e| e.to_string())
            }
        }
    }

    pub fn grid(&self) -> Result<Grid, String> {
        parse_grid(&self.grid).map_err(|e| e.to_string())
    }

    pub fn sampler_options(&self, seed: u64) -> SamplerOptions {
        SamplerOptions {
            theta: match self.theta {
                Some(t) => ThetaSource::Fixed(t),
                None => ThetaSource::Pilot {
                    reps: self.theta_pilot,
                    seed,
                },
            },
            anchor: self.anchor,
            ..SamplerOptions::default()
        }
    }
}

/// Simulation method: the extremal-functions algorithm, or threshold
/// stopping with the named spectral representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMethod {
    Ef,
    Dm,
    Sn,
    Original,
    Shifted,
    Minvar,
    #[value(name = "extremal-t")]
    ExtremalT,
}

/// Threshold of the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSpec {
    /// The almost-sure bound of a bounded representation.
    Exact,
    TimesN(f64),
    TimesTheta(f64),
    Value(f64),
}

impl FromStr for TauSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        let num = |x: &str| -> Result<f64, String> {
            if x.is_empty() {
                return Ok(1.0);
            }
            x.parse::<f64>().map_err(|_| format!("bad threshold {s:?}"))
        };
        let v = if t == "exact" {
            TauSpec::Exact
        } else if let Some(x) = t.strip_suffix("theta") {
            TauSpec::TimesTheta(num(x)?)
        } else if let Some(x) = t.strip_suffix('N') {
            TauSpec::TimesN(num(x)?)
        } else {
            TauSpec::Value(t.parse::<f64>().map_err(|_| {
                format!("bad threshold {s:?} (use a number, \"exact\", e.g. \"0.5N\" or \"2theta\")")
            })?)
        };
        match v {
            TauSpec::TimesN(x) | TauSpec::TimesTheta(x) | TauSpec::Value(x) if !(x > 0.0 && x.is_finite()) => {
                Err(format!("threshold must be positive, got {s:?}"))
            }
            _ => Ok(v),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extremal functions (ef), or threshold stopping with a spectral
    /// representation.
    #[arg(long, value_enum)]
    pub method: SimMethod,
    /// Threshold: a number, "exact", a multiple of N ("0.5N") or of the
    /// sup-norm constant ("2theta"). Defaults to "exact" for dm and sn.
    #[arg(long)]
    pub tau: Option<TauSpec>,
    /// Stop the extremal-functions algorithm after this many equidistant
    /// sites.
    #[arg(long)]
    pub sites: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssessModeArg {
    /// Continuation for dm and sn, reconstruction for the other
    /// Brown-Resnick representations, the surrogate otherwise.
    Auto,
    Continuation,
    Surrogate,
    Reconstruction,
    Formula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PositivePartArg {
    PerDraw,
    OfMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaLevelArg {
    /// The larger of tau / inf Z of the stopped field and the last
    /// point's Gamma.
    LastPoint,
    /// tau / inf Z alone (an upper bound when the last draw overshoots it).
    Threshold,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Threshold-stopping representation.
    #[arg(long, value_enum)]
    pub method: SimMethod,
    /// Threshold: a number, "exact", a multiple of N ("0.5N") or of the
    /// sup-norm constant ("2theta").
    #[arg(long)]
    pub tau: TauSpec,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: AssessModeArg,
    /// Error sizes for the absolute and relative error probabilities.
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Inner draws of the formula estimator.
    #[arg(long, default_value_t = 100)]
    pub reps_inner: usize,
    #[arg(long, value_enum, default_value = "per-draw")]
    pub positive_part: PositivePartArg,
    /// Start of the range of unused points in the formula estimator.
    #[arg(long, value_enum, default_value = "last-point")]
    pub formula_level: FormulaLevelArg,
    /// Also estimate the bound on the mean number of missing extremal
    /// functions.
    #[arg(long)]
    pub with_bound: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// dm, ef or sn.
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Target probability that the output differs from an exact sample.
    #[arg(long)]
    pub target: f64,
    /// Calibration replications (default: --reps).
    #[arg(long)]
    pub calibration_reps: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub scenarios: Option<PathBuf>,
    /// Built-in scenario set: desk or full.
    #[arg(long)]
    pub preset: Option<String>,
    /// Run only the scenarios with these ids.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also estimate E 1/inf Z from exact samples.
    #[arg(long)]
    pub plugin: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_specs() {
        assert_eq!("exact".parse::<TauSpec>().unwrap(), TauSpec::Exact);
        assert_eq!("0.5N".parse::<TauSpec>().unwrap(), TauSpec::TimesN(0.5));
        assert_eq!("N".parse::<TauSpec>().unwrap(), TauSpec::TimesN(1.0));
        assert_eq!("2theta".parse::<TauSpec>().unwrap(), TauSpec::TimesTheta(2.0));
        assert_eq!("3.5".parse::<TauSpec>().unwrap(), TauSpec::Value(3.5));
        assert!("-1".parse::<TauSpec>().is_err());
        assert!("0N".parse::<TauSpec>().is_err());
        assert!("abc".parse::<TauSpec>().is_err());
    }
}
