//! Scenario files.
//!
//! A scenario file is TOML. Top-level keys set defaults; every table is one
//! scenario section named by its id and may override any default:
//!
//! ```toml
//! grid = "-1:1:101"
//! reps = 2000
//! methods = ["dm", "ef", "sn"]
//! targets = [0.0, 0.01, 0.05, 0.1]
//!
//! [br_a1_v1]
//! model = "brown-resnick"
//! alpha = 1.0
//! v = 1.0
//! ```
//!
//! Brown-Resnick sections take `alpha` plus `v` (variance form) or `scale`;
//! extremal-t sections take `nu` and `s`. `method` and `target_error` are
//! accepted as single-valued forms of `methods` and `targets`.

use std::str::FromStr;

use toml::{Table, Value};

use super::{Method, Scenario};
use crate::error::{Error, Result};
use crate::grid::parse_grid;
use crate::model::ModelSpec;

const KEYS: [&str; 13] = [
    "model",
    "alpha",
    "v",
    "scale",
    "nu",
    "s",
    "grid",
    "methods",
    "method",
    "targets",
    "target_error",
    "reps",
    "calibration_reps",
];

/// Built-in scenario sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 101 sites, 2 000 replications.
    Desk,
    /// 501 sites, 50 000 replications.
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(Error::invalid(format!("unknown preset {s:?} (expected desk or full)"))),
        }
    }
}

/// Scenario file text of a preset.
pub fn preset(p: Preset) -> &'static str {
    match p {
        Preset::Desk => include_str!("../../../../scenarios/desk.toml"),
        Preset::Full => include_str!("../../../../scenarios/full.toml"),
    }
}

struct Section<'a> {
    id: &'a str,
    own: &'a Table,
    defaults: &'a Table,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.own.get(key).or_else(|| self.defaults.get(key))
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::invalid(format!("scenario {}: {msg}", self.id))
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(self.err(format!("{key} must be a number, got {v}"))),
        }
    }

    fn need_float(&self, key: &str) -> Result<f64> {
        self.float(key)?.ok_or_else(|| self.err(format!("missing {key}")))
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.err(format!("{key} must be a string, got {v}"))),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(v) => Err(self.err(format!("{key} must be a nonnegative integer, got {v}"))),
        }
    }

    /// A list under `plural`, or one value under `single`.
    fn list(&self, plural: &str, single: &str) -> Result<Vec<&'a Value>> {
        match (self.own.get(plural), self.own.get(single)) {
            (Some(_), Some(_)) => Err(self.err(format!("give either {plural} or {single}"))),
            (Some(Value::Array(a)), None) => Ok(a.iter().collect()),
            (Some(v), None) => Err(self.err(format!("{plural} must be a list, got {v}"))),
            (None, Some(v)) => Ok(vec![v]),
            (None, None) => match (self.defaults.get(plural), self.defaults.get(single)) {
                (Some(Value::Array(a)), None) => Ok(a.iter().collect()),
                (None, Some(v)) => Ok(vec![v]),
                (None, None) => Err(self.err(format!("missing {plural}"))),
                _ => Err(self.err(format!("bad default for {plural}"))),
            },
        }
    }

    fn model(&self) -> Result<ModelSpec> {
        let kind = self.string("model")?.ok_or_else(|| self.err("missing model"))?;
        match kind {
            "br" | "brown-resnick" => {
                let alpha = self.need_float("alpha")?;
                match (self.float("v")?, self.float("scale")?) {
                    (Some(v), None) => ModelSpec::brown_resnick_variance(alpha, v),
                    (None, Some(s)) => ModelSpec::brown_resnick(alpha, s),
                    _ => Err(self.err("Brown-Resnick needs exactly one of v and scale")),
                }
            }
            "et" | "extremal-t" => ModelSpec::extremal_t(self.need_float("nu")?, self.need_float("s")?),
            other => Err(self.err(format!("unknown model {other:?}"))),
        }
    }
}

/// Expands a scenario file into one [`Scenario`] per section, method and
/// target, in file order.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::invalid(format!("scenario file: {e}")))?;
    let mut defaults = Table::new();
    let mut sections = Vec::new();
    for (k, v) in &table {
        match v {
            Value::Table(t) => sections.push((k.as_str(), t)),
            _ if KEYS.contains(&k.as_str()) => {
                defaults.insert(k.clone(), v.clone());
            }
            _ => return Err(Error::invalid(format!("scenario file: unknown key {k:?}"))),
        }
    }
    if sections.is_empty() {
        return Err(Error::invalid("scenario file defines no scenarios"));
    }
    let mut out = Vec::new();
    for (id, own) in sections {
        let sec = Section { id, own, defaults: &defaults };
        if let Some(k) = own.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(sec.err(format!("unknown key {k:?}")));
        }
        let model = sec.model()?;
        let grid = parse_grid(sec.string("grid")?.ok_or_else(|| sec.err("missing grid"))?)?;
        let reps = sec.count("reps")?.ok_or_else(|| sec.err("missing reps"))?;
        let calibration_reps = sec.count("calibration_reps")?.unwrap_or(reps);
        let methods = sec
            .list("methods", "method")?
            .into_iter()
            .map(|v| match v {
                Value::String(s) => s.parse::<Method>(),
                other => Err(sec.err(format!("method must be a string, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = sec
            .list("targets", "target_error")?
            .into_iter()
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                other => Err(sec.err(format!("target must be a number, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        for &method in &methods {
            for &target_error in &targets {
                let sc = Scenario {
                    id: id.to_string(),
                    model,
                    grid: grid.clone(),
                    method,
                    target_error,
                    reps,
                    calibration_reps,
                };
                sc.validate()?;
                out.push(sc);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    #[test]
    fn sections_inherit_and_override_defaults() {
        let text = r#"
            grid = "-1:1:11"
            reps = 200
            methods = ["dm", "ef"]
            targets = [0.0, 0.1]

            [a]
            model = "br"
            alpha = 1.0
            v = 0.5

            [b]
            model = "extremal-t"
            nu = 2
            s = 1.0
            method = "sn"
            reps = 300
        "#;
        let sc = parse_scenarios(text).unwrap();
        assert_eq!(sc.len(), 6);
        assert_eq!(sc[0].id, "a");
        assert_eq!(sc[0].method, Method::Dm);
        assert_eq!(sc[1].target_error, 0.1);
        assert_eq!(sc[2].method, Method::Ef);
        assert_eq!(sc[4].model.kind(), ModelKind::ExtremalT);
        assert_eq!(sc[4].method, Method::Sn);
        assert_eq!(sc[4].reps, 300);
        assert_eq!(sc[4].calibration_reps, 300);
        assert_eq!(sc[0].grid.len(), 11);
    }

    #[test]
    fn rejects_bad_files() {
        let base = "grid = \"-1:1:11\"\nreps = 200\nmethods = [\"dm\"]\ntargets = [0.0]\n";
        assert!(parse_scenarios(base).is_err());
        assert!(parse_scenarios(&format!("{base}[a]\nmodel = \"br\"\nalpha = 1.0\n")).is_err());
        assert!(parse_scenarios(&format!("{base}[a]\nmodel = \"br\"\nalpha = 1.0\nv = 1\ncolour = 3\n")).is_err());
        assert!(parse_scenarios(&format!("{base}[a]\nmodel = \"br\"\nalpha = 1.0\nv = 1\ntargets = [1.0]\n")).is_err());
        assert!(parse_scenarios(&format!("{base}[a]\nmodel = \"br\"\nalpha = 1.0\nv = 1\nreps = 10\n")).is_err());
        assert!(parse_scenarios(&format!("{base}[a]\nmodel = \"xx\"\n")).is_err());
    }

    #[test]
    fn presets_parse() {
        let desk = parse_scenarios(preset(Preset::Desk)).unwrap();
        assert_eq!(desk.len(), 10 * 3 * 4);
        assert!(desk.iter().all(|s| s.grid.len() == 101 && s.reps == 2000));
        let full = parse_scenarios(preset(Preset::Full)).unwrap();
        assert!(full.iter().all(|s| s.grid.len() == 501 && s.reps == 50_000));
    }
}
