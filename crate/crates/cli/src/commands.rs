use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use maxstable::assess::{
    assess_by_continuation, assess_reconstruction, assess_surrogate, bound_expected_missing, estimate_p_formula,
    ErrorReport, FormulaLevel, FormulaOptions, PositivePart, RepPlan,
};
use maxstable::bench::{self, plugin_constants, run_benchmark, write_csv, Preset, Scenario};
use maxstable::simulate::{
    extremal_functions, extremal_functions_partial, threshold_stopping, EfConfig, ThresholdConfig,
    DEFAULT_MAX_ITERATIONS,
};
use maxstable::{estimate_theta_sup, Error, ModelKind, RepTag, SpectralSampler, StreamPurpose};

use crate::args::{
    AssessArgs, AssessModeArg, BenchArgs, FormulaLevelArg, CalibrateArgs, ModelArgs, PositivePartArg, SimMethod, SimulateArgs,
    TauSpec, ThetaArgs,
};
use crate::CliError;

type Res<T> = std::result::Result<T, CliError>;

/// Seed given on the command line, or a fresh random one that the output
/// header records.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random::<u64>)
}

/// The invoking command with an explicit seed and without `--threads`, so
/// re-running it reproduces the output byte for byte.
fn replay_command(seed: u64) -> String {
    let mut out = vec!["maxsim".to_string()];
    let mut args = std::env::args().skip(1);
    let mut has_seed = false;
    while let Some(a) = args.next() {
        if a == "--threads" {
            args.next();
            continue;
        }
        if a.starts_with("--threads=") {
            continue;
        }
        has_seed |= a == "--seed" || a.starts_with("--seed=");
        out.push(quote(&a));
    }
    if !has_seed {
        out.push(format!("--seed {seed}"));
    }
    out.join(" ")
}

fn quote(a: &str) -> String {
    if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_.:,=/+".contains(c)) {
        a.to_string()
    } else {
        format!("'{}'", a.replace('\'', r"'\''"))
    }
}

fn header(seed: u64, config: &[String]) -> Vec<String> {
    let mut h = vec![
        format!("maxsim {}", env!("CARGO_PKG_VERSION")),
        format!("command: {}", replay_command(seed)),
        format!("seed: {seed}"),
    ];
    h.extend(config.iter().cloned());
    h
}

fn open_out(path: Option<&Path>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Run(Error::Io(format!("{}: {e}", p.display()))))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_comments(out: &mut dyn Write, lines: &[String]) -> Res<()> {
    for l in lines {
        writeln!(out, "# {l}").map_err(|e| CliError::Run(e.into()))?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Run(e.into())
}

fn rep_for(method: SimMethod, kind: ModelKind) -> Res<RepTag> {
    let rep = match method {
        SimMethod::Dm | SimMethod::Ef => RepTag::SumNorm,
        SimMethod::Sn => RepTag::SupNorm,
        SimMethod::Original => RepTag::Original,
        SimMethod::Shifted => RepTag::Shifted,
        SimMethod::Minvar => RepTag::MinVar,
        SimMethod::ExtremalT => RepTag::ExtremalT,
    };
    let br_only = matches!(rep, RepTag::Original | RepTag::Shifted | RepTag::MinVar);
    if br_only && kind != ModelKind::BrownResnick {
        return Err(CliError::Usage(format!("the {rep} representation needs a Brown-Resnick model")));
    }
    if rep == RepTag::ExtremalT && kind != ModelKind::ExtremalT {
        return Err(CliError::Usage("the extremal-t representation needs an extremal-t model".into()));
    }
    Ok(rep)
}

fn sampler(m: &ModelArgs, rep: RepTag, seed: u64) -> Res<SpectralSampler> {
    let model = m.model().map_err(CliError::Usage)?;
    let grid = m.grid().map_err(CliError::Usage)?;
    Ok(SpectralSampler::with_options(model, grid, rep, &m.sampler_options(seed))?)
}

fn resolve_tau(spec: TauSpec, s: &SpectralSampler, m: &ModelArgs, seed: u64) -> Res<f64> {
    Ok(match spec {
        TauSpec::Exact => s
            .bound()
            .ok_or_else(|| CliError::Usage(format!("the {} representation has no exact threshold", s.rep())))?,
        TauSpec::TimesN(x) => x * s.len() as f64,
        TauSpec::TimesTheta(x) => {
            let theta = match (s.theta(), m.theta) {
                (Some(t), _) => t.value,
                (None, Some(t)) => t,
                (None, None) => estimate_theta_sup(*s.model(), s.grid().clone(), m.theta_pilot, seed)?.value,
            };
            x * theta
        }
        TauSpec::Value(x) => x,
    })
}

fn model_lines(s: &SpectralSampler) -> Vec<String> {
    let mut v = vec![
        format!("model: {}", s.model()),
        format!("grid points: {}", s.len()),
        format!("representation: {}", s.rep()),
    ];
    if let Some(t) = s.theta() {
        v.push(format!(
            "theta: {} (se {}, {})",
            t.value,
            t.se,
            if t.overridden { "fixed".to_string() } else { format!("pilot of {} draws", t.reps) }
        ));
    }
    if let (RepTag::Original, Some(a)) = (s.rep(), s.anchor()) {
        v.push(format!("anchor: {a}"));
    }
    v
}

pub fn simulate(a: SimulateArgs) -> Res<()> {
    let seed = resolve_seed(a.common.seed);
    let kind = a.model.model().map_err(CliError::Usage)?.kind();
    let rep = rep_for(a.method, kind)?;
    let s = sampler(&a.model, rep, seed)?;
    let n = s.len();
    let plan = RepPlan::new(seed, StreamPurpose::Simulation, a.common.reps);
    let mut config = model_lines(&s);
    config.push(format!("method: {:?}", a.method).to_lowercase());
    config.push(format!("replications: {}", a.common.reps));
    let fields = if a.method == SimMethod::Ef {
        if a.tau.is_some() {
            return Err(CliError::Usage("--tau does not apply to the extremal-functions method".into()));
        }
        match a.sites {
            Some(k) => {
                config.push(format!("sites: {k}"));
                plan.run(|rng| extremal_functions_partial(&s, k, DEFAULT_MAX_ITERATIONS, rng).map(|r| r.0))?
            }
            None => plan.run(|rng| extremal_functions(&s, &EfConfig::default(), rng).map(|r| r.0))?,
        }
    } else {
        if a.sites.is_some() {
            return Err(CliError::Usage("--sites applies to the extremal-functions method only".into()));
        }
        let spec = match (a.tau, a.method) {
            (Some(t), _) => t,
            (None, SimMethod::Dm | SimMethod::Sn) => TauSpec::Exact,
            (None, _) => return Err(CliError::Usage(format!("--tau is required for {:?}", a.method).to_lowercase())),
        };
        let tau = resolve_tau(spec, &s, &a.model, seed)?;
        config.push(format!("tau: {tau}"));
        let cfg = ThresholdConfig::new(s.clone(), tau)?;
        plan.run(|rng| threshold_stopping(&cfg, rng).map(|r| r.0))?
    };
    let mut out = open_out(a.common.out.as_deref())?;
    write_comments(&mut out, &header(seed, &config))?;
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = (0..n).map(|i| format!("z_{i}")).collect();
    head.extend(["T", "N_W", "exact"].map(String::from));
    w.write_record(&head).map_err(csv_err)?;
    for f in &fields {
        let mut row: Vec<String> = f.values.iter().map(|v| v.to_string()).collect();
        row.push(f.stopping_time.to_string());
        row.push(f.gaussian_draws.to_string());
        row.push(f.exact.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Run(e.into()))?;
    Ok(())
}

fn opt(e: Option<maxstable::Estimate>) -> [String; 2] {
    match e {
        Some(e) => [e.value.to_string(), e.se.to_string()],
        None => [String::new(), String::new()],
    }
}

pub fn assess_error(a: AssessArgs) -> Res<()> {
    let seed = resolve_seed(a.common.seed);
    let kind = a.model.model().map_err(CliError::Usage)?.kind();
    if a.method == SimMethod::Ef {
        return Err(CliError::Usage("assess-error applies to threshold stopping; use dm, sn or a representation".into()));
    }
    let rep = rep_for(a.method, kind)?;
    let s = sampler(&a.model, rep, seed)?;
    let tau = resolve_tau(a.tau, &s, &a.model, seed)?;
    let plan = RepPlan::new(seed, StreamPurpose::Evaluation, a.common.reps);
    let bounded = matches!(rep, RepTag::SumNorm | RepTag::SupNorm);
    let mode = match a.mode {
        AssessModeArg::Auto if bounded => AssessModeArg::Continuation,
        AssessModeArg::Auto if kind == ModelKind::BrownResnick => AssessModeArg::Reconstruction,
        AssessModeArg::Auto => AssessModeArg::Surrogate,
        m => m,
    };
    let opts = FormulaOptions {
        reps_inner: a.reps_inner,
        positive_part: match a.positive_part {
            PositivePartArg::PerDraw => PositivePart::PerDraw,
            PositivePartArg::OfMean => PositivePart::OfMean,
        },
        level: match a.formula_level {
            FormulaLevelArg::Threshold => FormulaLevel::Threshold,
            FormulaLevelArg::LastPoint => FormulaLevel::LastPoint,
        },
    };
    let report: ErrorReport = match mode {
        AssessModeArg::Continuation => assess_by_continuation(&s, tau, &a.eps, &plan)?,
        AssessModeArg::Surrogate => assess_surrogate(&s, tau, &a.eps, &plan)?,
        AssessModeArg::Reconstruction => assess_reconstruction(&s, tau, &a.eps, &plan)?,
        AssessModeArg::Formula => estimate_p_formula(&s, tau, &a.eps, &opts, &plan)?,
        AssessModeArg::Auto => unreachable!("resolved above"),
    };
    let bound = if a.with_bound {
        Some(bound_expected_missing(
            &s,
            tau,
            &RepPlan::new(seed, StreamPurpose::Auxiliary, a.common.reps),
        )?)
    } else {
        None
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut config = model_lines(&s);
    config.push(format!("mode: {}", report.mode));
    config.push(format!("tau: {tau}"));
    if mode == AssessModeArg::Formula {
        config.push(format!("inner draws: {}", a.reps_inner));
        config.push(format!("formula level: {:?}", opts.level));
    }
    config.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    let mut out = open_out(a.common.out.as_deref())?;
    write_comments(&mut out, &header(seed, &config))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "mode",
        "rep",
        "tau",
        "reps",
        "p_any",
        "se_p_any",
        "mean_missing",
        "se_missing",
        "bound_missing",
        "se_bound",
        "mean_T",
        "se_T",
        "mean_NW",
        "se_NW",
        "eps",
        "p_abs",
        "se_abs",
        "p_rel",
        "se_rel",
    ])
    .map_err(csv_err)?;
    let mut base = vec![
        report.mode.to_string(),
        report.rep.to_string(),
        tau.to_string(),
        report.replications.to_string(),
        report.p_any.value.to_string(),
        report.p_any.se.to_string(),
    ];
    base.extend(opt(report.mean_missing));
    base.extend(opt(bound));
    base.extend(opt(report.mean_t));
    base.extend(opt(report.mean_nw));
    if report.eps.is_empty() {
        let mut row = base.clone();
        row.extend(std::iter::repeat_n(String::new(), 5));
        w.write_record(&row).map_err(csv_err)?;
    }
    for (k, e) in report.eps.iter().enumerate() {
        let mut row = base.clone();
        row.push(e.to_string());
        row.extend([
            report.p_abs[k].value.to_string(),
            report.p_abs[k].se.to_string(),
            report.p_rel[k].value.to_string(),
            report.p_rel[k].se.to_string(),
        ]);
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Run(e.into()))?;
    Ok(())
}

fn report_rows(rows: &[bench::BenchRow]) {
    for r in rows {
        eprintln!(
            "{} {} target {}: {} mean N_W {:.2} achieved error {:.4} ({:.1}s{})",
            r.scenario_id,
            r.method,
            r.target_error,
            r.control,
            r.mean_nw.value,
            r.achieved_error.value,
            r.wall_seconds,
            if r.runaways > 0 { format!(", {} runaways", r.runaways) } else { String::new() }
        );
    }
}

pub fn calibrate(a: CalibrateArgs) -> Res<()> {
    let seed = resolve_seed(a.common.seed);
    let model = a.model.model().map_err(CliError::Usage)?;
    let grid = a.model.grid().map_err(CliError::Usage)?;
    if a.model.theta.is_some() || a.model.anchor.is_some() {
        return Err(CliError::Usage("calibrate estimates theta itself; drop --theta and --anchor".into()));
    }
    let mut sc = Scenario::new("calibrate", model, grid, a.method, a.target, a.common.reps)?;
    if let Some(c) = a.calibration_reps {
        sc.calibration_reps = c;
        sc.validate()?;
    }
    let cal = bench::calibrate(&sc, seed)?;
    let rows = run_benchmark(std::slice::from_ref(&sc), seed)?;
    eprintln!(
        "{}: error {:.4} (se {:.4}) on calibration streams",
        cal.control, cal.measured.value, cal.measured.se
    );
    report_rows(&rows);
    let config = vec![
        format!("model: {model}"),
        format!("grid points: {}", sc.grid.len()),
        format!("method: {}", sc.method),
        format!("target error: {}", sc.target_error),
        format!("replications: {} calibration, {} evaluation", sc.calibration_reps, sc.reps),
    ];
    let out = open_out(a.common.out.as_deref())?;
    write_csv(out, &header(seed, &config), &rows)?;
    Ok(())
}

pub fn bench(a: BenchArgs) -> Res<()> {
    let seed = resolve_seed(a.seed);
    let (text, source) = match (&a.scenarios, &a.preset) {
        (Some(p), None) => (
            std::fs::read_to_string(p).map_err(|e| CliError::Run(Error::Io(format!("{}: {e}", p.display()))))?,
            format!("scenarios: {}", p.display()),
        ),
        (None, Some(name)) => {
            let p: Preset = name.parse()?;
            (bench::preset(p).to_string(), format!("preset: {name}"))
        }
        _ => return Err(CliError::Usage("give exactly one of --scenarios and --preset".into())),
    };
    let mut scenarios = bench::parse_scenarios(&text)?;
    if !a.only.is_empty() {
        if let Some(id) = a.only.iter().find(|id| !scenarios.iter().any(|s| &&s.id == id)) {
            return Err(CliError::Usage(format!("no scenario with id {id:?}")));
        }
        scenarios.retain(|s| a.only.contains(&s.id));
    }
    let rows = run_benchmark(&scenarios, seed)?;
    report_rows(&rows);
    let config = vec![source, format!("rows: {}", rows.len())];
    let out = open_out(a.out.as_deref())?;
    write_csv(out, &header(seed, &config), &rows)?;
    Ok(())
}

pub fn theta(a: ThetaArgs) -> Res<()> {
    let seed = resolve_seed(a.seed);
    let model = a.model.model().map_err(CliError::Usage)?;
    let grid = a.model.grid().map_err(CliError::Usage)?;
    let n = grid.len();
    let (theta, inf_recip) = if a.plugin {
        let c = plugin_constants(model, grid, a.reps, seed)?;
        (c.theta, Some(c.inf_recip))
    } else {
        (estimate_theta_sup(model, grid, a.reps, seed)?.estimate(), None)
    };
    let config = vec![format!("model: {model}"), format!("grid points: {n}"), format!("draws: {}", a.reps)];
    let mut out = open_out(a.out.as_deref())?;
    write_comments(&mut out, &header(seed, &config))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "theta", "se_theta", "inf_recip", "se_inf_recip", "reps"]).map_err(csv_err)?;
    let [ir, se_ir] = opt(inf_recip);
    w.write_record([
        n.to_string(),
        theta.value.to_string(),
        theta.se.to_string(),
        ir,
        se_ir,
        a.reps.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush().map_err(|e| CliError::Run(e.into()))?;
    Ok(())
}
