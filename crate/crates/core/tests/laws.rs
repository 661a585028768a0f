#![allow(clippy::needless_range_loop)]

use maxstable::assess::RepPlan;
use maxstable::gaussian::{factorize, sample_gaussian, CovMatrix};
use maxstable::simulate::{extremal_functions, threshold_stopping, EfConfig, ThresholdConfig};
use maxstable::stats::{ks_critical_1pct, ks_statistic, mean_se, normal_cdf, pairwise_extremal_coefficient};
use maxstable::*;

fn line(n: usize) -> Grid {
    make_grid_1d(-1.0, 1.0, n).unwrap()
}

fn br(alpha: f64, v: f64) -> ModelSpec {
    ModelSpec::brown_resnick_variance(alpha, v).unwrap()
}

#[test]
fn empirical_covariance_matches_input() {
    let c = CovMatrix::from_row_major(3, vec![2.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 0.5]).unwrap();
    let f = factorize(&c).unwrap();
    let mut rng = RngStream::new(4, 0);
    let n = 100_000;
    let mut acc = [[0.0; 3]; 3];
    for _ in 0..n {
        let x = sample_gaussian(&f, &mut rng);
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += x[i] * x[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let e = acc[i][j] / n as f64;
            assert!((e - c.get(i, j)).abs() < 0.02, "entry ({i},{j}): {e} vs {}", c.get(i, j));
        }
    }
}

#[test]
fn rank_one_matrix_factorizes_with_jitter() {
    let a = [1.0, 2.0, -1.0];
    let c = CovMatrix::from_fn(3, |i, j| a[i] * a[j]);
    let f = factorize(&c).unwrap();
    assert!(f.jitter() > 0.0);
    let r = f.reconstruct();
    for i in 0..3 {
        for j in 0..3 {
            let target = c.get(i, j) + if i == j { f.jitter() } else { 0.0 };
            assert!((r.get(i, j) - target).abs() <= 1e-8 * c.max_abs().max(1.0));
        }
    }
}

/// Every spectral representation has unit mean at every site.
#[test]
fn spectral_draws_have_unit_mean() {
    let grid = line(7);
    let reps = 100_000;
    let cases = [
        (br(1.0, 0.5), RepTag::Original),
        (br(1.0, 0.5), RepTag::Shifted),
        (br(1.0, 0.5), RepTag::MinVar),
        (br(1.0, 0.5), RepTag::SumNorm),
        (br(1.0, 0.5), RepTag::SupNorm),
        (ModelSpec::extremal_t(2.0, 1.0).unwrap(), RepTag::ExtremalT),
        (ModelSpec::extremal_t(2.0, 1.0).unwrap(), RepTag::SumNorm),
    ];
    for (model, rep) in cases {
        let s = SpectralSampler::new(model, grid.clone(), rep).unwrap();
        let theta_se = s.theta().map_or(0.0, |t| t.se);
        let draws = RepPlan::new(21, StreamPurpose::Custom(1), reps)
            .run(|rng| Ok(s.sample(rng).values))
            .unwrap();
        for x in 0..grid.len() {
            let col: Vec<f64> = draws.iter().map(|d| d[x]).collect();
            let m = mean_se(&col);
            let tol = 4.0 * (m.se * m.se + theta_se * theta_se).sqrt();
            assert!((m.value - 1.0).abs() <= tol, "{model} {rep} site {x}: mean {m:?}");
        }
    }
}

fn ks_all_sites(fields: &[Vec<f64>], label: &str) {
    let crit = ks_critical_1pct(fields.len());
    for x in 0..fields[0].len() {
        let col: Vec<f64> = fields.iter().map(|f| f[x]).collect();
        let d = ks_statistic(&col, frechet_cdf);
        assert!(d < crit, "{label} site {x}: KS {d} vs {crit}");
    }
}

#[test]
fn exact_samplers_have_frechet_margins() {
    let model = br(1.0, 1.0);
    let grid = line(11);
    let plan = RepPlan::new(3, StreamPurpose::Simulation, 5000);
    let pk = SpectralSampler::new(model, grid.clone(), RepTag::SumNorm).unwrap();
    let ef = plan.run(|rng| Ok(extremal_functions(&pk, &EfConfig::default(), rng)?.0.values)).unwrap();
    ks_all_sites(&ef, "extremal functions");
    let dm = ThresholdConfig::exact(pk.clone()).unwrap();
    let dm = plan.run(|rng| Ok(threshold_stopping(&dm, rng)?.0.values)).unwrap();
    ks_all_sites(&dm, "sum-normalized");
    let sn = ThresholdConfig::exact(pk.with_rep(RepTag::SupNorm).unwrap()).unwrap();
    let sn = plan.run(|rng| Ok(threshold_stopping(&sn, rng)?.0.values)).unwrap();
    ks_all_sites(&sn, "sup-normalized");
}

#[test]
fn two_site_extremal_coefficient_matches_closed_form() {
    for (alpha, v) in [(1.0, 1.0), (0.6, 0.5), (1.8, 0.5)] {
        let model = br(alpha, v);
        let grid = line(2);
        let gamma = model.variogram(grid.distance(0, 1));
        let oracle = 2.0 * normal_cdf(gamma.sqrt() / 2.0);
        let s = SpectralSampler::new(model, grid, RepTag::SumNorm).unwrap();
        let plan = RepPlan::new(5, StreamPurpose::Simulation, 20_000);
        let z = plan.run(|rng| Ok(extremal_functions(&s, &EfConfig::default(), rng)?.0.values)).unwrap();
        let a: Vec<f64> = z.iter().map(|x| x[0]).collect();
        let b: Vec<f64> = z.iter().map(|x| x[1]).collect();
        let est = pairwise_extremal_coefficient(&a, &b);
        assert!(est.covers(oracle, 3.0), "alpha {alpha} v {v}: {est:?} vs {oracle}");
        // the pilot estimate of the sup-norm constant targets the same value
        let theta = s.with_rep(RepTag::SupNorm).unwrap().theta().unwrap();
        assert!((theta.value - oracle).abs() < 3.0 * theta.se, "{theta:?} vs {oracle}");
    }
}

#[test]
fn extremal_t_samplers_agree() {
    let model = ModelSpec::extremal_t(2.0, 0.5).unwrap();
    let grid = line(9);
    let plan = RepPlan::new(6, StreamPurpose::Simulation, 8000);
    let direct = SpectralSampler::new(model, grid.clone(), RepTag::ExtremalT).unwrap();
    let sum = direct.with_rep(RepTag::SumNorm).unwrap();
    let ef = plan.run(|rng| Ok(extremal_functions(&sum, &EfConfig::default(), rng)?.0.values)).unwrap();
    let dm_cfg = ThresholdConfig::exact(sum.clone()).unwrap();
    let dm = plan.run(|rng| Ok(threshold_stopping(&dm_cfg, rng)?.0.values)).unwrap();
    let sn_cfg = ThresholdConfig::exact(sum.with_rep(RepTag::SupNorm).unwrap()).unwrap();
    let sn = plan.run(|rng| Ok(threshold_stopping(&sn_cfg, rng)?.0.values)).unwrap();
    for lag in [1, 4, 8] {
        let coef = |z: &[Vec<f64>]| {
            let a: Vec<f64> = z.iter().map(|x| x[0]).collect();
            let b: Vec<f64> = z.iter().map(|x| x[lag]).collect();
            pairwise_extremal_coefficient(&a, &b)
        };
        let (e, d, s) = (coef(&ef), coef(&dm), coef(&sn));
        assert!(e.agrees_with(&d, 3.0) && e.agrees_with(&s, 3.0) && d.agrees_with(&s, 3.0), "lag {lag}: {e:?} {d:?} {s:?}");
    }
}

#[test]
fn extremal_functions_cost_one_draw_per_site_on_average() {
    let s = SpectralSampler::new(br(1.0, 1.0), line(21), RepTag::SumNorm).unwrap();
    let ts = RepPlan::new(8, StreamPurpose::Simulation, 4000)
        .run(|rng| Ok(extremal_functions(&s, &EfConfig::default(), rng)?.1.stopping_time as f64))
        .unwrap();
    let m = mean_se(&ts);
    assert!(m.covers(21.0, 3.0), "{m:?}");
}

#[test]
fn sum_normalized_cost_matches_inverse_minimum() {
    let n = 21;
    let s = SpectralSampler::new(br(1.0, 1.0), line(n), RepTag::SumNorm).unwrap();
    let plan = RepPlan::new(9, StreamPurpose::Simulation, 4000);
    let inv_min = plan
        .run(|rng| Ok(1.0 / extremal_functions(&s, &EfConfig::default(), rng)?.0.min()))
        .unwrap();
    let cfg = ThresholdConfig::exact(s.clone()).unwrap();
    let ts = RepPlan::new(10, StreamPurpose::Simulation, 4000)
        .run(|rng| Ok(threshold_stopping(&cfg, rng)?.1.stopping_time as f64))
        .unwrap();
    let plug = mean_se(&inv_min);
    let expected = Estimate {
        value: n as f64 * plug.value,
        se: n as f64 * plug.se,
    };
    assert!(mean_se(&ts).agrees_with(&expected, 3.0));
}
