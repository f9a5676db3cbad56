//! Large-sample consistency of the estimators on data from the study model.

use measerr::mecorrect::Diagnostics;
use measerr::simstudy::{replicate_name, COL_AGE, COL_OUTCOME};
use measerr::{
    correct_rc, correct_simex, design_matrix, estimate_tau2_from_replicates, fit_uncorrected, generate_dataset,
    residual_variance_of, simex_estimates_per_lambda, AnalysisSpec, Dataset, ErrorVariance, ScenarioConfig,
    SimexConfig,
};

fn base_spec() -> AnalysisSpec {
    AnalysisSpec::new(COL_OUTCOME, (1..=3).map(replicate_name).collect(), vec![COL_AGE.into()]).unwrap()
}

fn big(n: usize) -> Dataset {
    generate_dataset(&ScenarioConfig { n, ..ScenarioConfig::base() }, 0).unwrap()
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

fn var(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Independent base-scenario datasets of 10^5 rows.
///
/// With sigma2 = 100 a single dataset of this size estimates the uncorrected
/// slope with a standard deviation near 0.0035, about 2.8% of 0.125, so
/// level checks against the large-sample oracles average over datasets.
const N_DATASETS: u64 = 16;

fn datasets() -> impl Iterator<Item = Dataset> {
    let cfg = ScenarioConfig { n: 100_000, ..ScenarioConfig::base() };
    (0..N_DATASETS).map(move |rep| generate_dataset(&cfg, rep).unwrap())
}

#[test]
fn conditional_variance_error_variance_and_attenuation() {
    let data = big(100_000);
    let spec = base_spec();

    let z = design_matrix(&data, COL_AGE, &[]).unwrap();
    let v = residual_variance_of(&z, data.column(&replicate_name(1)).unwrap()).unwrap();
    assert!(within(v, 80.0, 0.01), "V = {v}");

    let tau2 = estimate_tau2_from_replicates(&data, &spec).unwrap().tau2;
    assert!(within(tau2, 30.0, 0.01), "tau2 = {tau2}");

    let rc = correct_rc(&data, &spec, &ErrorVariance::external(30.0).unwrap()).unwrap();
    let naive = fit_uncorrected(&data, &spec).unwrap().exposure_coefficient();
    assert!(within(rc.estimate, naive * v / (v - 30.0), 1e-12));
    match rc.diagnostics {
        Diagnostics::Rc { conditional_variance, .. } => assert_eq!(conditional_variance, v),
        other => panic!("unexpected diagnostics {other:?}"),
    }
}

#[test]
fn uncorrected_slope_is_attenuated_by_five_eighths() {
    let spec = base_spec();
    let slopes: Vec<f64> = datasets()
        .map(|d| fit_uncorrected(&d, &spec).unwrap().exposure_coefficient())
        .collect();
    for b in &slopes {
        assert!((b - 0.125).abs() < 4.0 * 0.0036, "{b}");
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    assert!(within(mean, 0.125, 0.02), "mean uncorrected slope {mean}");
}

#[test]
fn simex_follows_the_attenuation_curve() {
    let spec = base_spec();
    let tau2 = ErrorVariance::external(30.0).unwrap();
    let cfg = SimexConfig::default();
    let mut mean_points = [0.0; 5];
    let mut mean_simex = 0.0;
    for (rep, data) in datasets().enumerate() {
        let cfg = cfg.with_seed(rep as u64);
        let points = simex_estimates_per_lambda(&data, &spec, &tau2, &cfg).unwrap();
        assert_eq!(points.len(), 5);
        assert!(points.windows(2).all(|w| w[1].estimate < w[0].estimate));
        // Relative to this dataset's own uncorrected slope the decay is V / (V + lambda tau2).
        let z = design_matrix(&data, COL_AGE, &[]).unwrap();
        let v = residual_variance_of(&z, data.column(&replicate_name(1)).unwrap()).unwrap();
        for p in &points {
            let ratio = p.estimate / points[0].estimate;
            assert!(within(ratio, v / (v + p.lambda * 30.0), 0.01), "lambda {}: ratio {ratio}", p.lambda);
        }
        for (m, p) in mean_points.iter_mut().zip(&points) {
            *m += p.estimate / N_DATASETS as f64;
        }
        mean_simex += correct_simex(&data, &spec, &tau2, &cfg).unwrap().estimate / N_DATASETS as f64;
    }
    for (m, lambda) in mean_points.iter().zip(cfg.lambda_grid.iter()) {
        let want = 0.2 * 50.0 / (50.0 + (1.0 + lambda) * 30.0);
        assert!(within(*m, want, 0.02), "lambda {lambda}: {m} vs {want}");
    }
    assert!((mean_simex - 0.173).abs() < 0.005, "mean simex {mean_simex}");
}

#[test]
fn error_free_data_is_not_attenuated() {
    let cfg = ScenarioConfig { n: 100_000, tau2: 0.0, ..ScenarioConfig::base() };
    let data = generate_dataset(&cfg, 0).unwrap();
    let b = fit_uncorrected(&data, &base_spec()).unwrap().exposure_coefficient();
    // sampling sd is sqrt(100 / (1e5 * 50)) = 0.0045
    assert!((b - 0.2).abs() < 4.0 * 0.0045, "{b}");
}

#[test]
fn moments_at_one_million_rows() {
    let data = big(1_000_000);
    let age = var(data.column(COL_AGE).unwrap());
    let bp = var(data.column(&replicate_name(1)).unwrap());
    assert!(within(age, 25.0, 0.01), "Var(age) = {age}");
    assert!(within(bp, 80.0, 0.01), "Var(bp*) = {bp}");

    // Outcome variance is explained + sigma2, so R^2 = 1 - sigma2 / Var(y).
    let r2 = 1.0 - 100.0 / var(data.column(COL_OUTCOME).unwrap());
    let want = ScenarioConfig::base().derived().r_squared;
    assert!((r2 - want).abs() < 0.005, "R^2 {r2} vs {want}");
}

#[test]
fn reliability_under_covariate_dependency() {
    let cfg = ScenarioConfig { n: 1_000_000, gamma: 4.0, ..ScenarioConfig::base() };
    let data = generate_dataset(&cfg, 0).unwrap();
    let a = data.column(&replicate_name(1)).unwrap();
    let b = data.column(&replicate_name(2)).unwrap();
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let rel = cov / var(a);
    assert!(within(rel, 0.9375, 0.01), "reliability {rel}");
    assert!((cfg.derived().reliability - 0.9375).abs() < 1e-12);
}

#[test]
fn corrections_are_scale_equivariant() {
    let data = generate_dataset(&ScenarioConfig { n: 400, ..ScenarioConfig::base() }, 3).unwrap();
    let spec = base_spec();
    let c = 2.5;
    let scaled_cols: Vec<Vec<f64>> = data
        .column_names()
        .iter()
        .map(|name| {
            let col = data.column(name).unwrap();
            if name.starts_with("bp_star") {
                col.iter().map(|v| v * c).collect()
            } else {
                col.to_vec()
            }
        })
        .collect();
    let scaled = Dataset::from_columns(data.column_names().to_vec(), scaled_cols).unwrap();

    let t = estimate_tau2_from_replicates(&data, &spec).unwrap();
    let ts = estimate_tau2_from_replicates(&scaled, &spec).unwrap();
    assert!(within(ts.tau2, c * c * t.tau2, 1e-12));

    let rc = correct_rc(&data, &spec, &t).unwrap().estimate;
    let rcs = correct_rc(&scaled, &spec, &ts).unwrap().estimate;
    assert!(within(rcs * c, rc, 1e-10), "{rcs} * {c} vs {rc}");

    // Added noise scales with tau2, so the same seed gives the same pseudo data up to c.
    let cfg = SimexConfig { n_sim: 10, ..Default::default() };
    let sx = correct_simex(&data, &spec, &t, &cfg).unwrap().estimate;
    let sxs = correct_simex(&scaled, &spec, &ts, &cfg).unwrap().estimate;
    assert!(within(sxs * c, sx, 1e-9), "{sxs} * {c} vs {sx}");
}
