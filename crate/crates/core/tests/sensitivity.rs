use measerr::sensitivity::{plot_csv, sidecar_path, DrawStatus, SensitivityOptions};
use measerr::simstudy::{replicate_name, COL_AGE, COL_OUTCOME};
use measerr::{
    correct_rc, correct_simex, emit_plot_data, generate_dataset, run_sensitivity, AnalysisSpec, BootstrapConfig,
    Corrector, Dataset, ErrorVariance, ErrorVarianceDistribution, ScenarioConfig, SimexConfig,
};

fn setup() -> (Dataset, AnalysisSpec) {
    let data = generate_dataset(&ScenarioConfig::base(), 1).unwrap();
    let spec = AnalysisSpec::new(COL_OUTCOME, (1..=3).map(replicate_name).collect(), vec![COL_AGE.into()]).unwrap();
    (data, spec)
}

fn opts(draws: usize, ci: bool) -> SensitivityOptions {
    SensitivityOptions {
        draws,
        ci,
        simex: SimexConfig { n_sim: 20, ..Default::default() },
        bootstrap: BootstrapConfig { n_boot: 60, ..Default::default() },
        seed: 17,
    }
}

fn triangular() -> ErrorVarianceDistribution {
    ErrorVarianceDistribution::Triangular { min: 20.0, mode: 30.0, max: 40.0 }
}

fn rc_at(data: &Dataset, spec: &AnalysisSpec, tau2: f64) -> f64 {
    correct_rc(data, spec, &ErrorVariance::external(tau2).unwrap()).unwrap().estimate
}

#[test]
fn rc_draws_are_monotone_and_bounded_by_the_prior_support() {
    let (data, spec) = setup();
    let r = run_sensitivity(&data, &spec, &triangular(), Corrector::Rc, &opts(100, false)).unwrap();
    let mut draws = r.draws.clone();
    draws.sort_by(|a, b| a.tau2.total_cmp(&b.tau2));
    assert!(draws.windows(2).all(|w| w[1].estimate.unwrap() >= w[0].estimate.unwrap()));
    let (lo, hi) = (rc_at(&data, &spec, 20.0), rc_at(&data, &spec, 40.0));
    assert!(lo <= r.summary.min && r.summary.max <= hi);
    assert!(r.summary.min <= rc_at(&data, &spec, 30.0) && rc_at(&data, &spec, 30.0) <= r.summary.max);
}

#[test]
fn degenerate_prior_reproduces_single_corrections() {
    let (data, spec) = setup();
    let point = ErrorVarianceDistribution::Uniform { min: 30.0, max: 30.0 };
    let o = opts(3, false);
    let ev = ErrorVariance::external(30.0).unwrap();

    let rc = run_sensitivity(&data, &spec, &point, Corrector::Rc, &o).unwrap();
    for d in &rc.draws {
        assert_eq!(d.tau2, 30.0);
        assert_eq!(d.estimate, Some(correct_rc(&data, &spec, &ev).unwrap().estimate));
    }

    let sx = run_sensitivity(&data, &spec, &point, Corrector::Simex, &o).unwrap();
    for (i, d) in sx.draws.iter().enumerate() {
        let single = correct_simex(&data, &spec, &ev, &o.simex_for_draw(i)).unwrap().estimate;
        assert_eq!(d.estimate, Some(single));
    }
}

#[test]
fn infeasible_draws_are_flagged_not_fatal() {
    let (data, spec) = setup();
    // V is about 80 at base, so the upper part of this prior is infeasible.
    let wide = ErrorVarianceDistribution::Uniform { min: 40.0, max: 120.0 };
    let r = run_sensitivity(&data, &spec, &wide, Corrector::Rc, &opts(50, false)).unwrap();
    assert!(r.summary.n_infeasible > 0 && r.summary.n_ok > 0);
    assert_eq!(r.summary.n_ok + r.summary.n_infeasible, 50);
    for d in &r.draws {
        assert_eq!(d.status == DrawStatus::Infeasible, d.estimate.is_none());
    }
}

#[test]
fn runs_are_deterministic_and_intervals_bracket_estimates() {
    let (data, spec) = setup();
    let a = run_sensitivity(&data, &spec, &triangular(), Corrector::Rc, &opts(8, true)).unwrap();
    let b = run_sensitivity(&data, &spec, &triangular(), Corrector::Rc, &opts(8, true)).unwrap();
    assert_eq!(a, b);
    for d in &a.draws {
        let (lo, hi) = (d.ci_lower.unwrap(), d.ci_upper.unwrap());
        assert!(lo < hi);
    }
}

#[test]
fn emitted_table_round_trips_the_median() {
    let (data, spec) = setup();
    let wide = ErrorVarianceDistribution::Trapezoidal { min: 20.0, lower_mode: 40.0, upper_mode: 60.0, max: 110.0 };
    let r = run_sensitivity(&data, &spec, &wide, Corrector::Rc, &opts(41, false)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sens.csv");
    emit_plot_data(&r, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), plot_csv(&r));

    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["tau2", "estimate", "ci_lower", "ci_upper", "status"]);
    let mut tau_prev = f64::NEG_INFINITY;
    let mut ok = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let tau2: f64 = rec[0].parse().unwrap();
        assert!(tau2 >= tau_prev);
        tau_prev = tau2;
        match &rec[4] {
            "ok" => ok.push(rec[1].parse::<f64>().unwrap()),
            "infeasible" => assert!(rec[1].is_empty() && rec[2].is_empty() && rec[3].is_empty()),
            other => panic!("status {other}"),
        }
    }
    ok.sort_by(f64::total_cmp);
    let n = ok.len();
    let median = if n % 2 == 1 { ok[n / 2] } else { 0.5 * (ok[n / 2 - 1] + ok[n / 2]) };
    assert_eq!(median, r.summary.median);

    let sidecar: serde_json::Value = serde_json::from_slice(&std::fs::read(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar["m"], 41);
    assert_eq!(sidecar["median"].as_f64().unwrap(), r.summary.median);
    assert_eq!(sidecar["n_infeasible"].as_u64().unwrap() as usize, r.summary.n_infeasible);
}
