use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, ScenarioDerived, TRUE_EFFECT};
use crate::error::{Error, Result};
use crate::mecorrect::{
    wald_ci, AnalysisData, BootstrapConfig, ConfidenceInterval, Corrector, ErrorVariance, Method,
    SimexConfig, Tau2Source,
};
use crate::rng::derive_seed;

/// How each repetition is analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub methods: Vec<Method>,
    /// Seed is overridden per repetition.
    pub simex: SimexConfig,
    /// Bootstrap settings for corrected-method intervals; seed is overridden
    /// per repetition. `None` leaves corrected methods without intervals.
    pub bootstrap: Option<BootstrapConfig>,
    /// Correctors that get a bootstrap interval when `bootstrap` is set.
    pub bootstrap_methods: Vec<Corrector>,
    /// Level of the uncorrected Wald interval.
    pub level: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            simex: SimexConfig::default(),
            bootstrap: None,
            bootstrap_methods: vec![Corrector::Rc],
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodPerformance {
    pub method: Method,
    pub mean_estimate: f64,
    pub mean_estimate_mcse: f64,
    pub bias: f64,
    pub bias_mcse: f64,
    pub percent_bias: f64,
    pub percent_bias_mcse: f64,
    pub mse: f64,
    pub mse_mcse: f64,
    /// `None` when the method produced no intervals.
    pub coverage: Option<f64>,
    pub coverage_mcse: Option<f64>,
    /// Standard deviation of the estimates across repetitions.
    pub empirical_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub config: ScenarioConfig,
    pub derived: ScenarioDerived,
    pub n_reps_used: usize,
    pub n_failures: usize,
    pub mean_tau2_hat: f64,
    pub methods: Vec<MethodPerformance>,
}

impl PerformanceSummary {
    pub fn method(&self, m: Method) -> Option<&MethodPerformance> {
        self.methods.iter().find(|p| p.method == m)
    }
}

struct RepOutcome {
    tau2_hat: f64,
    estimates: Vec<f64>,
    cis: Vec<Option<ConfidenceInterval>>,
}

fn sd(values: &[f64], mean: f64) -> f64 {
    let dof = values.len().saturating_sub(1).max(1) as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dof).sqrt()
}

/// Bias, MSE and coverage of a set of estimates of `truth`, with Monte
/// Carlo standard errors.
pub(crate) fn performance(
    method: Method,
    estimates: &[f64],
    covered: Option<&[bool]>,
    truth: f64,
) -> MethodPerformance {
    let r = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let empirical_se = sd(estimates, mean);
    let se_mean = empirical_se / r.sqrt();
    let sq: Vec<f64> = estimates.iter().map(|e| (e - truth).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / r;
    let coverage = covered.map(|c| c.iter().filter(|&&b| b).count() as f64 / c.len() as f64);
    MethodPerformance {
        method,
        mean_estimate: mean,
        mean_estimate_mcse: se_mean,
        bias: mean - truth,
        bias_mcse: se_mean,
        percent_bias: 100.0 * (mean - truth) / truth,
        percent_bias_mcse: 100.0 * se_mean / truth.abs(),
        mse,
        mse_mcse: sd(&sq, mse) / r.sqrt(),
        coverage,
        coverage_mcse: coverage.map(|c| (c * (1.0 - c) / r).sqrt()),
        empirical_se,
    }
}

fn run_rep(cfg: &ScenarioConfig, rep: u64, opts: &StudyOptions) -> Result<RepOutcome> {
    let data = super::generate_dataset(cfg, rep)?;
    let prepared = AnalysisData::new(&data, &cfg.analysis_spec())?;
    let tau2_hat = prepared.tau2_from_replicates()?;
    let rep_seed = cfg.rep_seed(rep);
    let simex = opts.simex.with_seed(derive_seed(rep_seed, 1));
    let ev = ErrorVariance {
        tau2: tau2_hat,
        source: Tau2Source::Replicates,
    };

    let mut estimates = Vec::with_capacity(opts.methods.len());
    let mut cis = Vec::with_capacity(opts.methods.len());
    for &method in &opts.methods {
        let corrector = match method {
            Method::Uncorrected => {
                let fit = prepared.uncorrected()?;
                estimates.push(fit.exposure_coefficient());
                cis.push(Some(wald_ci(&fit, opts.level)?));
                continue;
            }
            Method::Rc => Corrector::Rc,
            Method::Simex => Corrector::Simex,
        };
        estimates.push(prepared.corrected_estimate(corrector, tau2_hat, &simex)?);
        let ci = match opts.bootstrap {
            Some(boot) if opts.bootstrap_methods.contains(&corrector) => {
                let stream_tag = if corrector == Corrector::Rc { 2 } else { 3 };
                let boot = BootstrapConfig {
                    seed: derive_seed(rep_seed, stream_tag),
                    ..boot
                };
                Some(prepared.bootstrap(corrector, &ev, &simex, &boot)?.ci)
            }
            _ => None,
        };
        cis.push(ci);
    }
    Ok(RepOutcome {
        tau2_hat,
        estimates,
        cis,
    })
}

/// Runs every repetition of a scenario and summarizes performance.
///
/// Each repetition generates data, estimates τ² from the replicates, and
/// analyses the first replicate only. A repetition in which any requested
/// method fails (typically an infeasible RC correction) is dropped from all
/// methods and counted in `n_failures`; more than 10% failures abort the
/// scenario.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &StudyOptions) -> Result<PerformanceSummary> {
    cfg.validate()?;
    if opts.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    if opts.methods.contains(&Method::Simex) {
        opts.simex.validate()?;
    }
    if let Some(boot) = &opts.bootstrap {
        boot.validate()?;
    }

    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(cfg, rep, opts))
        .collect();
    let used: Vec<RepOutcome> = outcomes.into_iter().filter_map(Result::ok).collect();
    let n_failures = cfg.n_reps - used.len();
    if n_failures * 10 > cfg.n_reps || used.is_empty() {
        return Err(Error::ScenarioFailures {
            failed: n_failures,
            total: cfg.n_reps,
        });
    }

    let methods = opts
        .methods
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let est: Vec<f64> = used.iter().map(|o| o.estimates[j]).collect();
            let covered: Option<Vec<bool>> = used
                .iter()
                .map(|o| o.cis[j].map(|ci| ci.contains(TRUE_EFFECT)))
                .collect();
            performance(m, &est, covered.as_deref(), TRUE_EFFECT)
        })
        .collect();

    Ok(PerformanceSummary {
        config: *cfg,
        derived: cfg.derived(),
        n_reps_used: used.len(),
        n_failures,
        mean_tau2_hat: used.iter().map(|o| o.tau2_hat).sum::<f64>() / used.len() as f64,
        methods,
    })
}
