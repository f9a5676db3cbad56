use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PerformanceSummary, ScenarioConfig};
use crate::error::Result;
use crate::io::{fmt_exact, write_all_atomic};

/// A one-knob departure from the base scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Reliability,
    SampleSize,
    Replicates,
    RSquared,
    CovariateDependency,
}

impl Sweep {
    pub const ALL: [Sweep; 5] = [
        Sweep::Reliability,
        Sweep::SampleSize,
        Sweep::Replicates,
        Sweep::RSquared,
        Sweep::CovariateDependency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Reliability => "reliability",
            Sweep::SampleSize => "sample_size",
            Sweep::Replicates => "replicates",
            Sweep::RSquared => "r_squared",
            Sweep::CovariateDependency => "covariate_dependency",
        }
    }

    pub fn knob(self) -> &'static str {
        match self {
            Sweep::Reliability => "tau2",
            Sweep::SampleSize => "n",
            Sweep::Replicates => "k",
            Sweep::RSquared => "sigma2",
            Sweep::CovariateDependency => "gamma",
        }
    }

    pub fn knob_value(self, cfg: &ScenarioConfig) -> f64 {
        match self {
            Sweep::Reliability => cfg.tau2,
            Sweep::SampleSize => cfg.n as f64,
            Sweep::Replicates => cfg.k as f64,
            Sweep::RSquared => cfg.sigma2,
            Sweep::CovariateDependency => cfg.gamma,
        }
    }

    /// The sweep `cfg` belongs to, if it differs from base in exactly one knob.
    pub fn classify(cfg: &ScenarioConfig) -> Option<Sweep> {
        let base = ScenarioConfig::base();
        let differing: Vec<Sweep> = Sweep::ALL
            .into_iter()
            .filter(|s| s.knob_value(cfg) != s.knob_value(&base))
            .collect();
        match differing.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }

    fn includes(self, cfg: &ScenarioConfig) -> bool {
        cfg.is_base() || Sweep::classify(cfg) == Some(self)
    }
}

pub const SWEEP_HEADER: &str = "sweep,knob,knob_value,is_base,method,mean_estimate,bias,bias_mcse,\
percent_bias,percent_bias_mcse,mse,mse_mcse,coverage,coverage_mcse,reliability,n_reps_used,n_failures";

/// One sweep's table, rows ordered by knob value then method. Returns
/// `None` when no summary belongs to the sweep.
pub fn sweep_csv(sweep: Sweep, summaries: &[PerformanceSummary]) -> Option<String> {
    let mut members: Vec<&PerformanceSummary> =
        summaries.iter().filter(|s| sweep.includes(&s.config)).collect();
    if members.is_empty() {
        return None;
    }
    members.sort_by(|a, b| sweep.knob_value(&a.config).total_cmp(&sweep.knob_value(&b.config)));
    let opt = |v: Option<f64>| v.map(fmt_exact).unwrap_or_default();
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for s in members {
        for m in &s.methods {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                sweep.name(),
                sweep.knob(),
                fmt_exact(sweep.knob_value(&s.config)),
                s.config.is_base(),
                m.method,
                fmt_exact(m.mean_estimate),
                fmt_exact(m.bias),
                fmt_exact(m.bias_mcse),
                fmt_exact(m.percent_bias),
                fmt_exact(m.percent_bias_mcse),
                fmt_exact(m.mse),
                fmt_exact(m.mse_mcse),
                opt(m.coverage),
                opt(m.coverage_mcse),
                fmt_exact(s.derived.reliability),
                s.n_reps_used,
                s.n_failures,
            ));
        }
    }
    Some(out)
}

/// Writes `<sweep>.csv` for every populated sweep plus `summaries.json` into
/// `dir`. Returns the paths written.
pub fn emit_study_report(summaries: &[PerformanceSummary], dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files = Vec::new();
    for sweep in Sweep::ALL {
        if let Some(csv) = sweep_csv(sweep, summaries) {
            files.push((dir.join(format!("{}.csv", sweep.name())), csv.into_bytes()));
        }
    }
    files.push((dir.join("summaries.json"), serde_json::to_vec_pretty(summaries)?));
    write_all_atomic(&files)?;
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
