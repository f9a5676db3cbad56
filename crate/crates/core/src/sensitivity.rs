//! Sensitivity analysis for an unknown error variance.
//!
//! Without replicate or validation data, τ² is given a prior distribution.
//! Each draw from it is fed to a corrector, and the spread of the corrected
//! estimates shows how strongly conclusions depend on the assumed error.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnalysisSpec, Dataset};
use crate::error::{Error, Result};
use crate::io::{fmt_exact, write_all_atomic};
use crate::mecorrect::{
    AnalysisData, BootstrapConfig, Corrector, ErrorVariance, SimexConfig,
};
use crate::rng::{derive_seed, stream};

/// Prior over τ², in exposure-variance units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorVarianceDistribution {
    Uniform {
        min: f64,
        max: f64,
    },
    Triangular {
        min: f64,
        mode: f64,
        max: f64,
    },
    Trapezoidal {
        min: f64,
        lower_mode: f64,
        upper_mode: f64,
        max: f64,
    },
}

impl ErrorVarianceDistribution {
    pub fn validate(&self) -> Result<()> {
        let knots: Vec<f64> = match *self {
            Self::Uniform { min, max } => vec![min, max],
            Self::Triangular { min, mode, max } => vec![min, mode, max],
            Self::Trapezoidal {
                min,
                lower_mode,
                upper_mode,
                max,
            } => vec![min, lower_mode, upper_mode, max],
        };
        if knots.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("distribution parameters must be finite".into()));
        }
        if knots[0] < 0.0 {
            return Err(Error::InvalidConfig("tau2 distribution minimum must be >= 0".into()));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(format!(
                "distribution parameters out of order: {knots:?}"
            )));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { min, max }
            | Self::Triangular { min, max, .. }
            | Self::Trapezoidal { min, max, .. } => (min, max),
        }
    }

    /// Inverse CDF at `u` in [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        if lo == hi {
            return lo;
        }
        let x = match *self {
            Self::Uniform { min, max } => min + u * (max - min),
            Self::Triangular { min, mode, max } => {
                let width = max - min;
                if u < (mode - min) / width {
                    min + (u * width * (mode - min)).sqrt()
                } else {
                    max - ((1.0 - u) * width * (max - mode)).sqrt()
                }
            }
            Self::Trapezoidal {
                min,
                lower_mode,
                upper_mode,
                max,
            } => {
                let height = 2.0 / (max + upper_mode - min - lower_mode);
                let rise = 0.5 * height * (lower_mode - min);
                let flat = rise + height * (upper_mode - lower_mode);
                if u < rise {
                    min + (2.0 * u * (lower_mode - min) / height).sqrt()
                } else if u <= flat {
                    lower_mode + (u - rise) / height
                } else {
                    max - (2.0 * (1.0 - u) * (max - upper_mode) / height).sqrt()
                }
            }
        };
        x.clamp(lo, hi)
    }
}

/// `m` i.i.d. draws by inverse transform of Uniform(0, 1).
pub fn sample_tau2(dist: &ErrorVarianceDistribution, m: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    if m == 0 {
        return Err(Error::InvalidConfig("number of draws must be at least 1".into()));
    }
    let mut rng = stream(seed, 0);
    Ok((0..m).map(|_| dist.quantile(rng.random::<f64>())).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrawStatus {
    Ok,
    Infeasible,
}

impl DrawStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DrawStatus::Ok => "ok",
            DrawStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityDraw {
    pub tau2: f64,
    pub estimate: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub status: DrawStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub n_ok: usize,
    pub n_infeasible: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub method: Corrector,
    pub distribution: ErrorVarianceDistribution,
    /// In sampling order.
    pub draws: Vec<SensitivityDraw>,
    pub summary: SensitivitySummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityOptions {
    pub draws: usize,
    pub ci: bool,
    pub simex: SimexConfig,
    pub bootstrap: BootstrapConfig,
    /// Seed for sampling τ².
    pub seed: u64,
}

impl SensitivityOptions {
    /// SIMEX settings used for draw `i`.
    pub fn simex_for_draw(&self, i: usize) -> SimexConfig {
        self.simex.with_seed(derive_seed(self.simex.seed, i as u64))
    }

    pub fn bootstrap_for_draw(&self, i: usize) -> BootstrapConfig {
        BootstrapConfig {
            seed: derive_seed(self.bootstrap.seed, i as u64),
            ..self.bootstrap
        }
    }
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn summarize(draws: &[SensitivityDraw]) -> Result<SensitivitySummary> {
    let mut ok: Vec<f64> = draws.iter().filter_map(|d| d.estimate).collect();
    if ok.is_empty() {
        return Err(Error::AllDrawsInfeasible(draws.len()));
    }
    ok.sort_by(f64::total_cmp);
    Ok(SensitivitySummary {
        n_ok: ok.len(),
        n_infeasible: draws.len() - ok.len(),
        median: median_sorted(&ok),
        min: ok[0],
        max: ok[ok.len() - 1],
    })
}

/// Corrects the exposure effect once per sampled τ².
///
/// Draw `i` runs SIMEX with [`SensitivityOptions::simex_for_draw`] and, when
/// intervals are requested, bootstraps with
/// [`SensitivityOptions::bootstrap_for_draw`]. Infeasible RC draws are
/// flagged and excluded from the summary.
pub fn run_sensitivity(
    data: &Dataset,
    spec: &AnalysisSpec,
    dist: &ErrorVarianceDistribution,
    method: Corrector,
    opts: &SensitivityOptions,
) -> Result<SensitivityResult> {
    let prepared = AnalysisData::new(data, spec)?;
    if method == Corrector::Simex {
        opts.simex.validate()?;
    }
    if opts.ci {
        opts.bootstrap.validate()?;
    }
    let tau2s = sample_tau2(dist, opts.draws, opts.seed)?;

    let draws: Vec<SensitivityDraw> = tau2s
        .par_iter()
        .enumerate()
        .map(|(i, &tau2)| {
            let simex = opts.simex_for_draw(i);
            let estimate = match prepared.corrected_estimate(method, tau2, &simex) {
                Ok(e) => e,
                Err(Error::InfeasibleCorrection { .. }) => {
                    return Ok(SensitivityDraw {
                        tau2,
                        estimate: None,
                        ci_lower: None,
                        ci_upper: None,
                        status: DrawStatus::Infeasible,
                    })
                }
                Err(e) => return Err(e),
            };
            let (ci_lower, ci_upper) = if opts.ci {
                let ev = ErrorVariance::external(tau2)?;
                match prepared.bootstrap(method, &ev, &simex, &opts.bootstrap_for_draw(i)) {
                    Ok(b) => (Some(b.ci.lower), Some(b.ci.upper)),
                    Err(Error::BootstrapFailures { .. }) => (None, None),
                    Err(e) => return Err(e),
                }
            } else {
                (None, None)
            };
            Ok(SensitivityDraw {
                tau2,
                estimate: Some(estimate),
                ci_lower,
                ci_upper,
                status: DrawStatus::Ok,
            })
        })
        .collect::<Result<_>>()?;

    let summary = summarize(&draws)?;
    Ok(SensitivityResult {
        method,
        distribution: *dist,
        draws,
        summary,
    })
}

#[derive(Serialize)]
struct SidecarSummary<'a> {
    method: Corrector,
    m: usize,
    distribution: &'a ErrorVarianceDistribution,
    n_ok: usize,
    n_infeasible: usize,
    median: f64,
    min: f64,
    max: f64,
}

/// Renders the plot table: one row per draw, sorted by τ² ascending.
pub fn plot_csv(result: &SensitivityResult) -> Vec<u8> {
    let mut rows: Vec<&SensitivityDraw> = result.draws.iter().collect();
    rows.sort_by(|a, b| a.tau2.total_cmp(&b.tau2));
    let cell = |v: Option<f64>| v.map(fmt_exact).unwrap_or_default();
    let mut out = String::from("tau2,estimate,ci_lower,ci_upper,status\n");
    for d in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_exact(d.tau2),
            cell(d.estimate),
            cell(d.ci_lower),
            cell(d.ci_upper),
            d.status.as_str()
        ));
    }
    out.into_bytes()
}

/// Path of the JSON summary written next to a plot CSV.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes the plot CSV at `path` and a JSON summary at
/// [`sidecar_path`]`(path)`.
pub fn emit_plot_data(result: &SensitivityResult, path: &Path) -> Result<()> {
    if result.draws.is_empty() {
        return Err(Error::InvalidConfig("empty sensitivity result".into()));
    }
    let sidecar = SidecarSummary {
        method: result.method,
        m: result.draws.len(),
        distribution: &result.distribution,
        n_ok: result.summary.n_ok,
        n_infeasible: result.summary.n_infeasible,
        median: result.summary.median,
        min: result.summary.min,
        max: result.summary.max,
    };
    let json = serde_json::to_vec_pretty(&sidecar)?;
    write_all_atomic(&[
        (path.to_path_buf(), plot_csv(result)),
        (sidecar_path(path), json),
    ])
}
