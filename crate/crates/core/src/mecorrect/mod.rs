//! Correction of an exposure coefficient for classical (random, additive)
//! measurement error.
//!
//! The error variance τ² is either estimated from replicate measurements or
//! supplied externally. Two correctors are provided: regression calibration
//! ([`correct_rc`]) and simulation-extrapolation ([`correct_simex`]). Both
//! correct only the exposure coefficient. Percentile bootstrap intervals come
//! from [`bootstrap_ci`].

mod bootstrap;
mod rc;
mod simex;

pub use bootstrap::{bootstrap_ci, correct_with_ci, BootstrapCi, BootstrapConfig, MIN_BOOT};
pub use rc::{correct_rc, rc_factor};
pub use simex::{
    correct_simex, extrapolate, simex_estimates_per_lambda, Extrapolant, Extrapolation, SimexConfig,
    SimexPoint,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{design_from_columns, AnalysisSpec, Dataset};
use crate::error::{Error, Result};
use crate::linreg::{ols_fit, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau2Source {
    Replicates,
    External,
}

/// Variance of the additive error on a single exposure measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorVariance {
    pub tau2: f64,
    pub source: Tau2Source,
}

impl ErrorVariance {
    pub fn external(tau2: f64) -> Result<Self> {
        if !(tau2.is_finite() && tau2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau2 must be finite and nonnegative, got {tau2}"
            )));
        }
        Ok(Self {
            tau2,
            source: Tau2Source::External,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Uncorrected,
    Rc,
    Simex,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Uncorrected, Method::Rc, Method::Simex];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Uncorrected => "uncorrected",
            Method::Rc => "rc",
            Method::Simex => "simex",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A measurement-error corrector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corrector {
    Rc,
    Simex,
}

impl From<Corrector> for Method {
    fn from(c: Corrector) -> Self {
        match c {
            Corrector::Rc => Method::Rc,
            Corrector::Simex => Method::Simex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Diagnostics {
    Uncorrected {
        standard_error: f64,
    },
    Rc {
        correction_factor: f64,
        /// Residual variance of the exposure given the covariates (V).
        conditional_variance: f64,
    },
    Simex {
        points: Vec<SimexPoint>,
        extrapolant: Extrapolant,
        coefficients: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub method: Method,
    pub estimate: f64,
    pub tau2: f64,
    pub ci: Option<ConfidenceInterval>,
    pub diagnostics: Diagnostics,
}

/// The columns an analysis touches, pulled out of a [`Dataset`] so that
/// bootstrap resamples are cheap to build.
#[derive(Debug, Clone)]
pub(crate) struct AnalysisData {
    pub y: Vec<f64>,
    /// All replicate measurements; `replicates[0]` is the analysed exposure.
    pub replicates: Vec<Vec<f64>>,
    pub covariates: Vec<Vec<f64>>,
}

impl AnalysisData {
    pub fn new(data: &Dataset, spec: &AnalysisSpec) -> Result<Self> {
        spec.validate(data)?;
        let owned = |name: &String| data.column(name).map(<[f64]>::to_vec);
        Ok(Self {
            y: data.column(&spec.outcome)?.to_vec(),
            replicates: spec
                .exposure_replicates
                .iter()
                .map(owned)
                .collect::<Result<_>>()?,
            covariates: spec.covariates.iter().map(owned).collect::<Result<_>>()?,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn exposure(&self) -> &[f64] {
        &self.replicates[0]
    }

    pub fn covariate_slices(&self) -> Vec<&[f64]> {
        self.covariates.iter().map(Vec::as_slice).collect()
    }

    /// `[1, exposure, covariates...]`.
    pub fn outcome_design(&self) -> DMatrix<f64> {
        let mut cols: Vec<&[f64]> = vec![self.exposure()];
        cols.extend(self.covariate_slices());
        design_from_columns(self.n(), &cols)
    }

    /// `[1, covariates...]`.
    pub fn adjustment_design(&self) -> DMatrix<f64> {
        design_from_columns(self.n(), &self.covariate_slices())
    }

    pub fn resample(&self, rows: &[usize]) -> Self {
        let pick = |c: &Vec<f64>| rows.iter().map(|&i| c[i]).collect();
        Self {
            y: pick(&self.y),
            replicates: self.replicates.iter().map(pick).collect(),
            covariates: self.covariates.iter().map(pick).collect(),
        }
    }

    pub fn tau2_from_replicates(&self) -> Result<f64> {
        let k = self.replicates.len();
        if k < 2 {
            return Err(Error::InsufficientReplicates(k));
        }
        let n = self.n();
        let mut total = 0.0;
        for i in 0..n {
            let mean = self.replicates.iter().map(|r| r[i]).sum::<f64>() / k as f64;
            let ss: f64 = self.replicates.iter().map(|r| (r[i] - mean).powi(2)).sum();
            total += ss / (k - 1) as f64;
        }
        Ok(total / n as f64)
    }

    pub fn uncorrected(&self) -> Result<FitResult> {
        ols_fit(&self.outcome_design(), &self.y)
    }
}

/// Mean within-row sample variance of the replicate measurements.
pub fn estimate_tau2_from_replicates(data: &Dataset, spec: &AnalysisSpec) -> Result<ErrorVariance> {
    let tau2 = AnalysisData::new(data, spec)?.tau2_from_replicates()?;
    Ok(ErrorVariance {
        tau2,
        source: Tau2Source::Replicates,
    })
}

/// OLS of the outcome on the first replicate and the covariates.
pub fn fit_uncorrected(data: &Dataset, spec: &AnalysisSpec) -> Result<FitResult> {
    AnalysisData::new(data, spec)?.uncorrected()
}

/// Normal-theory interval for the exposure coefficient, using the t
/// distribution with n - p degrees of freedom.
pub fn wald_ci(fit: &FitResult, level: f64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let dof = (fit.n - fit.p) as f64;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    let est = fit.exposure_coefficient();
    let half = t * fit.exposure_standard_error();
    Ok(ConfidenceInterval {
        lower: est - half,
        upper: est + half,
        level,
    })
}

/// The uncorrected estimate packaged as a [`CorrectionResult`] with its Wald
/// interval.
pub fn uncorrected_result(data: &Dataset, spec: &AnalysisSpec, level: f64) -> Result<CorrectionResult> {
    let fit = fit_uncorrected(data, spec)?;
    Ok(CorrectionResult {
        method: Method::Uncorrected,
        estimate: fit.exposure_coefficient(),
        tau2: 0.0,
        ci: Some(wald_ci(&fit, level)?),
        diagnostics: Diagnostics::Uncorrected {
            standard_error: fit.exposure_standard_error(),
        },
    })
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )))
    }
}
