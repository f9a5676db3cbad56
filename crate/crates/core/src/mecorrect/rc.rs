use super::{AnalysisData, CorrectionResult, Diagnostics, ErrorVariance, Method};
use crate::dataset::{AnalysisSpec, Dataset};
use crate::error::{Error, Result};
use crate::linreg::residual_variance_of;

pub(crate) struct RcParts {
    pub estimate: f64,
    pub factor: f64,
    pub conditional_variance: f64,
}

/// The calibration multiplier `V / (V - tau2)`.
pub fn rc_factor(conditional_variance: f64, tau2: f64) -> Result<f64> {
    if conditional_variance <= tau2 {
        return Err(Error::InfeasibleCorrection {
            tau2,
            variance: conditional_variance,
        });
    }
    Ok(conditional_variance / (conditional_variance - tau2))
}

impl AnalysisData {
    pub(crate) fn rc(&self, tau2: f64) -> Result<RcParts> {
        let naive = self.uncorrected()?.exposure_coefficient();
        let v = residual_variance_of(&self.adjustment_design(), self.exposure())?;
        let factor = rc_factor(v, tau2)?;
        Ok(RcParts {
            estimate: naive * factor,
            factor,
            conditional_variance: v,
        })
    }
}

/// Regression calibration: scales the uncorrected exposure coefficient by
/// `V / (V - tau2)`, where `V` is the residual variance of the exposure given
/// the covariates.
pub fn correct_rc(data: &Dataset, spec: &AnalysisSpec, tau2: &ErrorVariance) -> Result<CorrectionResult> {
    let parts = AnalysisData::new(data, spec)?.rc(tau2.tau2)?;
    Ok(CorrectionResult {
        method: Method::Rc,
        estimate: parts.estimate,
        tau2: tau2.tau2,
        ci: None,
        diagnostics: Diagnostics::Rc {
            correction_factor: parts.factor,
            conditional_variance: parts.conditional_variance,
        },
    })
}
