use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_level, correct_rc, correct_simex, AnalysisData, ConfidenceInterval, CorrectionResult,
    Corrector, ErrorVariance, SimexConfig, Tau2Source,
};
use crate::dataset::{AnalysisSpec, Dataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, DEFAULT_SEED};

/// Minimum number of bootstrap replicates accepted.
pub const MIN_BOOT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 999,
            level: 0.95,
            seed: DEFAULT_SEED,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        check_level(self.level)?;
        if self.n_boot < MIN_BOOT {
            return Err(Error::InvalidConfig(format!(
                "n_boot must be at least {MIN_BOOT}, got {}",
                self.n_boot
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub ci: ConfidenceInterval,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl AnalysisData {
    pub(crate) fn corrected_estimate(
        &self,
        corrector: Corrector,
        tau2: f64,
        simex: &SimexConfig,
    ) -> Result<f64> {
        match corrector {
            Corrector::Rc => self.rc(tau2).map(|p| p.estimate),
            Corrector::Simex => self.simex(tau2, simex).map(|(_, ex)| ex.estimate),
        }
    }

    pub(crate) fn bootstrap(
        &self,
        corrector: Corrector,
        tau2: &ErrorVariance,
        simex: &SimexConfig,
        boot: &BootstrapConfig,
    ) -> Result<BootstrapCi> {
        boot.validate()?;
        if corrector == Corrector::Simex {
            simex.validate()?;
        }
        let n = self.n();
        let outcomes: Vec<Result<f64>> = (0..boot.n_boot)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(boot.seed, b as u64);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let sample = self.resample(&rows);
                let t2 = match tau2.source {
                    Tau2Source::Replicates => sample.tau2_from_replicates()?,
                    Tau2Source::External => tau2.tau2,
                };
                let inner = simex.with_seed(derive_seed(simex.seed, b as u64));
                sample.corrected_estimate(corrector, t2, &inner)
            })
            .collect();

        let mut estimates: Vec<f64> = outcomes.into_iter().filter_map(Result::ok).collect();
        let n_failed = boot.n_boot - estimates.len();
        if n_failed * 10 > boot.n_boot || estimates.is_empty() {
            return Err(Error::BootstrapFailures {
                failed: n_failed,
                total: boot.n_boot,
            });
        }
        estimates.sort_by(f64::total_cmp);
        let alpha = (1.0 - boot.level) / 2.0;
        Ok(BootstrapCi {
            ci: ConfidenceInterval {
                lower: quantile_sorted(&estimates, alpha),
                upper: quantile_sorted(&estimates, 1.0 - alpha),
                level: boot.level,
            },
            n_ok: estimates.len(),
            n_failed,
        })
    }
}

/// Percentile bootstrap interval for a corrected exposure coefficient.
///
/// Rows are resampled with replacement and the full corrector is re-run on
/// each resample. When `tau2` came from replicates it is re-estimated per
/// resample; an external value is held fixed. Individual failures are
/// dropped unless they exceed 10% of replicates.
pub fn bootstrap_ci(
    data: &Dataset,
    spec: &AnalysisSpec,
    corrector: Corrector,
    tau2: &ErrorVariance,
    simex: &SimexConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapCi> {
    AnalysisData::new(data, spec)?.bootstrap(corrector, tau2, simex, boot)
}

/// Point correction plus its bootstrap interval.
pub fn correct_with_ci(
    data: &Dataset,
    spec: &AnalysisSpec,
    corrector: Corrector,
    tau2: &ErrorVariance,
    simex: &SimexConfig,
    boot: &BootstrapConfig,
) -> Result<CorrectionResult> {
    let mut result = match corrector {
        Corrector::Rc => correct_rc(data, spec, tau2)?,
        Corrector::Simex => correct_simex(data, spec, tau2, simex)?,
    };
    result.ci = Some(bootstrap_ci(data, spec, corrector, tau2, simex, boot)?.ci);
    Ok(result)
}
