use rand_distr::{Distribution, StandardNormal};

use super::{
    ScenarioConfig, AGE_EFFECT, AGE_MEAN, AGE_VAR, BP_COND_VAR, BP_INTERCEPT, OUTCOME_INTERCEPT,
    TRUE_EFFECT,
};
use crate::dataset::{AnalysisSpec, Dataset};
use crate::error::Result;
use crate::rng::{derive_seed, stream};

pub const COL_OUTCOME: &str = "creatinine";
pub const COL_AGE: &str = "age";

pub fn replicate_name(j: usize) -> String {
    format!("bp_star_{j}")
}

impl ScenarioConfig {
    /// Outcome `creatinine`, exposure replicates `bp_star_1..k`, covariate `age`.
    pub fn analysis_spec(&self) -> AnalysisSpec {
        AnalysisSpec {
            outcome: COL_OUTCOME.into(),
            exposure_replicates: (1..=self.k).map(replicate_name).collect(),
            covariates: vec![COL_AGE.into()],
        }
    }

    pub(crate) fn rep_seed(&self, rep_index: u64) -> u64 {
        derive_seed(self.seed, rep_index)
    }
}

/// Simulates one dataset for repetition `rep_index`.
pub fn generate_dataset(cfg: &ScenarioConfig, rep_index: u64) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = stream(cfg.rep_seed(rep_index), 0);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };

    let (n, k) = (cfg.n, cfg.k);
    let age_sd = AGE_VAR.sqrt();
    let bp_sd = BP_COND_VAR.sqrt();
    let err_sd = cfg.tau2.sqrt();
    let out_sd = cfg.sigma2.sqrt();

    let mut outcome = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut reps = vec![Vec::with_capacity(n); k];
    for _ in 0..n {
        let a = AGE_MEAN + age_sd * z();
        let bp = BP_INTERCEPT + cfg.gamma * a + bp_sd * z();
        for r in reps.iter_mut() {
            r.push(bp + err_sd * z());
        }
        outcome.push(OUTCOME_INTERCEPT + TRUE_EFFECT * bp + AGE_EFFECT * a + out_sd * z());
        age.push(a);
    }

    let mut names = vec![COL_OUTCOME.to_string()];
    names.extend((1..=k).map(replicate_name));
    names.push(COL_AGE.into());
    let mut columns = vec![outcome];
    columns.extend(reps);
    columns.push(age);
    Dataset::from_columns(names, columns)
}
