//! Monte Carlo study of the correctors under a known data-generating model.
//!
//! Age ~ N(32, 25), BP | Age ~ N(120 + γ Age, 50), each replicate
//! BP*_j ~ N(BP, τ²), and Creatinine ~ N(30 + 0.2 BP + 0.2 Age, σ²). The
//! second parameter of every normal is a variance. The estimand is the BP
//! coefficient, 0.2.

mod dgm;
mod metrics;
mod report;

pub use dgm::{generate_dataset, replicate_name, COL_AGE, COL_OUTCOME};
pub use metrics::{run_scenario, MethodPerformance, PerformanceSummary, StudyOptions};
pub use report::{emit_study_report, sweep_csv, Sweep};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::DEFAULT_SEED;

/// True exposure effect in the outcome model.
pub const TRUE_EFFECT: f64 = 0.2;
pub const AGE_MEAN: f64 = 32.0;
pub const AGE_VAR: f64 = 25.0;
pub const BP_INTERCEPT: f64 = 120.0;
/// Var(BP | Age).
pub const BP_COND_VAR: f64 = 50.0;
pub const OUTCOME_INTERCEPT: f64 = 30.0;
pub const AGE_EFFECT: f64 = 0.2;
pub const DEFAULT_REPS: usize = 1000;

fn default_reps() -> usize {
    DEFAULT_REPS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub tau2: f64,
    pub n: usize,
    pub k: usize,
    pub sigma2: f64,
    pub gamma: f64,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Closed-form properties of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDerived {
    /// Var(BP) / Var(BP*).
    pub reliability: f64,
    /// Multiplicative bias of the uncorrected, age-adjusted estimate.
    pub attenuation: f64,
    pub r_squared: f64,
    /// BP effect when age is left out of the model.
    pub crude_effect: f64,
}

impl ScenarioConfig {
    pub fn base() -> Self {
        Self {
            tau2: 30.0,
            n: 500,
            k: 3,
            sigma2: 100.0,
            gamma: 0.0,
            n_reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.tau2.is_finite() && self.tau2 >= 0.0) {
            return bad("tau2 must be finite and nonnegative");
        }
        if self.n < 4 {
            return bad("n must be at least 4");
        }
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return bad("sigma2 must be positive");
        }
        if !self.gamma.is_finite() {
            return bad("gamma must be finite");
        }
        if self.n_reps == 0 {
            return bad("n_reps must be at least 1");
        }
        Ok(())
    }

    /// Same data-generating knobs (ignores repetitions and seed).
    pub fn same_knobs(&self, other: &Self) -> bool {
        self.tau2 == other.tau2
            && self.n == other.n
            && self.k == other.k
            && self.sigma2 == other.sigma2
            && self.gamma == other.gamma
    }

    pub fn is_base(&self) -> bool {
        self.same_knobs(&Self::base())
    }

    /// Short name such as `base`, `tau2=200` or `gamma=4`.
    pub fn label(&self) -> String {
        if self.is_base() {
            return "base".into();
        }
        match Sweep::classify(self) {
            Some(sweep) => format!("{}={}", sweep.knob(), sweep.knob_value(self)),
            None => format!(
                "tau2={},n={},k={},sigma2={},gamma={}",
                self.tau2, self.n, self.k, self.sigma2, self.gamma
            ),
        }
    }

    pub fn derived(&self) -> ScenarioDerived {
        let g = self.gamma;
        let var_bp = AGE_VAR * g * g + BP_COND_VAR;
        let cov_bp_age = g * AGE_VAR;
        let explained = TRUE_EFFECT.powi(2) * var_bp
            + AGE_EFFECT.powi(2) * AGE_VAR
            + 2.0 * TRUE_EFFECT * AGE_EFFECT * cov_bp_age;
        ScenarioDerived {
            reliability: var_bp / (var_bp + self.tau2),
            attenuation: BP_COND_VAR / (BP_COND_VAR + self.tau2),
            r_squared: explained / (explained + self.sigma2),
            crude_effect: TRUE_EFFECT + AGE_VAR * AGE_EFFECT * g / var_bp,
        }
    }

    /// Scenarios with n >= 10 000 are only run on request.
    pub fn is_full_only(&self) -> bool {
        self.n >= 10_000
    }
}

/// The 22 scenarios: base plus one-knob sweeps over τ², n, k, σ² and γ.
pub fn scenario_grid() -> Vec<ScenarioConfig> {
    let base = ScenarioConfig::base();
    let mut grid = vec![base];
    grid.extend(
        [200.0, 100.0, 50.0, 25.0, 20.0, 15.0, 10.0, 5.0]
            .map(|tau2| ScenarioConfig { tau2, ..base }),
    );
    grid.extend([125, 250, 1000, 10_000].map(|n| ScenarioConfig { n, ..base }));
    grid.extend([2, 5, 10].map(|k| ScenarioConfig { k, ..base }));
    grid.extend([20.0, 5.0, 1.0].map(|sigma2| ScenarioConfig { sigma2, ..base }));
    grid.extend([1.0, 4.0, 8.0].map(|gamma| ScenarioConfig { gamma, ..base }));
    grid
}

/// Reads a JSON array of scenarios. `n_reps` and `seed` may be omitted.
pub fn load_grid(json: &str) -> Result<Vec<ScenarioConfig>> {
    let grid: Vec<ScenarioConfig> = serde_json::from_str(json)?;
    for cfg in &grid {
        cfg.validate()?;
    }
    Ok(grid)
}
