//! Correction of exposure effects for random measurement error.
//!
//! * [`dataset`]: numeric tables, CSV ingestion, column roles.
//! * [`linreg`]: ordinary least squares.
//! * [`mecorrect`]: error-variance estimation, regression calibration,
//!   SIMEX and percentile bootstrap intervals.
//! * [`sensitivity`]: corrections across a prior on the error variance.
//! * [`simstudy`]: Monte Carlo performance study of the correctors.
//! * [`cli`]: the `measerr` command line.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod io;
pub mod linreg;
pub mod mecorrect;
pub mod rng;
pub mod sensitivity;
pub mod simstudy;

pub use dataset::{design_matrix, load_csv, AnalysisSpec, Dataset};
pub use error::{Error, Result};
pub use linreg::{ols_fit, residual_variance_of, FitResult};
pub use mecorrect::{
    bootstrap_ci, correct_rc, correct_simex, estimate_tau2_from_replicates, extrapolate,
    fit_uncorrected, simex_estimates_per_lambda, BootstrapConfig, CorrectionResult, Corrector,
    ErrorVariance, Extrapolant, Method, SimexConfig,
};
pub use sensitivity::{emit_plot_data, run_sensitivity, sample_tau2, ErrorVarianceDistribution, SensitivityResult};
pub use simstudy::{
    emit_study_report, generate_dataset, run_scenario, scenario_grid, PerformanceSummary, ScenarioConfig,
};
