use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column not found: '{0}'")]
    ColumnNotFound(String),

    #[error("duplicate column name: '{0}'")]
    DuplicateColumn(String),

    #[error("invalid analysis spec: {0}")]
    InvalidSpec(String),

    #[error("insufficient data: {n} rows for {p} parameters")]
    InsufficientData { n: usize, p: usize },

    #[error("singular design: condition ratio {ratio:e} below tolerance")]
    SingularDesign { ratio: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient replicates: need at least 2 replicate columns, got {0}")]
    InsufficientReplicates(usize),

    #[error(
        "infeasible correction: tau2 ({}) >= conditional exposure variance ({})",
        fmt_g(*.tau2),
        fmt_g(*.variance)
    )]
    InfeasibleCorrection { tau2: f64, variance: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("extrapolation needs {needed} distinct lambda values, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("bootstrap aborted: {failed} of {total} replicates failed (limit 10%)")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("all {0} sensitivity draws were infeasible: every sampled tau2 exceeds the conditional exposure variance")]
    AllDrawsInfeasible(usize),

    #[error("scenario aborted: {failed} of {total} repetitions failed (limit 10%)")]
    ScenarioFailures { failed: usize, total: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Formats a number with at most six significant digits and no trailing zeros.
pub fn fmt_g(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
