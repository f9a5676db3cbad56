//! C ABI over the `measerr` library.
//!
//! Datasets and analysis specs cross the boundary as opaque handles created
//! by `measerr_*_new`/`measerr_*_load` functions and released with the
//! matching `*_free`. Every fallible call returns a [`MeStatus`]; on failure
//! the message is available from [`measerr_last_error_message`] on the same
//! thread. Results are written through caller-provided out pointers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::size_t;
use measerr::dataset::read_csv;
use measerr::mecorrect::{self, Tau2Source};
use measerr::{
    AnalysisSpec, BootstrapConfig, Corrector, Dataset, Error, ErrorVariance, ErrorVarianceDistribution,
    Extrapolant, SimexConfig,
};

/// Opaque numeric table.
pub struct MeDataset(Dataset);

/// Opaque column-role assignment.
pub struct MeAnalysis(AnalysisSpec);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    ColumnNotFound = 5,
    Singular = 6,
    InsufficientData = 7,
    Infeasible = 8,
    BootstrapFailed = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeCorrector {
    Rc = 0,
    Simex = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeExtrapolant {
    Linear = 0,
    Quadratic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeDistKind {
    Uniform = 0,
    Triangular = 1,
    Trapezoidal = 2,
}

/// SIMEX settings. `lambdas` may be NULL to use the default grid
/// 0, 0.5, 1, 1.5, 2.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MeSimexConfig {
    pub lambdas: *const f64,
    pub n_lambdas: size_t,
    pub n_sim: size_t,
    pub extrapolant: MeExtrapolant,
    pub seed: u64,
}

/// Prior over the error variance. A triangular prior uses `lower_mode` as
/// its mode; a uniform prior ignores both modes.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MeDistribution {
    pub kind: MeDistKind,
    pub min: f64,
    pub lower_mode: f64,
    pub upper_mode: f64,
    pub max: f64,
}

/// Exposure row of an OLS fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MeFit {
    pub estimate: f64,
    pub std_error: f64,
    pub residual_variance: f64,
    pub r_squared: f64,
    pub n: size_t,
    pub p: size_t,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> MeStatus {
    match err {
        Error::Io { .. } | Error::Write { .. } => MeStatus::Io,
        Error::Csv(_) | Error::BadCell { .. } | Error::Json(_) => MeStatus::Parse,
        Error::ColumnNotFound(_) => MeStatus::ColumnNotFound,
        Error::SingularDesign { .. } => MeStatus::Singular,
        Error::InsufficientData { .. } | Error::InsufficientReplicates(_) | Error::TooFewPoints { .. } => {
            MeStatus::InsufficientData
        }
        Error::InfeasibleCorrection { .. } | Error::AllDrawsInfeasible(_) => MeStatus::Infeasible,
        Error::BootstrapFailures { .. } | Error::ScenarioFailures { .. } => MeStatus::BootstrapFailed,
        Error::DuplicateColumn(_) | Error::InvalidSpec(_) | Error::Dimension(_) | Error::InvalidConfig(_) => {
            MeStatus::InvalidArgument
        }
    }
}

struct Fail(MeStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MeStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(MeStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MeStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            MeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn str_list(p: *const *const c_char, n: size_t, what: &str) -> Result<Vec<String>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|&s| str_arg(s, what).map(str::to_string))
        .collect()
}

unsafe fn handles<'a>(ds: *const MeDataset, an: *const MeAnalysis) -> Result<(&'a Dataset, &'a AnalysisSpec), Fail> {
    if ds.is_null() {
        return Err(null("dataset"));
    }
    if an.is_null() {
        return Err(null("analysis"));
    }
    Ok((&(*ds).0, &(*an).0))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn simex_config(cfg: *const MeSimexConfig) -> Result<SimexConfig, Fail> {
    let Some(cfg) = cfg.as_ref() else {
        return Ok(SimexConfig::default());
    };
    let mut out = SimexConfig {
        n_sim: cfg.n_sim,
        extrapolant: match cfg.extrapolant {
            MeExtrapolant::Linear => Extrapolant::Linear,
            MeExtrapolant::Quadratic => Extrapolant::Quadratic,
        },
        seed: cfg.seed,
        ..SimexConfig::default()
    };
    if !cfg.lambdas.is_null() {
        out.lambda_grid = std::slice::from_raw_parts(cfg.lambdas, cfg.n_lambdas).to_vec();
    }
    out.validate()?;
    Ok(out)
}

fn corrector(c: MeCorrector) -> Corrector {
    match c {
        MeCorrector::Rc => Corrector::Rc,
        MeCorrector::Simex => Corrector::Simex,
    }
}

/// Message describing the last failed call on this thread, or an empty
/// string. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn measerr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn measerr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from `n_cols` named columns of `n_rows` values each,
/// stored column-major in `values`.
///
/// # Safety
/// `names` must point to `n_cols` NUL-terminated strings and `values` to
/// `n_rows * n_cols` doubles. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_dataset_new(
    names: *const *const c_char,
    values: *const f64,
    n_rows: size_t,
    n_cols: size_t,
    out_dataset: *mut *mut MeDataset,
) -> MeStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        *slot = ptr::null_mut();
        let names = str_list(names, n_cols, "names")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let total = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| invalid("dataset too large"))?;
        let flat = std::slice::from_raw_parts(values, total);
        let columns = flat.chunks(n_rows.max(1)).take(n_cols).map(<[f64]>::to_vec).collect();
        let ds = Dataset::from_columns(names, columns)?;
        *slot = Box::into_raw(Box::new(MeDataset(ds)));
        Ok(())
    })
}

/// Loads a headered numeric CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_dataset` writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_dataset_load_csv(path: *const c_char, out_dataset: *mut *mut MeDataset) -> MeStatus {
    guard(|| {
        let slot = out(out_dataset, "out_dataset")?;
        *slot = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        *slot = Box::into_raw(Box::new(MeDataset(read_csv(file)?)));
        Ok(())
    })
}

/// Number of rows, or 0 for a NULL handle.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn measerr_dataset_n_rows(dataset: *const MeDataset) -> size_t {
    dataset.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn measerr_dataset_free(dataset: *mut MeDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Assigns column roles. The first replicate is the analysed exposure.
///
/// # Safety
/// String arguments must be NUL-terminated; the list pointers must hold the
/// stated number of entries (they may be NULL when the count is 0).
#[no_mangle]
pub unsafe extern "C" fn measerr_analysis_new(
    outcome: *const c_char,
    replicates: *const *const c_char,
    n_replicates: size_t,
    covariates: *const *const c_char,
    n_covariates: size_t,
    out_analysis: *mut *mut MeAnalysis,
) -> MeStatus {
    guard(|| {
        let slot = out(out_analysis, "out_analysis")?;
        *slot = ptr::null_mut();
        let spec = AnalysisSpec::new(
            str_arg(outcome, "outcome")?,
            str_list(replicates, n_replicates, "replicates")?,
            str_list(covariates, n_covariates, "covariates")?,
        )?;
        *slot = Box::into_raw(Box::new(MeAnalysis(spec)));
        Ok(())
    })
}

/// # Safety
/// `analysis` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn measerr_analysis_free(analysis: *mut MeAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// Mean within-row variance of the replicate columns.
///
/// # Safety
/// Handles must be live; `out_tau2` writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_estimate_tau2(
    dataset: *const MeDataset,
    analysis: *const MeAnalysis,
    out_tau2: *mut f64,
) -> MeStatus {
    guard(|| {
        let (ds, an) = handles(dataset, analysis)?;
        let slot = out(out_tau2, "out_tau2")?;
        *slot = mecorrect::estimate_tau2_from_replicates(ds, an)?.tau2;
        Ok(())
    })
}

/// OLS of the outcome on the first replicate and the covariates.
///
/// # Safety
/// Handles must be live; `out_fit` writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_fit_uncorrected(
    dataset: *const MeDataset,
    analysis: *const MeAnalysis,
    out_fit: *mut MeFit,
) -> MeStatus {
    guard(|| {
        let (ds, an) = handles(dataset, analysis)?;
        let slot = out(out_fit, "out_fit")?;
        let fit = mecorrect::fit_uncorrected(ds, an)?;
        *slot = MeFit {
            estimate: fit.exposure_coefficient(),
            std_error: fit.exposure_standard_error(),
            residual_variance: fit.residual_variance,
            r_squared: fit.r_squared,
            n: fit.n,
            p: fit.p,
        };
        Ok(())
    })
}

/// Regression calibration with a known `tau2`. `out_factor` may be NULL.
///
/// # Safety
/// Handles must be live; `out_estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_correct_rc(
    dataset: *const MeDataset,
    analysis: *const MeAnalysis,
    tau2: f64,
    out_estimate: *mut f64,
    out_factor: *mut f64,
) -> MeStatus {
    guard(|| {
        let (ds, an) = handles(dataset, analysis)?;
        let slot = out(out_estimate, "out_estimate")?;
        let r = mecorrect::correct_rc(ds, an, &ErrorVariance::external(tau2)?)?;
        *slot = r.estimate;
        if let (Some(f), mecorrect::Diagnostics::Rc { correction_factor, .. }) = (out_factor.as_mut(), &r.diagnostics) {
            *f = *correction_factor;
        }
        Ok(())
    })
}

/// SIMEX with a known `tau2`. `config` may be NULL for defaults.
///
/// # Safety
/// Handles must be live; `config` NULL or valid; `out_estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_correct_simex(
    dataset: *const MeDataset,
    analysis: *const MeAnalysis,
    tau2: f64,
    config: *const MeSimexConfig,
    out_estimate: *mut f64,
) -> MeStatus {
    guard(|| {
        let (ds, an) = handles(dataset, analysis)?;
        let slot = out(out_estimate, "out_estimate")?;
        let cfg = simex_config(config)?;
        *slot = mecorrect::correct_simex(ds, an, &ErrorVariance::external(tau2)?, &cfg)?.estimate;
        Ok(())
    })
}

/// Percentile bootstrap interval. When `tau2_from_replicates` is true, τ² is
/// re-estimated from the replicate columns in every resample and `tau2` is
/// ignored.
///
/// # Safety
/// Handles must be live; `config` NULL or valid; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn measerr_bootstrap_ci(
    dataset: *const MeDataset,
    analysis: *const MeAnalysis,
    method: MeCorrector,
    tau2: f64,
    tau2_from_replicates: bool,
    config: *const MeSimexConfig,
    n_boot: size_t,
    level: f64,
    seed: u64,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> MeStatus {
    guard(|| {
        let (ds, an) = handles(dataset, analysis)?;
        let lower = out(out_lower, "out_lower")?;
        let upper = out(out_upper, "out_upper")?;
        let cfg = simex_config(config)?;
        let ev = if tau2_from_replicates {
            ErrorVariance {
                source: Tau2Source::Replicates,
                ..mecorrect::estimate_tau2_from_replicates(ds, an)?
            }
        } else {
            ErrorVariance::external(tau2)?
        };
        let boot = BootstrapConfig { n_boot, level, seed };
        let ci = mecorrect::bootstrap_ci(ds, an, corrector(method), &ev, &cfg, &boot)?;
        *lower = ci.ci.lower;
        *upper = ci.ci.upper;
        Ok(())
    })
}

/// Writes `m` inverse-CDF draws from `dist` into `out_draws`.
///
/// # Safety
/// `dist` must be valid and `out_draws` must have room for `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn measerr_sample_tau2(
    dist: *const MeDistribution,
    m: size_t,
    seed: u64,
    out_draws: *mut f64,
) -> MeStatus {
    guard(|| {
        let d = dist.as_ref().ok_or_else(|| null("dist"))?;
        if out_draws.is_null() {
            return Err(null("out_draws"));
        }
        let dist = match d.kind {
            MeDistKind::Uniform => ErrorVarianceDistribution::Uniform { min: d.min, max: d.max },
            MeDistKind::Triangular => ErrorVarianceDistribution::Triangular {
                min: d.min,
                mode: d.lower_mode,
                max: d.max,
            },
            MeDistKind::Trapezoidal => ErrorVarianceDistribution::Trapezoidal {
                min: d.min,
                lower_mode: d.lower_mode,
                upper_mode: d.upper_mode,
                max: d.max,
            },
        };
        let draws = measerr::sample_tau2(&dist, m, seed)?;
        std::slice::from_raw_parts_mut(out_draws, m).copy_from_slice(&draws);
        Ok(())
    })
}
