//! The `measerr` command line.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (the message names the
//! failing stage), 2 on a usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_csv, AnalysisSpec};
use crate::error::{fmt_g, Error};
use crate::io::write_atomic;
use crate::mecorrect::{
    bootstrap_ci, correct_rc, correct_simex, estimate_tau2_from_replicates, fit_uncorrected,
    uncorrected_result, BootstrapConfig, CorrectionResult, Corrector, Diagnostics, ErrorVariance,
    Extrapolant, Method, SimexConfig,
};
use crate::rng::DEFAULT_SEED;
use crate::sensitivity::{emit_plot_data, run_sensitivity, ErrorVarianceDistribution, SensitivityOptions};
use crate::simstudy::{
    emit_study_report, load_grid, run_scenario, scenario_grid, ScenarioConfig, StudyOptions,
};

#[derive(Debug, Parser)]
#[command(name = "measerr", version, about = "Measurement-error correction: regression calibration, SIMEX, sensitivity analysis and simulation study")]
pub struct Cli {
    /// Worker threads for simulation, sensitivity and bootstrap (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ordinary least squares of the outcome on exposure and covariates
    Fit(FitArgs),
    /// Correct the exposure coefficient for measurement error
    Correct(CorrectArgs),
    /// Corrections across a prior distribution for the error variance
    Sensitivity(SensitivityArgs),
    /// Run the Monte Carlo simulation study
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    /// Input CSV (header row, comma separated, numeric cells)
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column
    #[arg(long)]
    pub outcome: String,
    /// Error-prone exposure column (defaults to the first --replicates column)
    #[arg(long)]
    pub exposure: Option<String>,
    /// Covariate columns, comma separated
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Confidence level of the Wald interval
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Write the fit as JSON
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimexArgs {
    /// SIMEX multiples of tau2, comma separated, starting at 0
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    pub lambdas: Vec<f64>,
    /// SIMEX pseudo datasets per lambda
    #[arg(long, default_value_t = 100)]
    pub n_sim: usize,
    /// SIMEX extrapolation model
    #[arg(long, value_enum, default_value_t = ExtrapolantArg::Quadratic)]
    pub extrapolant: ExtrapolantArg,
}

impl SimexArgs {
    fn config(&self, seed: u64) -> SimexConfig {
        SimexConfig {
            lambda_grid: self.lambdas.clone(),
            n_sim: self.n_sim,
            extrapolant: match self.extrapolant {
                ExtrapolantArg::Linear => Extrapolant::Linear,
                ExtrapolantArg::Quadratic => Extrapolant::Quadratic,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExtrapolantArg {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Rc,
    Simex,
}

impl From<MethodArg> for Corrector {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rc => Corrector::Rc,
            MethodArg::Simex => Corrector::Simex,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Correction method
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Known measurement error variance (exclusive with --replicates)
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Replicate exposure columns used to estimate tau2; the first one is analysed
    #[arg(long, value_delimiter = ',')]
    pub replicates: Vec<String>,
    #[command(flatten)]
    pub simex: SimexArgs,
    /// Bootstrap replicates for the interval (0 disables; otherwise at least 50)
    #[arg(long, default_value_t = 999)]
    pub n_boot: usize,
    /// Confidence level
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Random seed
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the results as JSON
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistArg {
    Uniform,
    Triangular,
    Trapezoidal,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Correction method
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Prior distribution for tau2
    #[arg(long, value_enum)]
    pub tau2_dist: DistArg,
    /// Lower bound of the tau2 prior
    #[arg(long)]
    pub tau2_min: f64,
    /// Upper bound of the tau2 prior
    #[arg(long)]
    pub tau2_max: f64,
    /// Mode (triangular)
    #[arg(long)]
    pub tau2_mode: Option<f64>,
    /// Start of the flat top (trapezoidal)
    #[arg(long)]
    pub tau2_lower_mode: Option<f64>,
    /// End of the flat top (trapezoidal)
    #[arg(long)]
    pub tau2_upper_mode: Option<f64>,
    /// Number of tau2 draws
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Bootstrap an interval for every draw [default: on for rc, off for simex]
    #[arg(long, overrides_with = "no_ci")]
    pub ci: bool,
    /// Skip per-draw intervals
    #[arg(long)]
    pub no_ci: bool,
    #[command(flatten)]
    pub simex: SimexArgs,
    /// Bootstrap replicates per draw (at least 50)
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    /// Confidence level
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Random seed
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Plot table CSV; a JSON summary is written next to it
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario to run: all, base, or a label such as tau2=200, n=125, k=5, sigma2=20, gamma=4
    #[arg(long, default_value = "all")]
    pub scenario: String,
    /// JSON file with a custom scenario grid (replaces the built-in grid)
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Include the n=10000 scenario
    #[arg(long)]
    pub full: bool,
    /// Repetitions per scenario
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[command(flatten)]
    pub simex: SimexArgs,
    /// Bootstrap replicates for RC intervals (0 disables; otherwise at least 50)
    #[arg(long, default_value_t = 0)]
    pub n_boot: usize,
    /// Also bootstrap SIMEX intervals (slow)
    #[arg(long)]
    pub boot_simex: bool,
    /// Confidence level
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Random seed
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Report directory (created if missing)
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime { stage: &'static str, error: Error },
}

type CliResult<T> = std::result::Result<T, Failure>;

fn at(stage: &'static str) -> impl Fn(Error) -> Failure {
    move |error| Failure::Runtime { stage, error }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| run(&cli.command)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Runtime { stage, error }) => {
            eprintln!("error during {stage}: {error}");
            1
        }
    }
}

fn run(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Fit(a) => run_fit(a),
        Command::Correct(a) => run_correct(a),
        Command::Sensitivity(a) => run_sensitivity_cmd(a),
        Command::Simulate(a) => run_simulate(a),
    }
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn check_n_boot(n_boot: usize) -> CliResult<()> {
    if n_boot != 0 && n_boot < crate::mecorrect::MIN_BOOT {
        Err(Failure::Usage(format!("--n-boot must be 0 or at least 50, got {n_boot}")))
    } else {
        Ok(())
    }
}

fn check_simex(cfg: &SimexConfig) -> CliResult<()> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))
}

fn spec_from(columns: &ColumnArgs, replicates: &[String]) -> CliResult<AnalysisSpec> {
    let reps = match (&columns.exposure, replicates) {
        (Some(x), []) => vec![x.clone()],
        (None, []) => return Err(Failure::Usage("--exposure is required".into())),
        (Some(x), reps) if x != &reps[0] => {
            return Err(Failure::Usage(format!(
                "--exposure ({x}) must be the first --replicates column ({})",
                reps[0]
            )))
        }
        (_, reps) => reps.to_vec(),
    };
    AnalysisSpec::new(columns.outcome.clone(), reps, columns.covariates.clone())
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| at("write")(e.into()))?;
    write_atomic(path, &bytes).map_err(at("write"))
}

fn run_fit(a: &FitArgs) -> CliResult<()> {
    check_level(a.level)?;
    let spec = spec_from(&a.columns, &[])?;
    let data = load_csv(&a.columns.input, &spec).map_err(at("load"))?;
    let fit = fit_uncorrected(&data, &spec).map_err(at("fit"))?;
    let wald = crate::mecorrect::wald_ci(&fit, a.level).map_err(at("fit"))?;

    let mut terms = vec!["(intercept)".to_string(), spec.exposure().to_string()];
    terms.extend(spec.covariates.iter().cloned());
    println!("{:<16} {:>14} {:>14}", "term", "estimate", "std_error");
    for (t, (b, se)) in terms.iter().zip(fit.coefficients.iter().zip(&fit.standard_errors)) {
        println!("{t:<16} {:>14} {:>14}", fmt_g(*b), fmt_g(*se));
    }
    println!(
        "n = {}, residual variance = {}, R^2 = {}",
        fit.n,
        fmt_g(fit.residual_variance),
        fmt_g(fit.r_squared)
    );
    println!(
        "{} {}% CI: [{}, {}]",
        spec.exposure(),
        fmt_g(100.0 * a.level),
        fmt_g(wald.lower),
        fmt_g(wald.upper)
    );
    if let Some(out) = &a.output {
        #[derive(serde::Serialize)]
        struct FitOutput<'a> {
            terms: &'a [String],
            #[serde(flatten)]
            fit: &'a crate::linreg::FitResult,
        }
        write_json(out, &FitOutput { terms: &terms, fit: &fit })?;
    }
    Ok(())
}

fn print_results(results: &[CorrectionResult]) {
    println!("{:<12} {:>14} {:>14} {:>14}", "method", "estimate", "ci_lower", "ci_upper");
    for r in results {
        let (lo, hi) = r
            .ci
            .map(|c| (fmt_g(c.lower), fmt_g(c.upper)))
            .unwrap_or_else(|| ("-".into(), "-".into()));
        println!("{:<12} {:>14} {:>14} {:>14}", r.method.as_str(), fmt_g(r.estimate), lo, hi);
    }
    for r in results {
        match &r.diagnostics {
            Diagnostics::Rc {
                correction_factor,
                conditional_variance,
            } => println!(
                "rc: correction factor = {}, conditional exposure variance = {}",
                fmt_g(*correction_factor),
                fmt_g(*conditional_variance)
            ),
            Diagnostics::Simex {
                points,
                coefficients,
                extrapolant,
            } => {
                let pts: Vec<String> = points
                    .iter()
                    .map(|p| format!("{}:{}", fmt_g(p.lambda), fmt_g(p.estimate)))
                    .collect();
                let coefs: Vec<String> = coefficients.iter().map(|c| fmt_g(*c)).collect();
                println!("simex: lambda:estimate {}", pts.join(" "));
                println!("simex: {extrapolant:?} coefficients [{}]", coefs.join(", "));
            }
            Diagnostics::Uncorrected { .. } => {}
        }
    }
}

fn run_correct(a: &CorrectArgs) -> CliResult<()> {
    check_level(a.level)?;
    check_n_boot(a.n_boot)?;
    let simex = a.simex.config(a.seed);
    if matches!(a.method, MethodArg::Simex) {
        check_simex(&simex)?;
    }
    let replicates = &a.replicates;
    match (a.tau2, replicates.is_empty()) {
        (Some(_), false) => {
            return Err(Failure::Usage("give either --tau2 or --replicates, not both".into()))
        }
        (None, true) => return Err(Failure::Usage("one of --tau2 or --replicates is required".into())),
        (Some(t), true) if !(t.is_finite() && t >= 0.0) => {
            return Err(Failure::Usage(format!("--tau2 must be nonnegative, got {t}")))
        }
        (None, false) if replicates.len() < 2 => {
            return Err(Failure::Usage("--replicates needs at least two columns".into()))
        }
        _ => {}
    }
    let spec = spec_from(&a.columns, replicates)?;
    let data = load_csv(&a.columns.input, &spec).map_err(at("load"))?;
    let tau2 = match a.tau2 {
        Some(t) => ErrorVariance::external(t).map_err(at("estimate tau2"))?,
        None => estimate_tau2_from_replicates(&data, &spec).map_err(at("estimate tau2"))?,
    };
    println!("tau2 = {} ({:?})", fmt_g(tau2.tau2), tau2.source);

    let naive = uncorrected_result(&data, &spec, a.level).map_err(at("fit"))?;
    let corrector = Corrector::from(a.method);
    let mut corrected = match corrector {
        Corrector::Rc => correct_rc(&data, &spec, &tau2),
        Corrector::Simex => correct_simex(&data, &spec, &tau2, &simex),
    }
    .map_err(at("correct"))?;
    if a.n_boot > 0 {
        let boot = BootstrapConfig {
            n_boot: a.n_boot,
            level: a.level,
            seed: a.seed,
        };
        let ci = bootstrap_ci(&data, &spec, corrector, &tau2, &simex, &boot).map_err(at("bootstrap"))?;
        if ci.n_failed > 0 {
            println!("bootstrap: {} of {} replicates failed and were dropped", ci.n_failed, a.n_boot);
        }
        corrected.ci = Some(ci.ci);
    }
    let results = vec![naive, corrected];
    print_results(&results);
    if let Some(out) = &a.output {
        write_json(out, &results)?;
    }
    Ok(())
}

fn distribution(a: &SensitivityArgs) -> CliResult<ErrorVarianceDistribution> {
    let need = |v: Option<f64>, flag: &str, kind: &str| {
        v.ok_or_else(|| Failure::Usage(format!("--{flag} is required for a {kind} prior")))
    };
    let dist = match a.tau2_dist {
        DistArg::Uniform => ErrorVarianceDistribution::Uniform {
            min: a.tau2_min,
            max: a.tau2_max,
        },
        DistArg::Triangular => ErrorVarianceDistribution::Triangular {
            min: a.tau2_min,
            mode: need(a.tau2_mode, "tau2-mode", "triangular")?,
            max: a.tau2_max,
        },
        DistArg::Trapezoidal => ErrorVarianceDistribution::Trapezoidal {
            min: a.tau2_min,
            lower_mode: need(a.tau2_lower_mode, "tau2-lower-mode", "trapezoidal")?,
            upper_mode: need(a.tau2_upper_mode, "tau2-upper-mode", "trapezoidal")?,
            max: a.tau2_max,
        },
    };
    dist.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(dist)
}

fn run_sensitivity_cmd(a: &SensitivityArgs) -> CliResult<()> {
    check_level(a.level)?;
    let dist = distribution(a)?;
    if a.draws == 0 {
        return Err(Failure::Usage("--draws must be at least 1".into()));
    }
    let method = Corrector::from(a.method);
    let ci = if a.ci {
        true
    } else if a.no_ci {
        false
    } else {
        method == Corrector::Rc
    };
    if ci && a.n_boot < crate::mecorrect::MIN_BOOT {
        return Err(Failure::Usage(format!("--n-boot must be at least 50, got {}", a.n_boot)));
    }
    let simex = a.simex.config(a.seed);
    if method == Corrector::Simex {
        check_simex(&simex)?;
    }
    let spec = spec_from(&a.columns, &[])?;
    let data = load_csv(&a.columns.input, &spec).map_err(at("load"))?;
    let naive = uncorrected_result(&data, &spec, a.level).map_err(at("fit"))?;
    let opts = SensitivityOptions {
        draws: a.draws,
        ci,
        simex,
        bootstrap: BootstrapConfig {
            n_boot: a.n_boot,
            level: a.level,
            seed: a.seed,
        },
        seed: a.seed,
    };
    let result = run_sensitivity(&data, &spec, &dist, method, &opts).map_err(at("sensitivity"))?;
    emit_plot_data(&result, &a.output).map_err(at("write"))?;

    let s = &result.summary;
    print_results(&[naive]);
    println!(
        "{} over {} draws: median {}, range {} - {} ({} infeasible)",
        Method::from(method),
        a.draws,
        fmt_g(s.median),
        fmt_g(s.min),
        fmt_g(s.max),
        s.n_infeasible
    );
    println!("wrote {}", a.output.display());
    Ok(())
}

fn select_scenarios(a: &SimulateArgs) -> CliResult<Vec<ScenarioConfig>> {
    let grid = match &a.grid {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| {
                at("load")(Error::Io {
                    path: path.clone(),
                    source,
                })
            })?;
            load_grid(&text).map_err(at("load"))?
        }
        None => scenario_grid()
            .into_iter()
            .filter(|c| a.full || !c.is_full_only())
            .map(|c| ScenarioConfig {
                n_reps: a.reps,
                seed: a.seed,
                ..c
            })
            .collect(),
    };
    let chosen: Vec<ScenarioConfig> = match a.scenario.as_str() {
        "all" => grid,
        label => grid.into_iter().filter(|c| c.label() == label).collect(),
    };
    if chosen.is_empty() {
        let labels: Vec<String> = scenario_grid().iter().map(ScenarioConfig::label).collect();
        return Err(Failure::Usage(format!(
            "unknown scenario '{}'; expected all or one of: {}",
            a.scenario,
            labels.join(", ")
        )));
    }
    Ok(chosen)
}

fn run_simulate(a: &SimulateArgs) -> CliResult<()> {
    check_level(a.level)?;
    check_n_boot(a.n_boot)?;
    if a.reps == 0 {
        return Err(Failure::Usage("--reps must be at least 1".into()));
    }
    let simex = a.simex.config(a.seed);
    check_simex(&simex)?;
    let scenarios = select_scenarios(a)?;
    let opts = StudyOptions {
        methods: Method::ALL.to_vec(),
        simex,
        bootstrap: (a.n_boot > 0).then_some(BootstrapConfig {
            n_boot: a.n_boot,
            level: a.level,
            seed: a.seed,
        }),
        bootstrap_methods: if a.boot_simex {
            vec![Corrector::Rc, Corrector::Simex]
        } else {
            vec![Corrector::Rc]
        },
        level: a.level,
    };

    let mut summaries = Vec::with_capacity(scenarios.len());
    println!(
        "{:<12} {:<12} {:>12} {:>10} {:>12} {:>10}",
        "scenario", "method", "percent_bias", "mcse", "mse", "coverage"
    );
    for cfg in &scenarios {
        let summary = run_scenario(cfg, &opts).map_err(at("simulate"))?;
        for m in &summary.methods {
            println!(
                "{:<12} {:<12} {:>12.3} {:>10.3} {:>12.6} {:>10}",
                cfg.label(),
                m.method.as_str(),
                m.percent_bias,
                m.percent_bias_mcse,
                m.mse,
                m.coverage.map(|c| format!("{c:.3}")).unwrap_or_else(|| "-".into())
            );
        }
        summaries.push(summary);
    }
    std::fs::create_dir_all(&a.output).map_err(|source| {
        at("write")(Error::Write {
            path: a.output.clone(),
            source,
        })
    })?;
    let written = emit_study_report(&summaries, &a.output).map_err(at("write"))?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
