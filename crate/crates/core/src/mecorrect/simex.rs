use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisData, CorrectionResult, Diagnostics, ErrorVariance, Method};
use crate::dataset::{AnalysisSpec, Dataset};
use crate::error::{Error, Result};
use crate::linreg::{least_squares, ExposureFitter};
use crate::rng::{derive_seed, stream, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolant {
    Linear,
    #[default]
    Quadratic,
}

impl Extrapolant {
    fn degree(self) -> usize {
        match self {
            Extrapolant::Linear => 1,
            Extrapolant::Quadratic => 2,
        }
    }
}

impl std::str::FromStr for Extrapolant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(Error::InvalidConfig(format!("unknown extrapolant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimexConfig {
    /// Multiples of tau2 added as extra error. Must start at 0.
    pub lambda_grid: Vec<f64>,
    /// Pseudo datasets per positive lambda.
    pub n_sim: usize,
    pub extrapolant: Extrapolant,
    pub seed: u64,
}

impl Default for SimexConfig {
    fn default() -> Self {
        Self {
            lambda_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            n_sim: 100,
            extrapolant: Extrapolant::Quadratic,
            seed: DEFAULT_SEED,
        }
    }
}

impl SimexConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = &self.lambda_grid;
        if grid.first() != Some(&0.0) {
            return Err(Error::InvalidConfig("lambda grid must start at 0".into()));
        }
        if grid.iter().any(|l| !l.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "lambda grid must be finite and strictly increasing".into(),
            ));
        }
        if self.n_sim == 0 {
            return Err(Error::InvalidConfig("n_sim must be at least 1".into()));
        }
        let needed = self.extrapolant.degree() + 1;
        if grid.len() < needed {
            return Err(Error::TooFewPoints {
                needed,
                got: grid.len(),
            });
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Averaged exposure coefficient at one level of added error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimexPoint {
    pub lambda: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// Fitted polynomial evaluated at lambda = -1.
    pub estimate: f64,
    /// Polynomial coefficients, constant term first.
    pub coefficients: Vec<f64>,
}

/// Least-squares polynomial in lambda through `points`, evaluated at -1
/// where the total error variance `(1 + lambda) tau2` vanishes.
pub fn extrapolate(points: &[SimexPoint], extrapolant: Extrapolant) -> Result<Extrapolation> {
    let degree = extrapolant.degree();
    let mut distinct: Vec<f64> = points.iter().map(|p| p.lambda).collect();
    if distinct.iter().chain(points.iter().map(|p| &p.estimate)).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite extrapolation point".into()));
    }
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(Error::TooFewPoints {
            needed: degree + 1,
            got: distinct.len(),
        });
    }
    let x = DMatrix::from_fn(points.len(), degree + 1, |i, j| points[i].lambda.powi(j as i32));
    let y: Vec<f64> = points.iter().map(|p| p.estimate).collect();
    let coefficients = least_squares(&x, &y)?;
    let estimate = coefficients
        .iter()
        .enumerate()
        .map(|(j, c)| c * (-1.0f64).powi(j as i32))
        .sum();
    Ok(Extrapolation {
        estimate,
        coefficients,
    })
}

impl AnalysisData {
    pub(crate) fn simex_points(&self, tau2: f64, cfg: &SimexConfig) -> Result<Vec<SimexPoint>> {
        cfg.validate()?;
        if !(tau2.is_finite() && tau2 >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid tau2 {tau2}")));
        }
        let naive = self.uncorrected()?.exposure_coefficient();
        let positive = &cfg.lambda_grid[1..];
        if tau2 == 0.0 {
            return Ok(cfg
                .lambda_grid
                .iter()
                .map(|&lambda| SimexPoint {
                    lambda,
                    estimate: naive,
                })
                .collect());
        }

        let fitter = ExposureFitter::new(self.n(), &self.covariate_slices())?;
        let x = self.exposure();
        let n_sim = cfg.n_sim;
        let jobs: Vec<(usize, usize)> = (0..positive.len())
            .flat_map(|l| (0..n_sim).map(move |b| (l, b)))
            .collect();
        let fits: Vec<f64> = jobs
            .par_iter()
            .with_min_len(8)
            .map_init(
                || (Vec::new(), Vec::new()),
                |(noisy, scratch), &(l, b)| {
                    let sd = (positive[l] * tau2).sqrt();
                    let mut rng = stream(derive_seed(cfg.seed, l as u64), b as u64);
                    noisy.clear();
                    noisy.extend(x.iter().map(|&v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + sd * z
                    }));
                    fitter.coefficient(noisy, &self.y, scratch)
                },
            )
            .collect::<Result<_>>()?;

        let mut points = vec![SimexPoint {
            lambda: 0.0,
            estimate: naive,
        }];
        points.extend(positive.iter().zip(fits.chunks(n_sim)).map(|(&lambda, chunk)| SimexPoint {
            lambda,
            estimate: chunk.iter().sum::<f64>() / n_sim as f64,
        }));
        Ok(points)
    }

    pub(crate) fn simex(&self, tau2: f64, cfg: &SimexConfig) -> Result<(Vec<SimexPoint>, Extrapolation)> {
        let points = self.simex_points(tau2, cfg)?;
        let extrapolation = if tau2 == 0.0 {
            let mut coefficients = vec![0.0; cfg.extrapolant.degree() + 1];
            coefficients[0] = points[0].estimate;
            Extrapolation {
                estimate: points[0].estimate,
                coefficients,
            }
        } else {
            extrapolate(&points, cfg.extrapolant)?
        };
        Ok((points, extrapolation))
    }
}

/// Simulation step: for each lambda > 0, the mean exposure coefficient over
/// `n_sim` pseudo datasets whose exposure carries extra `N(0, lambda tau2)`
/// noise. Lambda = 0 maps to the uncorrected estimate.
pub fn simex_estimates_per_lambda(
    data: &Dataset,
    spec: &AnalysisSpec,
    tau2: &ErrorVariance,
    cfg: &SimexConfig,
) -> Result<Vec<SimexPoint>> {
    AnalysisData::new(data, spec)?.simex_points(tau2.tau2, cfg)
}

pub fn correct_simex(
    data: &Dataset,
    spec: &AnalysisSpec,
    tau2: &ErrorVariance,
    cfg: &SimexConfig,
) -> Result<CorrectionResult> {
    let (points, ex) = AnalysisData::new(data, spec)?.simex(tau2.tau2, cfg)?;
    Ok(CorrectionResult {
        method: Method::Simex,
        estimate: ex.estimate,
        tau2: tau2.tau2,
        ci: None,
        diagnostics: Diagnostics::Simex {
            points,
            extrapolant: cfg.extrapolant,
            coefficients: ex.coefficients,
        },
    })
}
