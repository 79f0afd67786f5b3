//! Synthetic observations and noise campaigns.
//!
//! An observation is a forward solve at known parameters, a set of rays
//! built on the resulting interface and one target offset per ray. The
//! residual of a parameter vector is the signed ray distance minus the
//! offset, so noise-free data have a zero residual at the generating
//! parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{measure, MeasurementRay};
use crate::lmsolver::{self, LmConfig, LmError, LmResult, LmStatus, ModelFailure, ParameterSpec, ResidualFn};
use crate::models::{ForwardModel, ModelError};
use crate::scalar::Scalar;

/// Name recorded in provenance for the noise generator.
pub const NOISE_GENERATOR: &str = "ChaCha8Rng(seed_from_u64, stream) + StandardNormal (rand_chacha 0.9, rand_distr 0.5)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("forward model failed at the generating parameters: {0}")]
    Model(#[from] ModelError),
    #[error("ray construction failed: {0}")]
    Rays(String),
    #[error("initial guess list is empty")]
    NoInitialGuesses,
    #[error("observation list is empty")]
    NoObservations,
    #[error("initial guess {guess} is not strictly inside the bounds")]
    GuessOutOfBounds { guess: usize },
    #[error("{0}")]
    Mismatch(String),
}

/// Where measurement rays come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaySpec<F> {
    /// Model-chosen rays at these vertices of the generated interface.
    Vertices { indices: Vec<usize>, max_length: F },
    /// Rays used as given.
    Explicit(Vec<MeasurementRay<F>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub parameter_names: Vec<String>,
    pub theta_true: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub sigma: f64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation<F> {
    pub rays: Vec<MeasurementRay<F>>,
    pub offsets: Vec<F>,
    pub provenance: Provenance,
}

impl<F: Scalar> Observation<F> {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.rays.len() != self.offsets.len() {
            return Err(SynthError::Mismatch(format!(
                "{} rays but {} offsets",
                self.rays.len(),
                self.offsets.len()
            )));
        }
        if !(self.provenance.sigma >= 0.0) {
            return Err(SynthError::InvalidSigma(self.provenance.sigma));
        }
        for r in &self.rays {
            r.validate().map_err(|e| SynthError::Rays(e.to_string()))?;
        }
        Ok(())
    }
}

/// Seeded generator for one stream.
pub fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws from `N(0, σ²)`.
pub fn gaussian_offsets<F: Scalar>(n: usize, sigma: F, seed: u64, stream: u64) -> Result<Vec<F>, SynthError> {
    let s = sigma.to_f64_lossy();
    if !(s >= 0.0) || !s.is_finite() {
        return Err(SynthError::InvalidSigma(s));
    }
    if s == 0.0 {
        return Ok(vec![F::zero(); n]);
    }
    let mut rng = noise_rng(seed, stream);
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            F::of(z) * sigma
        })
        .collect())
}

/// Observation at `theta_true` with noise from stream 0 of `seed`.
pub fn generate_observation<F: Scalar, M: ForwardModel<F> + ?Sized>(
    model: &M,
    theta_true: &[F],
    rays: &RaySpec<F>,
    sigma: F,
    seed: u64,
) -> Result<Observation<F>, SynthError> {
    generate_observation_stream(model, theta_true, rays, sigma, seed, 0)
}

pub fn generate_observation_stream<F: Scalar, M: ForwardModel<F> + ?Sized>(
    model: &M,
    theta_true: &[F],
    rays: &RaySpec<F>,
    sigma: F,
    seed: u64,
    stream: u64,
) -> Result<Observation<F>, SynthError> {
    let s = sigma.to_f64_lossy();
    if !(s >= 0.0) || !s.is_finite() {
        return Err(SynthError::InvalidSigma(s));
    }
    let observed = model.evaluate(theta_true)?;
    let rays = match rays {
        RaySpec::Vertices { indices, max_length } => model
            .measurement_rays(&observed, indices, *max_length)
            .map_err(|e| SynthError::Rays(e.to_string()))?,
        RaySpec::Explicit(r) => r.clone(),
    };
    if rays.is_empty() {
        return Err(SynthError::Rays("no rays".into()));
    }
    // with explicit rays the generated interface need not sit at t = 0
    let base = measure(&rays, &observed).map_err(|e| SynthError::Rays(e.to_string()))?;
    let noise = gaussian_offsets(rays.len(), sigma, seed, stream)?;
    let offsets = base.iter().zip(&noise).map(|(b, n)| *b + *n).collect();
    Ok(Observation {
        rays,
        offsets,
        provenance: Provenance {
            model: model.id().to_string(),
            parameter_names: model.parameter_names(),
            theta_true: theta_true.iter().map(|v| v.to_f64_lossy()).collect(),
            seed,
            stream,
            sigma: s,
            generator: NOISE_GENERATOR.to_string(),
        },
    })
}

/// Residual `r_j(θ) = d_j(θ) − o_j`.
pub struct RayResidual<'a, F, M: ?Sized> {
    pub model: &'a M,
    pub rays: &'a [MeasurementRay<F>],
    pub offsets: &'a [F],
}

impl<'a, F: Scalar, M: ForwardModel<F> + ?Sized> RayResidual<'a, F, M> {
    pub fn new(model: &'a M, observation: &'a Observation<F>) -> Self {
        Self {
            model,
            rays: &observation.rays,
            offsets: &observation.offsets,
        }
    }
}

impl<F: Scalar, M: ForwardModel<F> + ?Sized> ResidualFn<F> for RayResidual<'_, F, M> {
    fn residual(&self, x: &[F]) -> Result<Vec<F>, ModelFailure> {
        let curve = self.model.evaluate(x)?;
        let d = measure(self.rays, &curve).map_err(|e| ModelFailure::new(e.to_string()))?;
        Ok(d.iter().zip(self.offsets).map(|(d, o)| *d - *o).collect())
    }
}

/// Noise levels generated from one seed. Level `i` uses stream `i`.
pub fn observations_for_sigmas<F: Scalar, M: ForwardModel<F> + ?Sized>(
    model: &M,
    theta_true: &[F],
    rays: &RaySpec<F>,
    sigmas: &[F],
    seed: u64,
) -> Result<Vec<Observation<F>>, SynthError> {
    sigmas
        .iter()
        .enumerate()
        .map(|(i, s)| generate_observation_stream(model, theta_true, rays, *s, seed, i as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRun<F> {
    pub level: usize,
    pub guess: usize,
    pub sigma: f64,
    pub initial_guess: Vec<F>,
    pub outcome: Result<LmResult<F>, String>,
}

impl<F: Scalar> CampaignRun<F> {
    /// A run whose final iterate counts as a result.
    pub fn completed(&self) -> Option<&LmResult<F>> {
        match &self.outcome {
            Ok(r) if !matches!(r.status, LmStatus::MuBlowup | LmStatus::ModelFailure) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub sigma: f64,
    pub mean_err_res: f64,
    pub std_err_res: f64,
    pub mean_params: Vec<f64>,
    pub std_params: Vec<f64>,
    pub n_completed: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult<F> {
    pub parameter_names: Vec<String>,
    pub runs: Vec<CampaignRun<F>>,
    pub summary: Vec<LevelSummary>,
}

/// Mean and sample standard deviation; `NaN` for an empty sample.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per-level statistics over completed runs.
pub fn summarize<F: Scalar>(sigmas: &[f64], n_params: usize, runs: &[CampaignRun<F>]) -> Vec<LevelSummary> {
    sigmas
        .iter()
        .enumerate()
        .map(|(level, &sigma)| {
            let here: Vec<&CampaignRun<F>> = runs.iter().filter(|r| r.level == level).collect();
            let done: Vec<&LmResult<F>> = here.iter().filter_map(|r| r.completed()).collect();
            let err: Vec<f64> = done
                .iter()
                .filter_map(|r| r.final_err_res().map(|v| v.to_f64_lossy()))
                .collect();
            let (mean_err_res, std_err_res) = mean_std(&err);
            let (mean_params, std_params) = (0..n_params)
                .map(|p| {
                    let v: Vec<f64> = done.iter().map(|r| r.x[p].to_f64_lossy()).collect();
                    mean_std(&v)
                })
                .unzip();
            LevelSummary {
                sigma,
                mean_err_res,
                std_err_res,
                mean_params,
                std_params,
                n_completed: done.len(),
                n_failed: here.len() - done.len(),
            }
        })
        .collect()
}

/// Validates campaign inputs.
pub fn check_campaign<F: Scalar>(
    observations: &[Observation<F>],
    initial_guesses: &[Vec<F>],
    spec: &ParameterSpec<F>,
) -> Result<(), SynthError> {
    if observations.is_empty() {
        return Err(SynthError::NoObservations);
    }
    if initial_guesses.is_empty() {
        return Err(SynthError::NoInitialGuesses);
    }
    for o in observations {
        o.validate()?;
    }
    for (g, x) in initial_guesses.iter().enumerate() {
        if x.len() != spec.len() || spec.first_violation(x).is_some() {
            return Err(SynthError::GuessOutOfBounds { guess: g });
        }
    }
    Ok(())
}

/// One LM run.
pub fn invert<F: Scalar, M: ForwardModel<F> + ?Sized>(
    model: &M,
    observation: &Observation<F>,
    x0: &[F],
    spec: &ParameterSpec<F>,
    config: &LmConfig<F>,
) -> Result<LmResult<F>, LmError> {
    let residual = RayResidual::new(model, observation);
    lmsolver::run(&residual, x0, spec, config)
}

/// One LM run per (noise level, initial guess), executed in parallel.
pub fn run_campaign<F: Scalar, M: ForwardModel<F> + ?Sized>(
    model: &M,
    observations: &[Observation<F>],
    initial_guesses: &[Vec<F>],
    spec: &ParameterSpec<F>,
    config: &LmConfig<F>,
) -> Result<CampaignResult<F>, SynthError> {
    check_campaign(observations, initial_guesses, spec)?;
    let jobs: Vec<(usize, usize)> = (0..observations.len())
        .flat_map(|l| (0..initial_guesses.len()).map(move |g| (l, g)))
        .collect();
    let runs: Vec<CampaignRun<F>> = jobs
        .par_iter()
        .map(|&(level, guess)| {
            let obs = &observations[level];
            let x0 = &initial_guesses[guess];
            CampaignRun {
                level,
                guess,
                sigma: obs.provenance.sigma,
                initial_guess: x0.clone(),
                outcome: invert(model, obs, x0, spec, config).map_err(|e| e.to_string()),
            }
        })
        .collect();
    let sigmas: Vec<f64> = observations.iter().map(|o| o.provenance.sigma).collect();
    let summary = summarize(&sigmas, spec.len(), &runs);
    Ok(CampaignResult {
        parameter_names: spec.names().to_vec(),
        runs,
        summary,
    })
}
