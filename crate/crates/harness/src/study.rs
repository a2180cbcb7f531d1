//! Replicated simulate-and-estimate runs of one study case.

use std::time::{Duration, Instant};

use lamafield::ecm::{ecm_fit, EcmConfig, EcmFit, FitStatus};
use lamafield::fem::FemDiscretization;
use lamafield::matern::MaternParams;
use lamafield::rng::stream_rng;
use lamafield::sampler::simulate_laplace;
use lamafield::stats::percentile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cases::StudyCase;
use crate::error::{HarnessError, Result};

/// Estimated (κ, τ, σ, μ, γ), with γ = γ̄/τ, and the fitted γ̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub kappa: f64,
    pub tau: f64,
    pub sigma: f64,
    pub mu: f64,
    pub gamma: f64,
    pub gamma_bar: f64,
}

impl Estimate {
    pub fn from_fit(fit: &EcmFit<f64>) -> Self {
        let t = &fit.theta;
        Self { kappa: t.kappa, tau: t.tau, sigma: t.sigma, mu: t.mu, gamma: t.gamma(), gamma_bar: t.gamma_bar }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    /// Stream index k; the replicate draws from stream (master seed, k).
    pub replicate: u64,
    pub estimate: Option<Estimate>,
    pub status: Option<FitStatus>,
    pub iterations: usize,
    /// Final observed log-likelihood when finite.
    pub loglik: Option<f64>,
    pub error: Option<String>,
}

/// 10%, 50% and 90% percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl Percentiles {
    pub fn of(x: &[f64]) -> Self {
        Self { p10: percentile(x, 10.0), p50: percentile(x, 50.0), p90: percentile(x, 90.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kappa: Percentiles,
    pub tau: Percentiles,
    pub sigma: Percentiles,
    pub mu: Percentiles,
    pub gamma: Percentiles,
}

impl Summary {
    pub fn of(estimates: &[Estimate]) -> Self {
        let col = |f: fn(&Estimate) -> f64| Percentiles::of(&estimates.iter().map(f).collect::<Vec<_>>());
        Self {
            kappa: col(|e| e.kappa),
            tau: col(|e| e.tau),
            sigma: col(|e| e.sigma),
            mu: col(|e| e.mu),
            gamma: col(|e| e.gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub case: StudyCase,
    pub config: EcmConfig<f64>,
    pub master_seed: u64,
    pub summary: Summary,
    pub failures: usize,
    pub failure_rate: f64,
    pub replicates: Vec<ReplicateOutcome>,
    /// Wall-clock time; left out of the JSON so that reruns are identical.
    #[serde(skip)]
    pub runtime: Duration,
}

impl StudyResult {
    pub fn estimates(&self) -> Vec<Estimate> {
        self.replicates.iter().filter_map(|r| r.estimate).collect()
    }
}

fn replicate_fit(
    case: &StudyCase,
    fd: &FemDiscretization<f64>,
    config: &EcmConfig<f64>,
    seed: u64,
    k: u64,
) -> Result<EcmFit<f64>> {
    let lp = case.laplace()?;
    let t = &case.theta_true;
    let mp = MaternParams::from_alpha(case.alpha, t.kappa, lp.implied_phi2(), case.d)?;
    let mut rng = stream_rng(seed, k);
    let sample = simulate_laplace(&mp, &lp, fd, &mut rng)?;
    Ok(ecm_fit(&sample.values, fd, case.alpha, config, &mut rng)?)
}

/// Replicate `k`: simulate from stream (seed, k), then fit from the same
/// stream. Failures are reported in the outcome rather than returned.
pub fn run_replicate(
    case: &StudyCase,
    fd: &FemDiscretization<f64>,
    config: &EcmConfig<f64>,
    seed: u64,
    k: u64,
) -> ReplicateOutcome {
    match replicate_fit(case, fd, config, seed, k) {
        Ok(fit) => ReplicateOutcome {
            replicate: k,
            estimate: Some(Estimate::from_fit(&fit)),
            status: Some(fit.status),
            iterations: fit.iterations,
            loglik: fit.loglik.is_finite().then_some(fit.loglik),
            error: None,
        },
        Err(e) => ReplicateOutcome {
            replicate: k,
            estimate: None,
            status: None,
            iterations: 0,
            loglik: None,
            error: Some(e.to_string()),
        },
    }
}

/// All replicates of `case`, in parallel on the current rayon pool.
pub fn run_case(case: &StudyCase, config: &EcmConfig<f64>, seed: u64) -> Result<StudyResult> {
    config.validate()?;
    case.laplace()?;
    if case.replicates == 0 {
        return Err(HarnessError::Input("a study needs at least one replicate".into()));
    }
    let fd = case.discretization()?;
    let start = Instant::now();
    let replicates: Vec<ReplicateOutcome> =
        (0..case.replicates as u64).into_par_iter().map(|k| run_replicate(case, &fd, config, seed, k)).collect();
    let estimates: Vec<Estimate> = replicates.iter().filter_map(|r| r.estimate).collect();
    let failures = replicates.len() - estimates.len();
    Ok(StudyResult {
        case: case.clone(),
        config: *config,
        master_seed: seed,
        summary: Summary::of(&estimates),
        failures,
        failure_rate: failures as f64 / replicates.len() as f64,
        replicates,
        runtime: start.elapsed(),
    })
}

/// Runs `f` on a pool of `jobs` threads; 0 uses the global pool.
pub fn with_jobs<R: Send, F: FnOnce() -> R + Send>(jobs: usize, f: F) -> Result<R> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Input(format!("cannot build a pool of {jobs} threads: {e}")))?;
    Ok(pool.install(f))
}
