//! The twelve parameter settings of the simulation study.

use lamafield::fem::{assemble, build_mesh_1d, FemDiscretization};
use lamafield::noise::LaplaceParams;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// True values of (κ, τ, σ, μ, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub kappa: f64,
    pub tau: f64,
    pub sigma: f64,
    pub mu: f64,
    pub gamma: f64,
}

const fn p(kappa: f64, tau: f64, sigma: f64, mu: f64, gamma: f64) -> TrueParams {
    TrueParams { kappa, tau, sigma, mu, gamma }
}

/// Rows A–L. The first six have range √8/κ ≈ 3.5, the last six ≈ 35.
pub const TABLE1: [(char, TrueParams); 12] = [
    ('A', p(1.0, 2.0, 1.0, 0.0, 0.0)),
    ('B', p(1.0, 2.0, 0.5, 0.5, 0.0)),
    ('C', p(1.0, 1.0, 1.0, 0.0, 0.0)),
    ('D', p(1.0, 1.0, 1.0, 1.0, -1.0)),
    ('E', p(1.0, 0.5, 1.0, 0.0, 0.0)),
    ('F', p(1.0, 0.5, 1.0, 1.0, -1.0)),
    ('G', p(0.1, 1.0, 1.0, 0.0, 0.0)),
    ('H', p(0.1, 1.0, 0.5, 0.5, 0.0)),
    ('I', p(0.1, 0.5, 1.0, 0.0, 0.0)),
    ('J', p(0.1, 0.5, 1.0, 1.0, -1.0)),
    ('K', p(0.1, 1.0 / 3.0, 1.0, 0.0, 0.0)),
    ('L', p(0.1, 1.0 / 3.0, 0.5, 0.5, 0.0)),
];

/// One study setting: observations at the nodes `1, 2, …, n_obs` of a
/// uniform 1-D mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCase {
    pub label: char,
    pub theta_true: TrueParams,
    pub n_obs: usize,
    pub spacing: f64,
    pub alpha: f64,
    pub d: usize,
    pub replicates: usize,
}

impl StudyCase {
    pub fn new(label: char, theta_true: TrueParams, replicates: usize) -> Self {
        Self { label, theta_true, n_obs: 1000, spacing: 1.0, alpha: 2.0, d: 1, replicates }
    }

    pub fn laplace(&self) -> Result<LaplaceParams<f64>> {
        let t = &self.theta_true;
        Ok(LaplaceParams::new(t.mu, t.sigma, t.gamma, t.tau)?)
    }

    pub fn discretization(&self) -> Result<FemDiscretization<f64>> {
        if self.d != 1 {
            return input(format!("study cases are one-dimensional, got d = {}", self.d));
        }
        Ok(assemble(&build_mesh_1d(self.spacing, self.n_obs, self.spacing)?)?)
    }
}

pub fn table1_cases(replicates: usize) -> Vec<StudyCase> {
    TABLE1.iter().map(|&(l, t)| StudyCase::new(l, t, replicates)).collect()
}

/// Case by label, case-insensitive.
pub fn study_case(label: &str, replicates: usize) -> Result<StudyCase> {
    let mut chars = label.trim().chars();
    match (chars.next().map(|c| c.to_ascii_uppercase()), chars.next()) {
        (Some(c), None) => match TABLE1.iter().find(|(l, _)| *l == c) {
            Some(&(l, t)) => Ok(StudyCase::new(l, t, replicates)),
            None => input(format!("unknown study case {label:?}; expected one of A-L")),
        },
        _ => input(format!("unknown study case {label:?}; expected one of A-L")),
    }
}
