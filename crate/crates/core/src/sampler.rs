//! Field simulation: Laplace-driven and Gaussian-driven SPDE fields on a
//! finite-element mesh.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::fem::{FemDiscretization, FieldOperator, SolverPath};
use crate::matern::MaternParams;
use crate::noise::{sample_noise, LaplaceParams, NoiseRealization};
use crate::Real;

/// One simulated field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample<T> {
    /// X = Φ v at the observation locations.
    pub values: Vec<T>,
    /// Basis coefficients v = (C̃⁻¹K)^{−α/2} C̃⁻¹Λ.
    pub weights: Vec<T>,
    /// Noise loads Λ; for Gaussian fields `gammas` is empty.
    pub noise: NoiseRealization<T>,
}

fn check_dims<T: Real>(mp: &MaternParams<T>, fd: &FemDiscretization<T>) -> Result<()> {
    if mp.d() != fd.mesh().dim() {
        return validation(format!(
            "Matérn dimension {} does not match the mesh dimension {}",
            mp.d(),
            fd.mesh().dim()
        ));
    }
    Ok(())
}

/// Field with the given noise loads: v = (C̃⁻¹K)^{−α/2} C̃⁻¹Λ, X = Φv.
pub fn field_from_noise<T: Real>(
    mp: &MaternParams<T>,
    fd: &FemDiscretization<T>,
    noise: NoiseRealization<T>,
    path: SolverPath,
) -> Result<FieldSample<T>> {
    check_dims(mp, fd)?;
    let op = FieldOperator::new(fd, mp.kappa(), mp.alpha(), path)?;
    field_with_operator(&op, fd, noise)
}

/// As [`field_from_noise`] with a prepared operator, for repeated draws.
pub fn field_with_operator<T: Real>(
    op: &FieldOperator<'_, T>,
    fd: &FemDiscretization<T>,
    noise: NoiseRealization<T>,
) -> Result<FieldSample<T>> {
    let w: Vec<T> = noise.lambda.iter().zip(fd.lumped()).map(|(&l, &a)| l / a).collect();
    let weights = op.solve(&w)?;
    let values = fd.observation().apply(&weights);
    Ok(FieldSample { values, weights, noise })
}

/// Laplace-driven field. The Matérn variance follows from the noise,
/// φ² = τ(σ² + μ²); `mp` supplies κ and α.
pub fn simulate_laplace<T: Real, R: Rng + ?Sized>(
    mp: &MaternParams<T>,
    lp: &LaplaceParams<T>,
    fd: &FemDiscretization<T>,
    rng: &mut R,
) -> Result<FieldSample<T>> {
    simulate_laplace_with(mp, lp, fd, SolverPath::Auto, rng)
}

pub fn simulate_laplace_with<T: Real, R: Rng + ?Sized>(
    mp: &MaternParams<T>,
    lp: &LaplaceParams<T>,
    fd: &FemDiscretization<T>,
    path: SolverPath,
    rng: &mut R,
) -> Result<FieldSample<T>> {
    check_dims(mp, fd)?;
    let op = FieldOperator::new(fd, mp.kappa(), mp.alpha(), path)?;
    let noise = sample_noise(lp, fd.lumped(), rng)?;
    field_with_operator(&op, fd, noise)
}

/// Gaussian loads Λ = φ C̃^{1/2} z.
pub fn gaussian_noise<T: Real, R: Rng + ?Sized>(phi2: T, a: &[T], rng: &mut R) -> NoiseRealization<T> {
    let phi = phi2.sqrt();
    let z: Vec<T> = a
        .iter()
        .map(|_| {
            let s: f64 = StandardNormal.sample(rng);
            T::lit(s)
        })
        .collect();
    let lambda = z.iter().zip(a).map(|(&zi, &ai)| phi * ai.sqrt() * zi).collect();
    NoiseRealization { gammas: Vec::new(), z, lambda }
}

/// Gaussian Matérn field with weight precision K_α C̃⁻¹ K_α / φ².
pub fn simulate_gaussian<T: Real, R: Rng + ?Sized>(
    mp: &MaternParams<T>,
    fd: &FemDiscretization<T>,
    rng: &mut R,
) -> Result<FieldSample<T>> {
    simulate_gaussian_with(mp, fd, SolverPath::Auto, rng)
}

pub fn simulate_gaussian_with<T: Real, R: Rng + ?Sized>(
    mp: &MaternParams<T>,
    fd: &FemDiscretization<T>,
    path: SolverPath,
    rng: &mut R,
) -> Result<FieldSample<T>> {
    check_dims(mp, fd)?;
    let op = FieldOperator::new(fd, mp.kappa(), mp.alpha(), path)?;
    let noise = gaussian_noise(mp.phi2(), fd.lumped(), rng);
    field_with_operator(&op, fd, noise)
}
