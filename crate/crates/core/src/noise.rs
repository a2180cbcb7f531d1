//! Generalized asymmetric Laplace noise: parameters, the conditional-Gaussian
//! construction of FEM noise loads, a series-representation sampler used as a
//! distributional cross-check, and the marginal log-density of a load.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::specfun::{log_bessel_k, log_gamma};
use crate::Real;

/// Laplace noise parameters (μ, σ, γ, τ) with γ̄ = γτ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams<T> {
    mu: T,
    sigma: T,
    gamma: T,
    tau: T,
    gamma_bar: T,
}

impl<T: Real> LaplaceParams<T> {
    pub fn new(mu: T, sigma: T, gamma: T, tau: T) -> Result<Self> {
        Self::check(mu, sigma, gamma, tau)?;
        Ok(Self { mu, sigma, gamma, tau, gamma_bar: gamma * tau })
    }

    /// Parameters from the drift γ̄ = γτ; `gamma()` is then γ̄/τ.
    pub fn from_gamma_bar(mu: T, sigma: T, gamma_bar: T, tau: T) -> Result<Self> {
        Self::check(mu, sigma, gamma_bar, tau)?;
        Ok(Self { mu, sigma, gamma: gamma_bar / tau, tau, gamma_bar })
    }

    fn check(mu: T, sigma: T, g: T, tau: T) -> Result<()> {
        if !(sigma > T::zero() && tau > T::zero()) {
            return validation(format!("Laplace noise needs sigma > 0 and tau > 0 (got {sigma}, {tau})"));
        }
        if !(mu.is_finite() && sigma.is_finite() && g.is_finite() && tau.is_finite()) {
            return validation("Laplace noise parameters must be finite");
        }
        Ok(())
    }

    pub fn mu(&self) -> T {
        self.mu
    }
    pub fn sigma(&self) -> T {
        self.sigma
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn tau(&self) -> T {
        self.tau
    }
    pub fn gamma_bar(&self) -> T {
        self.gamma_bar
    }

    /// Matérn variance parameter implied by the noise, φ² = τ(σ² + μ²).
    pub fn implied_phi2(&self) -> T {
        self.tau * (self.sigma * self.sigma + self.mu * self.mu)
    }
}

/// Law of the per-node variance mixing variable.
pub trait MixingLaw<T> {
    /// Draws the mixing variable of a node with lumped mass `a`.
    fn sample<R: Rng + ?Sized>(&self, a: T, rng: &mut R) -> T;
}

/// Gamma mixing with shape τa and unit scale (the Laplace case).
#[derive(Debug, Clone, Copy)]
pub struct GammaMixing<T> {
    pub tau: T,
}

impl<T: Real> MixingLaw<T> for GammaMixing<T> {
    fn sample<R: Rng + ?Sized>(&self, a: T, rng: &mut R) -> T {
        let shape = (self.tau * a).as_f64();
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        T::lit(g.max(f64::MIN_POSITIVE))
    }
}

/// Per-node mixing variances Γ, Gaussian innovations Z and the loads Λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization<T> {
    pub gammas: Vec<T>,
    pub z: Vec<T>,
    pub lambda: Vec<T>,
}

impl<T: Real> NoiseRealization<T> {
    /// Λ_i = γ̄a_i + μΓ_i + σ√Γ_i Z_i from the stored Γ and Z.
    pub fn loads(gammas: &[T], z: &[T], lp: &LaplaceParams<T>, a: &[T]) -> Vec<T> {
        gammas
            .iter()
            .zip(z)
            .zip(a)
            .map(|((&g, &z), &a)| lp.gamma_bar() * a + lp.mu() * g + lp.sigma() * g.sqrt() * z)
            .collect()
    }
}

fn check_masses<T: Real>(a: &[T]) -> Result<()> {
    if a.iter().any(|&v| !(v > T::zero())) {
        return validation("lumped masses must be positive");
    }
    Ok(())
}

/// Draws the noise loads of a mesh with lumped masses `a`.
pub fn sample_noise<T: Real, R: Rng + ?Sized>(
    lp: &LaplaceParams<T>,
    a: &[T],
    rng: &mut R,
) -> Result<NoiseRealization<T>> {
    sample_noise_with(&GammaMixing { tau: lp.tau() }, lp, a, rng)
}

/// Noise loads under an arbitrary mixing law.
pub fn sample_noise_with<T: Real, M: MixingLaw<T>, R: Rng + ?Sized>(
    law: &M,
    lp: &LaplaceParams<T>,
    a: &[T],
    rng: &mut R,
) -> Result<NoiseRealization<T>> {
    check_masses(a)?;
    let mut gammas = Vec::with_capacity(a.len());
    let mut z = Vec::with_capacity(a.len());
    for &ai in a {
        gammas.push(law.sample(ai, rng));
        let zi: f64 = StandardNormal.sample(rng);
        z.push(T::lit(zi));
    }
    let lambda = NoiseRealization::loads(&gammas, &z, lp, a);
    Ok(NoiseRealization { gammas, z, lambda })
}

/// Truncation of the series representation on a 1-D domain `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation<T> {
    pub n_terms: usize,
    pub domain: (T, T),
}

impl<T: Real> SeriesTruncation<T> {
    pub fn domain_measure(&self) -> T {
        self.domain.1 - self.domain.0
    }
}

/// One draw of ∫φ dΛ from the truncated jump-series representation of the
/// Laplace motion on `trunc.domain`. The gamma jumps follow the inverse-tail
/// (Bondesson) construction Γ_k = exp(−E_k/(τ|D|)) W_k with E_k the arrival
/// times of a unit Poisson process and W_k iid standard exponential; jump k at
/// a uniform location s_k contributes φ(s_k)(μΓ_k + σ√Γ_k G_k). The drift is
/// γ̄·∫φ with `basis_integral` = ∫φ.
pub fn series_oracle_integral<T: Real, F: Fn(T) -> T, R: Rng + ?Sized>(
    basis: F,
    basis_integral: T,
    lp: &LaplaceParams<T>,
    trunc: &SeriesTruncation<T>,
    rng: &mut R,
) -> Result<T> {
    let m = trunc.domain_measure();
    if !(m > T::zero()) {
        return validation("series domain must have positive measure");
    }
    let rate = (lp.tau() * m).as_f64();
    let (lo, width) = (trunc.domain.0.as_f64(), m.as_f64());
    let (mu, sigma) = (lp.mu().as_f64(), lp.sigma().as_f64());
    let mut arrival = 0.0f64;
    let mut total = 0.0f64;
    for _ in 0..trunc.n_terms {
        let e: f64 = Exp1.sample(rng);
        arrival += e;
        let w: f64 = Exp1.sample(rng);
        let jump = (-arrival / rate).exp() * w;
        let s = lo + width * rng.random::<f64>();
        let g: f64 = StandardNormal.sample(rng);
        let phi = basis(T::lit(s)).as_f64();
        total += phi * (mu * jump + sigma * jump.sqrt() * g);
    }
    Ok(lp.gamma_bar() * basis_integral + T::lit(total))
}

/// log density of a single noise load Λ_i at `lambda` for a node of mass `a`.
///
/// Returns [`Error::Pole`] at λ = γ̄a when τa <= 1/2, where the density is
/// unbounded.
pub fn noise_load_logpdf<T: Real>(lambda: T, a: T, lp: &LaplaceParams<T>) -> Result<T> {
    if !(a > T::zero()) {
        return validation("lumped mass must be positive");
    }
    let shape = lp.tau() * a;
    let d = lambda - lp.gamma_bar() * a;
    let s2 = lp.sigma() * lp.sigma();
    let c2 = T::lit(2.0) * s2 + lp.mu() * lp.mu();
    let s = c2.sqrt();
    let p = shape - T::lit(0.5);
    let head = -T::lit(0.5) * (T::lit(2.0) * T::PI() * s2).ln() - log_gamma(shape)?;
    if d == T::zero() {
        if p > T::zero() {
            return Ok(head + log_gamma(p)? - p * (c2 / (T::lit(2.0) * s2)).ln());
        }
        return Err(Error::Pole(format!("noise-load density is unbounded at its centre for tau*a = {shape} <= 1/2")));
    }
    let ad = d.abs();
    let x = ad * s / s2;
    Ok(head + d * lp.mu() / s2 + T::LN_2() + p * (ad / s).ln() + log_bessel_k(p, x)?)
}
