//! Maximum-likelihood estimation of (κ, σ, μ, γ̄, τ) from one observed field
//! by expectation conditional maximization, with truncation of E(Γ⁻¹|Λ)
//! during the first iterations.
//!
//! Given loads Λ the latent variances have the generalized inverse Gaussian
//! posterior Γ_i | Λ_i ∝ Γ^{p−1} exp(−b/Γ − cΓ) with p = τa_i − 1/2,
//! b = d²/(2σ²), c = s²/(2σ²), d = |Λ_i − γ̄a_i| and s² = 2σ² + μ². Its
//! moments are Bessel ratios at x = ds/σ².

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{numeric, validation, Error, Result};
use crate::fem::{FemDiscretization, FieldOperator, Mesh, SolverPath};
use crate::noise::LaplaceParams;
use crate::optimize::{brent_maximize, brent_root};
use crate::specfun::{digamma, inverse_digamma, log_bessel_k, log_bessel_k_pair, log_gamma, SpecFunConfig};
use crate::Real;

/// Parameter vector θ = (κ, σ, μ, γ̄, τ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta<T> {
    pub kappa: T,
    pub sigma: T,
    pub mu: T,
    pub gamma_bar: T,
    pub tau: T,
}

impl<T: Real> Theta<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.kappa, self.sigma, self.mu, self.gamma_bar, self.tau].iter().all(|v| v.is_finite());
        if !ok || !(self.kappa > T::zero() && self.sigma > T::zero() && self.tau > T::zero()) {
            return validation(format!("invalid parameter vector {self:?}"));
        }
        Ok(())
    }

    /// γ = γ̄/τ.
    pub fn gamma(&self) -> T {
        self.gamma_bar / self.tau
    }

    pub fn laplace(&self) -> Result<LaplaceParams<T>> {
        LaplaceParams::from_gamma_bar(self.mu, self.sigma, self.gamma_bar, self.tau)
    }
}

/// How the τ update is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TauUpdate {
    /// Inverse digamma when all masses are equal, Brent otherwise.
    #[default]
    Auto,
    /// Bounded Brent root of ∂Q_τ/∂τ.
    Brent,
    /// τ = ψ⁻¹(mean E log Γ)/a; requires equal masses.
    InverseDigamma,
}

/// Finite-difference scheme for ∂ log K_ν/∂ν in E(log Γ|Λ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OrderDifference {
    /// (log K_{ν+ε} − log K_ν)/ε.
    Forward,
    /// (log K_{ν+ε} − log K_{ν−ε})/(2ε).
    #[default]
    Central,
}

/// Settings of [`ecm_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcmConfig<T> {
    /// Forward-difference step in the Bessel order for E(log Γ|Λ).
    pub eps_order_fd: T,
    pub order_difference: OrderDifference,
    /// Iterations after the warm start.
    pub max_iters: usize,
    /// Convergence threshold on the largest scaled parameter change.
    pub rel_tol: T,
    /// Truncation bound of E(Γ⁻¹|Λ) in the first iteration.
    pub trunc0: T,
    /// Per-iteration growth of the truncation bound.
    pub trunc_growth: T,
    /// Truncation is switched off once the bound exceeds this value.
    pub trunc_max: T,
    /// κ search interval; default two decades either side of the warm-start κ.
    pub kappa_bounds: Option<(T, T)>,
    /// τ search interval; default [1e-3, 1e3] times the initial τ.
    pub tau_bounds: Option<(T, T)>,
    /// Length of the fixed-κ warm start.
    pub init_steps: usize,
    /// Range that the random initial σ and τ are clamped to.
    pub init_clamp: (T, T),
    pub tau_update: TauUpdate,
    pub solver: SolverPath,
    /// Once truncation is off, stop when the centre gap of a cusp or pole
    /// node falls below this many standard deviations.
    pub singular_gap: T,
}

impl<T: Real> Default for EcmConfig<T> {
    fn default() -> Self {
        Self {
            eps_order_fd: T::lit(1e-5),
            order_difference: OrderDifference::Central,
            max_iters: 5000,
            rel_tol: T::lit(1e-7),
            trunc0: T::lit(1000.0),
            trunc_growth: T::lit(1.02),
            trunc_max: T::lit(1e12),
            kappa_bounds: None,
            tau_bounds: None,
            init_steps: 100,
            init_clamp: (T::lit(0.05), T::lit(20.0)),
            tau_update: TauUpdate::Auto,
            solver: SolverPath::Auto,
            singular_gap: T::lit(1e-6),
        }
    }
}

impl<T: Real> EcmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.eps_order_fd, self.rel_tol, self.trunc0, self.trunc_max];
        if pos.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) || !(self.trunc_growth >= T::one()) {
            return validation("ECM tolerances and truncation settings must be positive (growth >= 1)");
        }
        if !(self.singular_gap >= T::zero()) || !self.singular_gap.is_finite() {
            return validation("singular_gap must be finite and non-negative");
        }
        for (lo, hi) in [self.kappa_bounds, self.tau_bounds].into_iter().flatten().chain([self.init_clamp]) {
            if !(lo > T::zero() && hi > lo && hi.is_finite()) {
                return validation(format!("bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    /// Truncation bound in iteration `j` (0-based), `None` once disabled.
    pub fn trunc_bound(&self, j: usize) -> Option<T> {
        let b = self.trunc0 * self.trunc_growth.powi(j.min(i32::MAX as usize) as i32);
        (b <= self.trunc_max).then_some(b)
    }
}

/// Value returned for E(Γ⁻¹|Λ) at its pole once truncation is disabled.
pub const INV_GAMMA_POLE_CAP: f64 = 1e12;
const LARGE_X: f64 = 1e4;
const DIRECT_INV_X: f64 = 1e-2;

struct Node<T> {
    shape: T,
    p: T,
    s2: T,
    c2: T,
    s: T,
    signed: T,
    d: T,
    x: T,
}

fn node<T: Real>(lambda: T, a: T, th: &Theta<T>) -> Node<T> {
    let shape = th.tau * a;
    let s2 = th.sigma * th.sigma;
    let c2 = T::lit(2.0) * s2 + th.mu * th.mu;
    let s = c2.sqrt();
    let signed = lambda - th.gamma_bar * a;
    let d = signed.abs();
    Node { shape, p: shape - T::lit(0.5), s2, c2, s, signed, d, x: d * s / s2 }
}

/// Below this Bessel argument E(Γ|Λ) uses its small-argument limit.
fn small_x_threshold<T: Real>(shape: T, p: T) -> T {
    let m = p.abs().min((p + T::one()).abs()).min(T::one());
    let law = if m > T::zero() { T::lit(2.0) * T::lit(1e-5).powf(T::one() / (T::lit(2.0) * m)) } else { T::zero() };
    (T::lit(0.01) * (shape + T::one()).sqrt()).min(law)
}

fn e_gamma_from<T: Real>(n: &Node<T>, log_ratio: impl FnOnce() -> Result<T>) -> Result<T> {
    if n.d == T::zero() {
        return Ok(if n.p > T::zero() { T::lit(2.0) * n.p * n.s2 / n.c2 } else { T::zero() });
    }
    if n.x > T::lit(LARGE_X) {
        return Ok(n.d / n.s + n.shape * n.s2 / n.c2);
    }
    if n.x < small_x_threshold(n.shape, n.p) {
        if n.p > T::zero() {
            return Ok(T::lit(2.0) * n.p * n.s2 / n.c2);
        }
        let half = T::lit(0.5);
        let two_shape = T::lit(2.0) * n.shape;
        let lg = log_gamma(n.shape + half)? - log_gamma(half - n.shape)?;
        return Ok((lg + two_shape * (T::lit(2.0) * n.s2).ln() + (T::one() - two_shape) * n.d.ln()
            - (two_shape + T::one()) * n.s.ln())
        .exp());
    }
    Ok(n.d / n.s * log_ratio()?.exp())
}

/// E(Γ_i | Λ_i) under θ for a node of lumped mass `a`.
pub fn expected_gamma<T: Real>(lambda: T, a: T, theta: &Theta<T>) -> Result<T> {
    let n = node(lambda, a, theta);
    e_gamma_from(&n, || {
        let (k0, k1) = log_bessel_k_pair(n.p, n.x)?;
        Ok(k1 - k0)
    })
}

fn e_inv_gamma_from<T: Real>(n: &Node<T>, log_ratio: T, trunc: Option<T>) -> Result<T> {
    let cap = trunc.unwrap_or(T::lit(INV_GAMMA_POLE_CAP));
    if n.d == T::zero() {
        if n.p > T::one() {
            return Ok((n.c2 / (T::lit(2.0) * n.s2) / (n.p - T::one())).min(cap));
        }
        return Ok(cap);
    }
    let v = if n.x >= T::lit(DIRECT_INV_X) {
        let eg = n.d / n.s * log_ratio.exp();
        (n.c2 * eg - T::lit(2.0) * n.p * n.s2) / (n.d * n.d)
    } else {
        n.s / n.d * (log_bessel_k(n.p - T::one(), n.x)? - log_bessel_k(n.p, n.x)?).exp()
    };
    Ok(match trunc {
        Some(b) => v.min(b),
        None => v,
    })
}

/// E(Γ_i⁻¹ | Λ_i), clamped to `trunc_bound`; the pole at Λ_i = γ̄a_i with
/// τa_i <= 3/2 returns the bound.
pub fn expected_inv_gamma<T: Real>(lambda: T, a: T, theta: &Theta<T>, trunc_bound: T) -> Result<T> {
    if !(trunc_bound > T::zero()) {
        return validation("truncation bound must be positive");
    }
    let n = node(lambda, a, theta);
    let lr = if n.d > T::zero() && n.x >= T::lit(DIRECT_INV_X) {
        let (k0, k1) = log_bessel_k_pair(n.p, n.x)?;
        k1 - k0
    } else {
        T::zero()
    };
    e_inv_gamma_from(&n, lr, Some(trunc_bound))
}

/// E(Γ_i⁻¹ | Λ_i) by the three-Bessel form √(c/b)·K_{p−1}(x)/K_p(x).
pub fn expected_inv_gamma_direct<T: Real>(lambda: T, a: T, theta: &Theta<T>) -> Result<T> {
    let n = node(lambda, a, theta);
    if n.d == T::zero() {
        return e_inv_gamma_from(&n, T::zero(), None);
    }
    Ok(n.s / n.d * (log_bessel_k(n.p - T::one(), n.x)? - log_bessel_k(n.p, n.x)?).exp())
}

fn e_log_gamma_from<T: Real>(n: &Node<T>, lk: T, eps: T, scheme: OrderDifference) -> Result<T> {
    if n.d == T::zero() {
        if n.p > T::zero() {
            return Ok(digamma(n.p)? - (n.c2 / (T::lit(2.0) * n.s2)).ln());
        }
        return Ok(T::min_positive_value().ln());
    }
    let up = log_bessel_k(n.p + eps, n.x)?;
    let slope = match scheme {
        OrderDifference::Forward => (up - lk) / eps,
        OrderDifference::Central => (up - log_bessel_k(n.p - eps, n.x)?) / (T::lit(2.0) * eps),
    };
    Ok((n.d / n.s).ln() + slope)
}

/// E(log Γ_i | Λ_i) by a forward difference of log K in the order.
pub fn expected_log_gamma<T: Real>(lambda: T, a: T, theta: &Theta<T>, eps: T) -> Result<T> {
    expected_log_gamma_with(lambda, a, theta, eps, OrderDifference::Forward)
}

/// E(log Γ_i | Λ_i) with the chosen difference scheme.
pub fn expected_log_gamma_with<T: Real>(
    lambda: T,
    a: T,
    theta: &Theta<T>,
    eps: T,
    scheme: OrderDifference,
) -> Result<T> {
    if !(eps > T::zero()) {
        return validation("order step must be positive");
    }
    let n = node(lambda, a, theta);
    let lk = if n.d > T::zero() { log_bessel_k(n.p, n.x)? } else { T::zero() };
    e_log_gamma_from(&n, lk, eps, scheme)
}

fn logpdf_from<T: Real>(n: &Node<T>, lk: T, th: &Theta<T>) -> Result<T> {
    let head = -T::lit(0.5) * (T::lit(2.0) * T::PI() * n.s2).ln() - log_gamma(n.shape)?;
    if n.d == T::zero() {
        if n.p > T::zero() {
            return Ok(head + log_gamma(n.p)? - n.p * (n.c2 / (T::lit(2.0) * n.s2)).ln());
        }
        return Ok(T::infinity());
    }
    Ok(head + n.signed * th.mu / n.s2 + T::LN_2() + n.p * (n.d / n.s).ln() + lk)
}

/// Conditional expectations of the latent variances for every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expectations<T> {
    pub e_gamma: Vec<T>,
    pub e_inv_gamma: Vec<T>,
    pub e_log_gamma: Vec<T>,
    /// Σ_i log p(Λ_i | θ), from the same Bessel evaluations; +∞ at a pole.
    pub noise_loglik: T,
    /// Number of nodes whose E(Γ⁻¹|Λ) hit the truncation bound.
    pub clamped: usize,
    /// min |Λ_i − γ̄a_i| / sd(Λ_i) over nodes with τa_i < 1, whose load
    /// densities have a cusp or a pole at γ̄a_i; infinite if there are none.
    pub centre_gap: T,
}

/// E-step at θ for loads Λ.
pub fn e_step<T: Real>(
    lambda: &[T],
    a: &[T],
    theta: &Theta<T>,
    trunc: Option<T>,
    eps: T,
    scheme: OrderDifference,
) -> Result<Expectations<T>> {
    if lambda.len() != a.len() {
        return validation("loads and masses differ in length");
    }
    let m = lambda.len();
    let mut ex = Expectations {
        e_gamma: Vec::with_capacity(m),
        e_inv_gamma: Vec::with_capacity(m),
        e_log_gamma: Vec::with_capacity(m),
        noise_loglik: T::zero(),
        clamped: 0,
        centre_gap: T::infinity(),
    };
    let var_scale = (theta.sigma * theta.sigma + theta.mu * theta.mu) * theta.tau;
    for (&l, &ai) in lambda.iter().zip(a) {
        let n = node(l, ai, theta);
        let (k0, k1) = if n.d > T::zero() { log_bessel_k_pair(n.p, n.x)? } else { (T::zero(), T::zero()) };
        ex.e_gamma.push(e_gamma_from(&n, || Ok(k1 - k0))?);
        let inv = e_inv_gamma_from(&n, k1 - k0, trunc)?;
        if let Some(b) = trunc {
            if inv >= b {
                ex.clamped += 1;
            }
        }
        ex.e_inv_gamma.push(inv);
        ex.e_log_gamma.push(e_log_gamma_from(&n, k0, eps, scheme)?);
        if n.p < T::lit(0.5) {
            ex.centre_gap = ex.centre_gap.min(n.d / (var_scale * ai).sqrt());
        }
        ex.noise_loglik += logpdf_from(&n, k0, theta)?;
    }
    Ok(ex)
}

/// Expected complete-data log-likelihood Q(θ | expectations) for loads Λ
/// formed at θ.κ; `log_jacobian` is log|C̃K_α| at that κ.
pub fn q_function<T: Real>(
    theta: &Theta<T>,
    lambda: &[T],
    a: &[T],
    ex: &Expectations<T>,
    log_jacobian: T,
) -> Result<T> {
    let s2 = theta.sigma * theta.sigma;
    let mut quad = T::zero();
    let mut prior = T::zero();
    for i in 0..lambda.len() {
        let r = lambda[i] - theta.gamma_bar * a[i];
        quad += r * r * ex.e_inv_gamma[i] - T::lit(2.0) * theta.mu * r + theta.mu * theta.mu * ex.e_gamma[i];
        let shape = theta.tau * a[i];
        prior += (shape - T::lit(1.5)) * ex.e_log_gamma[i] - ex.e_gamma[i] - log_gamma(shape)?;
    }
    let n = T::of_usize(lambda.len());
    Ok(log_jacobian - T::lit(0.5) * n * (T::lit(2.0) * T::PI() * s2).ln() - quad / (T::lit(2.0) * s2) + prior)
}

/// Result of the closed-form noise update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStep<T> {
    pub mu: T,
    pub gamma_bar: T,
    pub sigma: T,
    pub tau: T,
    /// The (μ, γ̄) system was singular; previous values were kept.
    pub degenerate: bool,
    /// The τ maximizer lies at a search bound.
    pub tau_at_bound: bool,
}

/// Closed-form μ, γ̄, σ maximizing Q given the expectations.
pub fn update_location_scale<T: Real>(lambda: &[T], a: &[T], ex: &Expectations<T>) -> Result<(T, T, T)> {
    let (mut se, mut sl, mut sa, mut sada, mut slda) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for i in 0..lambda.len() {
        let dinv = ex.e_inv_gamma[i];
        se += ex.e_gamma[i];
        sl += lambda[i];
        sa += a[i];
        sada += a[i] * a[i] * dinv;
        slda += lambda[i] * a[i] * dinv;
    }
    let det = se * sada - sa * sa;
    if !(det > T::zero()) || !det.is_finite() {
        return numeric(format!("degenerate location update: determinant {det}"));
    }
    let mu = (sl * sada - sa * slda) / det;
    let gamma_bar = (se * slda - sl * sa) / det;
    let mut q = T::zero();
    for i in 0..lambda.len() {
        let r = lambda[i] - gamma_bar * a[i];
        q += r * r * ex.e_inv_gamma[i] - T::lit(2.0) * mu * r + mu * mu * ex.e_gamma[i];
    }
    let s2 = q / T::of_usize(lambda.len());
    if !(s2 > T::zero()) || !s2.is_finite() {
        return numeric(format!("degenerate scale update: sigma^2 = {s2}"));
    }
    Ok((mu, gamma_bar, s2.sqrt()))
}

/// Q_τ = Σ(τa_i E log Γ_i − log Γ(τa_i)).
pub fn q_tau<T: Real>(tau: T, a: &[T], e_log_gamma: &[T]) -> Result<T> {
    q_tau_grouped(tau, &mass_groups(a, e_log_gamma))
}

/// (mass, node count, Σ E log Γ) per distinct lumped mass. Regular meshes
/// have few distinct masses, so the τ objective needs few gamma functions.
type MassGroups<T> = Vec<(T, T, T)>;

fn mass_groups<T: Real>(a: &[T], e_log_gamma: &[T]) -> MassGroups<T> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].partial_cmp(&a[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut groups: MassGroups<T> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some((ag, count, sum)) if *ag == a[i] => {
                *count += T::one();
                *sum += e_log_gamma[i];
            }
            _ => groups.push((a[i], T::one(), e_log_gamma[i])),
        }
    }
    groups
}

fn q_tau_grouped<T: Real>(tau: T, groups: &MassGroups<T>) -> Result<T> {
    let mut q = T::zero();
    for &(ag, count, sum) in groups {
        q += tau * ag * sum - count * log_gamma(tau * ag)?;
    }
    Ok(q)
}

/// τ maximizing Q_τ within `bounds`; returns (τ, at_bound).
pub fn update_tau<T: Real>(a: &[T], e_log_gamma: &[T], bounds: (T, T), method: TauUpdate) -> Result<(T, bool)> {
    update_tau_grouped(&mass_groups(a, e_log_gamma), bounds, method)
}

fn update_tau_grouped<T: Real>(groups: &MassGroups<T>, bounds: (T, T), method: TauUpdate) -> Result<(T, bool)> {
    let (lo, hi) = bounds;
    let equal = groups.len() == 1;
    let closed = match method {
        TauUpdate::InverseDigamma => {
            if !equal {
                return validation("the inverse-digamma τ update needs equal lumped masses");
            }
            true
        }
        TauUpdate::Auto => equal,
        TauUpdate::Brent => false,
    };
    if closed {
        let (ag, count, sum) = groups[0];
        let t = inverse_digamma(sum / count, &SpecFunConfig::default())? / ag;
        return Ok(if t < lo {
            (lo, true)
        } else if t > hi {
            (hi, true)
        } else {
            (t, false)
        });
    }
    let mut err = None;
    let mut grad = |lt: T| -> T {
        let tau = lt.exp();
        let mut g = T::zero();
        for &(ag, count, sum) in groups {
            match digamma(tau * ag) {
                Ok(psi) => g += ag * (sum - count * psi),
                Err(e) => err = Some(e),
            }
        }
        g
    };
    let (llo, lhi) = (lo.ln(), hi.ln());
    let (glo, ghi) = (grad(llo), grad(lhi));
    if glo <= T::zero() {
        return Ok((lo, true));
    }
    if ghi >= T::zero() {
        return Ok((hi, true));
    }
    let lt = brent_root(&mut grad, llo, lhi, T::epsilon() * T::lit(4.0), 200)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((lt.exp(), false))
}

/// Conditional maximization of Q over (μ, γ̄, σ) and then τ; Λ is formed at
/// the current κ.
pub fn cm_step_noise<T: Real>(
    theta: &Theta<T>,
    lambda: &[T],
    a: &[T],
    ex: &Expectations<T>,
    tau_bounds: (T, T),
    method: TauUpdate,
) -> Result<NoiseStep<T>> {
    let (mu, gamma_bar, sigma, degenerate) = match update_location_scale(lambda, a, ex) {
        Ok((m, g, s)) => (m, g, s, false),
        Err(Error::Numeric(_)) => (theta.mu, theta.gamma_bar, theta.sigma, true),
        Err(e) => return Err(e),
    };
    let groups = mass_groups(a, &ex.e_log_gamma);
    let (mut tau, mut tau_at_bound) = update_tau_grouped(&groups, tau_bounds, method)?;
    if q_tau_grouped(tau, &groups)? < q_tau_grouped(theta.tau, &groups)? {
        tau = theta.tau;
        tau_at_bound = false;
    }
    Ok(NoiseStep { mu, gamma_bar, sigma, tau, degenerate, tau_at_bound })
}

/// Q_κ = log|C̃K_α(κ)| − (ΛᵀDΛ − 2γ̄ΛᵀDa − 2μΛᵀ1)/(2σ²) with Λ = Λ(κ) and
/// D = diag(E(Γ⁻¹|Λ)) held fixed.
pub fn q_kappa<T: Real>(
    kappa: T,
    x: &[T],
    fd: &FemDiscretization<T>,
    alpha: T,
    theta: &Theta<T>,
    e_inv_gamma: &[T],
    path: SolverPath,
) -> Result<T> {
    let a = fd.lumped();
    let g = theta.gamma_bar;
    let offset: T = e_inv_gamma.iter().zip(a).map(|(&e, &ai)| (g * e * ai + T::lit(2.0) * theta.mu) * g * ai).sum();
    Ok(q_kappa_centred(kappa, x, fd, alpha, theta, e_inv_gamma, path)?
        + offset / (T::lit(2.0) * theta.sigma * theta.sigma))
}

/// Q_κ up to a κ-free constant, with residuals Λ − γ̄a formed before squaring
/// so that huge E(Γ⁻¹) near a density singularity does not cancel.
fn q_kappa_centred<T: Real>(
    kappa: T,
    x: &[T],
    fd: &FemDiscretization<T>,
    alpha: T,
    theta: &Theta<T>,
    e_inv_gamma: &[T],
    path: SolverPath,
) -> Result<T> {
    KappaObjective::new(x, fd, alpha, theta, e_inv_gamma, path)?.eval(kappa)
}

/// Q_κ evaluator reused across a line search. On the sparse path with a
/// tridiagonal stiffness matrix, Λ(κ) comes from stiffness products and
/// log|K| from an O(n) LDLᵀ recurrence instead of a fresh factorization.
struct KappaObjective<'a, T> {
    x: &'a [T],
    fd: &'a FemDiscretization<T>,
    alpha: T,
    theta: &'a Theta<T>,
    e_inv_gamma: &'a [T],
    path: SolverPath,
    /// (α/2, G diagonal, G super-diagonal) for the fast path.
    fast: Option<(u32, Vec<T>, Vec<T>)>,
}

impl<'a, T: Real> KappaObjective<'a, T> {
    fn new(
        x: &'a [T],
        fd: &'a FemDiscretization<T>,
        alpha: T,
        theta: &'a Theta<T>,
        e_inv_gamma: &'a [T],
        path: SolverPath,
    ) -> Result<Self> {
        // Validates α and the path once.
        let probe = FieldOperator::new(fd, theta.kappa, alpha, path)?;
        let g = fd.stiffness();
        let fast = (probe.is_sparse() && g.bandwidth() <= 1).then(|| {
            let m = (alpha / T::lit(2.0)).round().to_u32().unwrap_or(1);
            let n = fd.node_count();
            let off = (0..n.saturating_sub(1)).map(|i| g.get(i, i + 1)).collect();
            (m, g.diagonal(), off)
        });
        Ok(Self { x, fd, alpha, theta, e_inv_gamma, path, fast })
    }

    fn eval(&self, kappa: T) -> Result<T> {
        let a = self.fd.lumped();
        let two = T::lit(2.0);
        let (lambda, log_jac) = match &self.fast {
            Some((m, gd, go)) => {
                if !(kappa > T::zero()) || !kappa.is_finite() {
                    return validation(format!("kappa must be positive, got {kappa}"));
                }
                let k2 = kappa * kappa;
                let g = self.fd.stiffness();
                let mut w = self.x.to_vec();
                for _ in 0..*m {
                    let gw = g.matvec(&w);
                    w = w.iter().zip(gw).zip(a).map(|((&wi, gi), &ai)| (k2 * ai * wi + gi) / ai).collect();
                }
                let lambda: Vec<T> = w.iter().zip(a).map(|(&wi, &ai)| ai * wi).collect();
                let mut log_det = T::zero();
                let mut prev = T::one();
                for i in 0..a.len() {
                    let mut d = k2 * a[i] + gd[i];
                    if i > 0 {
                        d -= go[i - 1] * go[i - 1] / prev;
                    }
                    if !(d > T::zero()) {
                        return numeric("operator matrix is not positive definite");
                    }
                    log_det += d.ln();
                    prev = d;
                }
                let la: T = a.iter().map(|v| v.ln()).sum();
                let half = self.alpha / two;
                (lambda, half * log_det - (half - T::one()) * la)
            }
            None => {
                let op = FieldOperator::new(self.fd, kappa, self.alpha, self.path)?;
                (op.loads_from_field(self.x)?, op.log_jacobian()?)
            }
        };
        let mut quad = T::zero();
        for i in 0..lambda.len() {
            let r = lambda[i] - self.theta.gamma_bar * a[i];
            quad += r * r * self.e_inv_gamma[i] - two * self.theta.mu * r;
        }
        Ok(log_jac - quad / (two * self.theta.sigma * self.theta.sigma))
    }
}

/// Result of the κ step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaStep<T> {
    pub kappa: T,
    pub at_bound: bool,
    /// The search returned a lower Q_κ than the current κ, which was kept.
    pub rejected: bool,
}

/// Bounded maximization of Q_κ over log κ.
pub fn cm_step_kappa<T: Real>(
    x: &[T],
    fd: &FemDiscretization<T>,
    alpha: T,
    theta: &Theta<T>,
    e_inv_gamma: &[T],
    bounds: (T, T),
    path: SolverPath,
) -> Result<KappaStep<T>> {
    let obj = KappaObjective::new(x, fd, alpha, theta, e_inv_gamma, path)?;
    let mut err = None;
    let mut f = |lk: T| match obj.eval(lk.exp()) {
        Ok(v) if v.is_finite() => v,
        Ok(_) => T::neg_infinity(),
        Err(e) => {
            err = Some(e);
            T::neg_infinity()
        }
    };
    let (llo, lhi) = (bounds.0.ln(), bounds.1.ln());
    let lk = theta.kappa.ln().max(llo).min(lhi);
    // A local bracket first; the full interval only when its edge is hit.
    let (nlo, nhi) = ((lk - T::lit(LOCAL_LOG_KAPPA)).max(llo), (lk + T::lit(LOCAL_LOG_KAPPA)).min(lhi));
    let mut best = brent_maximize(&mut f, nlo, nhi, T::lit(1e-10), 200)?;
    let interior_edge =
        |b: &crate::optimize::Maximum<T>| b.at_bound && ((b.arg == nlo && nlo > llo) || (b.arg == nhi && nhi < lhi));
    if interior_edge(&best) {
        best = brent_maximize(&mut f, llo, lhi, T::lit(1e-10), 200)?;
    }
    let current = f(theta.kappa.ln());
    if let Some(e) = err {
        return Err(e);
    }
    if best.value < current {
        return Ok(KappaStep { kappa: theta.kappa, at_bound: false, rejected: true });
    }
    Ok(KappaStep {
        kappa: best.arg.exp(),
        at_bound: best.at_bound && (best.arg == llo || best.arg == lhi),
        rejected: false,
    })
}

/// Half-width in log κ of the first κ search bracket.
const LOCAL_LOG_KAPPA: f64 = 0.25;

fn check_field<T: Real>(x: &[T], fd: &FemDiscretization<T>) -> Result<()> {
    if !fd.observation().is_identity() {
        return validation("estimation needs one observation per mesh node");
    }
    if x.len() != fd.node_count() {
        return validation(format!("field has {} values for {} nodes", x.len(), fd.node_count()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return validation("field values must be finite");
    }
    Ok(())
}

/// log density of the nodal field X under θ: Σ log p(Λ_i) + log|C̃K_α|.
pub fn observed_loglik<T: Real>(theta: &Theta<T>, x: &[T], fd: &FemDiscretization<T>, alpha: T) -> Result<T> {
    theta.validate()?;
    check_field(x, fd)?;
    let op = FieldOperator::new(fd, theta.kappa, alpha, SolverPath::Auto)?;
    let lambda = op.loads_from_field(x)?;
    let lp = theta.laplace()?;
    let mut s = op.log_jacobian()?;
    for (&l, &a) in lambda.iter().zip(fd.lumped()) {
        s += crate::noise::noise_load_logpdf(l, a, &lp)?;
    }
    Ok(s)
}

/// Practical range from a regular 1-D series: the first lag where the
/// empirical autocorrelation drops below 0.1, linearly interpolated.
pub fn empirical_range<T: Real>(x: &[T], spacing: T) -> Result<T> {
    let n = x.len();
    if n < 3 {
        return validation("range estimate needs at least three values");
    }
    let m = x.iter().copied().sum::<T>() / T::of_usize(n);
    let acov = |lag: usize| -> T { (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<T>() / T::of_usize(n) };
    let c0 = acov(0);
    if !(c0 > T::zero()) {
        return numeric("range estimate of a constant field");
    }
    let target = T::lit(0.1);
    let mut prev = T::one();
    for lag in 1..n {
        let r = acov(lag) / c0;
        if r < target {
            let frac = (prev - target) / (prev - r);
            return Ok((T::of_usize(lag - 1) + frac) * spacing);
        }
        prev = r;
    }
    numeric("autocorrelation never drops below 0.1")
}

/// Practical range on any mesh. A 1-D mesh uses [`empirical_range`] with the
/// mean node spacing. Otherwise node pairs are binned by distance in bins of
/// the shortest element edge, and the first bin whose correlation drops below
/// 0.1 is interpolated against the previous one at the mean pair distances.
pub fn empirical_range_mesh<T: Real>(x: &[T], mesh: &Mesh<T>) -> Result<T> {
    let n = mesh.node_count();
    if x.len() != n {
        return validation("field length does not match the mesh");
    }
    if mesh.dim() == 1 {
        return empirical_range(x, (mesh.node(n - 1)[0] - mesh.node(0)[0]) / T::of_usize(n - 1));
    }
    let dist = |i: usize, j: usize| -> T {
        mesh.node(i).iter().zip(mesh.node(j)).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt()
    };
    let mut h = T::infinity();
    for e in 0..mesh.element_count() {
        let el = mesh.element(e);
        for (k, &i) in el.iter().enumerate() {
            for &j in &el[k + 1..] {
                h = h.min(dist(i, j));
            }
        }
    }
    if !(h > T::zero()) || !h.is_finite() {
        return validation("range estimate needs a mesh with positive edge lengths");
    }
    let m = x.iter().copied().sum::<T>() / T::of_usize(n);
    let c0 = x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(n);
    if !(c0 > T::zero()) {
        return numeric("range estimate of a constant field");
    }
    let mut bins: Vec<(T, T, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let r = dist(i, j);
            let b = (r / h + T::lit(0.5)).floor().to_usize().unwrap_or(usize::MAX).max(1);
            if b >= bins.len() {
                bins.resize(b + 1, (T::zero(), T::zero(), 0));
            }
            let bin = &mut bins[b];
            bin.0 += (x[i] - m) * (x[j] - m);
            bin.1 += r;
            bin.2 += 1;
        }
    }
    let target = T::lit(0.1);
    let (mut prev_r, mut prev_rho) = (T::zero(), T::one());
    for &(prod, dsum, count) in bins.iter().filter(|b| b.2 > 0) {
        let c = T::of_usize(count);
        let (r, rho) = (dsum / c, prod / c / c0);
        if rho < target {
            return Ok(prev_r + (prev_rho - target) / (prev_rho - rho) * (r - prev_r));
        }
        (prev_r, prev_rho) = (r, rho);
    }
    numeric("autocorrelation never drops below 0.1")
}

/// One ECM iteration in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<T> {
    pub iter: usize,
    /// θ at the start of the iteration (where the E-step was taken).
    pub theta: Theta<T>,
    /// Observed-data log-likelihood at `theta`.
    pub loglik: T,
    pub warm_start: bool,
    /// Truncation bound used in the E-step, if any.
    pub trunc_bound: Option<T>,
    pub clamped: usize,
    pub centre_gap: T,
    pub kappa_at_bound: bool,
    pub kappa_rejected: bool,
    pub tau_at_bound: bool,
    pub degenerate: bool,
}

/// Outcome of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    MaxIterations,
    /// Non-finite objective; the trace ends at the last finite state.
    Diverged,
    /// γ̄ was absorbed into the cusp or pole of one load density after
    /// truncation ended; the estimate is the state at absorption.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmFit<T> {
    pub theta: Theta<T>,
    pub initial: Theta<T>,
    pub loglik: T,
    pub status: FitStatus,
    pub iterations: usize,
    pub trace: Vec<IterationRecord<T>>,
}

/// Draws the random starting values: μ, γ ~ N(0, 1), σ and 1/τ ~ χ²(1),
/// clamped to `config.init_clamp`, and κ₀ = √(8ν)/r̂.
pub fn initial_theta<T: Real, R: Rng + ?Sized>(
    x: &[T],
    fd: &FemDiscretization<T>,
    alpha: T,
    config: &EcmConfig<T>,
    rng: &mut R,
) -> Result<Theta<T>> {
    let nu = alpha - T::of_usize(fd.mesh().dim()) / T::lit(2.0);
    let r = empirical_range_mesh(x, fd.mesh())?;
    let kappa = (T::lit(8.0) * nu).sqrt() / r;
    let chi = ChiSquared::new(1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let mu: f64 = StandardNormal.sample(rng);
    let gamma: f64 = StandardNormal.sample(rng);
    let sigma: f64 = chi.sample(rng);
    let inv_tau: f64 = chi.sample(rng);
    let (lo, hi) = config.init_clamp;
    let sigma = T::lit(sigma).max(lo).min(hi);
    let tau = (T::one() / T::lit(inv_tau)).max(lo).min(hi);
    Ok(Theta { kappa, sigma, mu: T::lit(mu), gamma_bar: T::lit(gamma) * tau, tau })
}

fn scaled_change<T: Real>(old: &Theta<T>, new: &Theta<T>) -> T {
    let rel = |o: T, n: T| (n - o).abs() / n.abs();
    let loc = |o: T, n: T| (n - o).abs() / n.abs().max(new.sigma);
    rel(old.kappa, new.kappa)
        .max(rel(old.sigma, new.sigma))
        .max(rel(old.tau, new.tau))
        .max(loc(old.mu, new.mu))
        .max(loc(old.gamma_bar, new.gamma_bar))
}

/// Full fit: random start, fixed-κ warm start, then alternating E-step,
/// noise CM step and κ CM step until convergence.
pub fn ecm_fit<T: Real, R: Rng + ?Sized>(
    x: &[T],
    fd: &FemDiscretization<T>,
    alpha: T,
    config: &EcmConfig<T>,
    rng: &mut R,
) -> Result<EcmFit<T>> {
    config.validate()?;
    check_field(x, fd)?;
    let init = initial_theta(x, fd, alpha, config, rng)?;
    ecm_run(x, fd, alpha, config, init)
}

/// ECM from a given starting point.
pub fn ecm_run<T: Real>(
    x: &[T],
    fd: &FemDiscretization<T>,
    alpha: T,
    config: &EcmConfig<T>,
    init: Theta<T>,
) -> Result<EcmFit<T>> {
    config.validate()?;
    check_field(x, fd)?;
    init.validate()?;
    let a = fd.lumped();
    let kappa_bounds = config.kappa_bounds.unwrap_or((init.kappa / T::lit(100.0), init.kappa * T::lit(100.0)));
    let tau_bounds = config.tau_bounds.unwrap_or((init.tau * T::lit(1e-3), init.tau * T::lit(1e3)));
    let mut theta = init;
    let mut op = FieldOperator::new(fd, theta.kappa, alpha, config.solver)?;
    let mut trace = Vec::new();
    let total = config.init_steps + config.max_iters;
    let mut status = FitStatus::MaxIterations;
    for j in 0..total {
        let warm = j < config.init_steps;
        let trunc = config.trunc_bound(j);
        let lambda = op.loads_from_field(x)?;
        let ex = match e_step(&lambda, a, &theta, trunc, config.eps_order_fd, config.order_difference) {
            Ok(ex) => ex,
            Err(e) if e.is_numeric() => {
                status = FitStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let loglik = ex.noise_loglik + op.log_jacobian()?;
        if trunc.is_none() && !(ex.centre_gap >= config.singular_gap) {
            trace.push(IterationRecord {
                iter: j,
                theta,
                loglik,
                warm_start: warm,
                trunc_bound: trunc,
                clamped: ex.clamped,
                centre_gap: ex.centre_gap,
                kappa_at_bound: false,
                kappa_rejected: false,
                tau_at_bound: false,
                degenerate: false,
            });
            status = FitStatus::Singular;
            break;
        }
        let step = cm_step_noise(&theta, &lambda, a, &ex, tau_bounds, config.tau_update)?;
        let mut next =
            Theta { kappa: theta.kappa, sigma: step.sigma, mu: step.mu, gamma_bar: step.gamma_bar, tau: step.tau };
        let mut ks = KappaStep { kappa: theta.kappa, at_bound: false, rejected: false };
        if !warm {
            ks = cm_step_kappa(x, fd, alpha, &next, &ex.e_inv_gamma, kappa_bounds, config.solver)?;
            next.kappa = ks.kappa;
        }
        trace.push(IterationRecord {
            iter: j,
            theta,
            loglik,
            warm_start: warm,
            trunc_bound: trunc,
            clamped: ex.clamped,
            centre_gap: ex.centre_gap,
            kappa_at_bound: ks.at_bound,
            kappa_rejected: ks.rejected,
            tau_at_bound: step.tau_at_bound,
            degenerate: step.degenerate,
        });
        if next.validate().is_err() {
            status = FitStatus::Diverged;
            break;
        }
        let change = scaled_change(&theta, &next);
        if next.kappa != theta.kappa {
            op = FieldOperator::new(fd, next.kappa, alpha, config.solver)?;
        }
        theta = next;
        if !warm && change < config.rel_tol {
            status = FitStatus::Converged;
            break;
        }
    }
    let loglik = match observed_loglik(&theta, x, fd, alpha) {
        Ok(v) => v,
        Err(Error::Pole(_)) => T::infinity(),
        Err(e) => return Err(e),
    };
    Ok(EcmFit { theta, initial: init, loglik, status, iterations: trace.len(), trace })
}
