//! Matérn covariance, spectrum and Green kernel, and the marginal law of a
//! Laplace-driven field through its characteristic function.

use num_complex::Complex;
use num_traits::Float;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{numeric, validation, Error, Result};
use crate::noise::LaplaceParams;
use crate::quadrature::{gauss_legendre, push_panel};
use crate::specfun::{log_bessel_k, log_gamma};
use crate::Real;

/// Matérn smoothness, inverse range and variance parameter in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams<T> {
    nu: T,
    kappa: T,
    phi2: T,
    d: usize,
    alpha: T,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        validation(format!("dimension must be 1 or 2, got {d}"))
    }
}

impl<T: Real> MaternParams<T> {
    pub fn new(nu: T, kappa: T, phi2: T, d: usize) -> Result<Self> {
        check_dim(d)?;
        if !(nu > T::zero() && kappa > T::zero() && phi2 > T::zero())
            || !(nu.is_finite() && kappa.is_finite() && phi2.is_finite())
        {
            return validation(format!("Matérn parameters need nu, kappa, phi2 > 0 (got {nu}, {kappa}, {phi2})"));
        }
        let alpha = nu + T::of_usize(d) / T::lit(2.0);
        Ok(Self { nu, kappa, phi2, d, alpha })
    }

    /// Parameters from the SPDE order `alpha = nu + d/2`.
    pub fn from_alpha(alpha: T, kappa: T, phi2: T, d: usize) -> Result<Self> {
        check_dim(d)?;
        let nu = alpha - T::of_usize(d) / T::lit(2.0);
        if !(nu > T::zero()) {
            return validation(format!("alpha must exceed d/2, got alpha = {alpha}, d = {d}"));
        }
        let mut p = Self::new(nu, kappa, phi2, d)?;
        p.alpha = alpha;
        Ok(p)
    }

    pub fn nu(&self) -> T {
        self.nu
    }
    pub fn kappa(&self) -> T {
        self.kappa
    }
    pub fn phi2(&self) -> T {
        self.phi2
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Same smoothness and range with a different variance parameter.
    pub fn with_phi2(&self, phi2: T) -> Result<Self> {
        let mut p = Self::new(self.nu, self.kappa, phi2, self.d)?;
        p.alpha = self.alpha;
        Ok(p)
    }

    fn half_d(&self) -> T {
        T::of_usize(self.d) / T::lit(2.0)
    }
}

fn norm<T: Real>(h: &[T]) -> T {
    h.iter().fold(T::zero(), |acc, &x| acc.hypot(x))
}

/// Matérn covariance at lag vector `h`.
pub fn matern_cov<T: Real>(h: &[T], p: &MaternParams<T>) -> T {
    matern_cov_radial(norm(h), p)
}

/// Matérn covariance at distance `r >= 0`.
pub fn matern_cov_radial<T: Real>(r: T, p: &MaternParams<T>) -> T {
    let r = r.abs();
    let four_pi = T::lit(4.0) * T::PI();
    let lg_alpha = log_gamma(p.alpha).unwrap_or_else(|_| T::nan());
    if r == T::zero() {
        let lg_nu = log_gamma(p.nu).unwrap_or_else(|_| T::nan());
        return (p.phi2.ln() + lg_nu - p.half_d() * four_pi.ln() - lg_alpha - T::lit(2.0) * p.nu * p.kappa.ln()).exp();
    }
    let x = p.kappa * r;
    let lk = match log_bessel_k(p.nu, x) {
        Ok(v) => v,
        Err(_) => return T::zero(),
    };
    ((T::one() - p.nu) * T::LN_2() + p.phi2.ln()
        - p.half_d() * four_pi.ln()
        - lg_alpha
        - T::lit(2.0) * p.nu * p.kappa.ln()
        + p.nu * x.ln()
        + lk)
        .exp()
}

/// Matérn spectral density at frequency vector `k`.
pub fn matern_spectrum<T: Real>(k: &[T], p: &MaternParams<T>) -> T {
    let k2 = k.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let two_pi = T::lit(2.0) * T::PI();
    p.phi2 / two_pi.powi(p.d as i32) * (p.kappa * p.kappa + k2).powf(-p.alpha)
}

/// Green kernel of `(κ² − Δ)^{α/2}` at distance `r` in dimension `d`.
///
/// Its shape is a Matérn covariance with smoothness `(α − d)/2`. At `r = 0`
/// the kernel is finite only for `α > d`; otherwise a [`Error::Pole`] is
/// returned.
pub fn green_kernel<T: Real>(r: T, alpha: T, kappa: T, d: usize) -> Result<T> {
    check_dim(d)?;
    let half_d = T::of_usize(d) / T::lit(2.0);
    if !(alpha > half_d) || !(kappa > T::zero()) || !alpha.is_finite() {
        return validation(format!("green_kernel needs alpha > d/2 and kappa > 0 (alpha = {alpha})"));
    }
    if !(r >= T::zero()) {
        return validation(format!("distance must be non-negative, got {r}"));
    }
    let nu_k = (alpha - T::of_usize(d)) / T::lit(2.0);
    let four_pi = T::lit(4.0) * T::PI();
    let base = -half_d * four_pi.ln() - log_gamma(alpha / T::lit(2.0))? - (alpha - T::of_usize(d)) * kappa.ln();
    if r == T::zero() {
        if nu_k > T::zero() {
            return Ok((base + log_gamma(nu_k)?).exp());
        }
        return Err(Error::Pole(format!("Green kernel is unbounded at the origin for alpha = {alpha} <= d = {d}")));
    }
    let x = kappa * r;
    match log_bessel_k(nu_k, x) {
        Ok(lk) => Ok(((T::one() - nu_k) * T::LN_2() + base + nu_k * x.ln() + lk).exp()),
        Err(_) if x.is_infinite() => Ok(T::zero()),
        Err(e) => Err(e),
    }
}

/// Radial quadrature settings for the characteristic-function integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfQuadrature<T> {
    /// Gauss–Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Truncate at the radius where the kernel falls below `kernel_tol` times
    /// its value at the innermost node.
    pub kernel_tol: T,
    /// Accepted relative error of the quadrature for ∫G (known in closed form).
    pub mass_tol: T,
    /// Upper limit on the truncation radius, in units of 1/κ.
    pub max_radius: T,
}

impl<T: Real> Default for CfQuadrature<T> {
    fn default() -> Self {
        Self { nodes_per_panel: 12, kernel_tol: T::lit(1e-10), mass_tol: T::lit(1e-6), max_radius: T::lit(1e4) }
    }
}

/// Characteristic function of the marginal X(s), with the radial quadrature
/// of the kernel precomputed.
#[derive(Debug, Clone)]
pub struct MarginalCf<T> {
    weights: Vec<T>,
    kernel: Vec<T>,
    lp: LaplaceParams<T>,
    int_g: T,
    int_g2: T,
}

impl<T: Real> MarginalCf<T> {
    pub fn new(lp: &LaplaceParams<T>, mp: &MaternParams<T>, quad: &CfQuadrature<T>) -> Result<Self> {
        if quad.nodes_per_panel == 0 {
            return validation("nodes_per_panel must be at least 1");
        }
        let (alpha, kappa, d) = (mp.alpha(), mp.kappa(), mp.d());
        let rule = gauss_legendre::<T>(quad.nodes_per_panel);
        let mut r = Vec::new();
        let mut w = Vec::new();
        let unit = kappa.recip();
        let singular = !(alpha > T::of_usize(d));
        let r_lo = unit * T::lit(if singular { 1e-12 } else { 1e-4 });
        push_panel(&rule, T::zero(), r_lo, &mut r, &mut w);
        let mut a = r_lo;
        while a < unit {
            let b = (a * T::lit(4.0)).min(unit);
            push_panel(&rule, a, b, &mut r, &mut w);
            a = b;
        }
        let g_ref = green_kernel(r[0], alpha, kappa, d)?;
        let limit = quad.max_radius * unit;
        loop {
            let b = a + unit;
            push_panel(&rule, a, b, &mut r, &mut w);
            a = b;
            if green_kernel(a, alpha, kappa, d)? < quad.kernel_tol * g_ref {
                break;
            }
            if a > limit {
                return numeric("kernel does not decay within the maximal quadrature radius");
            }
        }
        let surface = |x: T| if d == 1 { T::lit(2.0) } else { T::lit(2.0) * T::PI() * x };
        let mut weights = Vec::with_capacity(r.len());
        let mut kernel = Vec::with_capacity(r.len());
        for (&ri, &wi) in r.iter().zip(&w) {
            weights.push(wi * surface(ri));
            kernel.push(green_kernel(ri, alpha, kappa, d)?);
        }
        let int_g: T = weights.iter().zip(&kernel).map(|(&w, &g)| w * g).sum();
        let int_g2: T = weights.iter().zip(&kernel).map(|(&w, &g)| w * g * g).sum();
        let exact = kappa.powf(-alpha);
        if ((int_g - exact) / exact).abs() > quad.mass_tol {
            return numeric(format!("characteristic-function quadrature misses kernel mass: {int_g} vs {exact}"));
        }
        Ok(Self { weights, kernel, lp: *lp, int_g, int_g2 })
    }

    /// φ_X(u).
    pub fn eval(&self, u: T) -> Complex<T> {
        if u == T::zero() {
            return Complex::new(T::one(), T::zero());
        }
        let (mu, s2, gamma, tau) = (self.lp.mu(), self.lp.sigma() * self.lp.sigma(), self.lp.gamma(), self.lp.tau());
        let half = T::lit(0.5);
        let mut re = T::zero();
        let mut im = T::zero();
        for (&w, &g) in self.weights.iter().zip(&self.kernel) {
            let ug = u * g;
            let a = half * s2 * ug * ug;
            let b = mu * ug;
            // log|1 + a - i b| = ½ log1p(2a + a² + b²)
            re -= w * half * (T::lit(2.0) * a + a * a + b * b).ln_1p();
            im += w * (gamma * ug + b.atan2(T::one() + a));
        }
        Complex::from_polar((tau * re).exp(), tau * im)
    }

    /// Mean of X(s).
    pub fn mean(&self) -> T {
        self.lp.tau() * (self.lp.gamma() + self.lp.mu()) * self.int_g
    }

    /// Variance of X(s).
    pub fn variance(&self) -> T {
        let (mu, s) = (self.lp.mu(), self.lp.sigma());
        self.lp.tau() * (s * s + mu * mu) * self.int_g2
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }
}

/// Characteristic function of X(s) at `u`.
pub fn marginal_cf<T: Real>(
    u: T,
    lp: &LaplaceParams<T>,
    mp: &MaternParams<T>,
    quad: &CfQuadrature<T>,
) -> Result<Complex<T>> {
    Ok(MarginalCf::new(lp, mp, quad)?.eval(u))
}

/// Settings for the FFT inversion of the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig<T> {
    /// Frequency band edge: smallest U with |φ(U)| below this.
    pub cf_tol: T,
    pub min_points: usize,
    pub max_points: usize,
    /// Values below `clip_tol · peak` (including ringing) are set to zero.
    pub clip_tol: T,
    /// Negative ringing deeper than `max_ringing · peak` is an error.
    pub max_ringing: T,
    /// Accepted density at the periodic wrap point, relative to the peak.
    pub wrap_tol: T,
}

impl<T: Real> Default for InversionConfig<T> {
    fn default() -> Self {
        Self {
            cf_tol: T::lit(1e-10),
            min_points: 1 << 14,
            max_points: 1 << 23,
            clip_tol: T::lit(1e-8),
            max_ringing: T::lit(1e-3),
            wrap_tol: T::lit(1e-7),
        }
    }
}

/// Marginal density of X(s) on an equally spaced grid by FFT inversion of the
/// characteristic function.
pub fn marginal_density<T: Real + FftNum>(
    grid: &[T],
    lp: &LaplaceParams<T>,
    mp: &MaternParams<T>,
    quad: &CfQuadrature<T>,
    inv: &InversionConfig<T>,
) -> Result<Vec<T>> {
    let n = grid.len();
    if n < 2 {
        return validation("density grid needs at least two points");
    }
    let step = (grid[n - 1] - grid[0]) / T::of_usize(n - 1);
    if !(step > T::zero()) {
        return validation("density grid must be increasing");
    }
    let slack = T::lit(1e-9) * (Float::abs(grid[0]) + Float::abs(grid[n - 1]) + step * T::of_usize(n));
    for (i, &x) in grid.iter().enumerate() {
        if Float::abs(x - (grid[0] + step * T::of_usize(i))) > slack {
            return validation("density grid must be equally spaced");
        }
    }
    let cf = MarginalCf::new(lp, mp, quad)?;
    let mean = cf.mean();
    let sd = Float::sqrt(cf.variance());

    // band edge: |φ| is decreasing in |u|, so double then bisect
    let mut hi = T::one() / sd;
    let max_band = T::lit(1e14) / sd;
    while cf.eval(hi).norm() >= inv.cf_tol {
        hi = hi * T::lit(2.0);
        if hi > max_band {
            return numeric("characteristic function does not decay below tolerance; increase the band or tolerance");
        }
    }
    let mut lo = hi / T::lit(2.0);
    for _ in 0..30 {
        let mid = T::lit(0.5) * (lo + hi);
        if cf.eval(mid).norm() >= inv.cf_tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let band = hi;

    let refine = Float::max(Float::ceil(step * band / T::PI()), T::one());
    let refine_n = refine.to_usize().unwrap_or(1).max(1);
    let delta = step / refine;
    let lo_x = Float::min(grid[0], mean - T::lit(20.0) * sd);
    let hi_x = Float::max(grid[n - 1], mean + T::lit(20.0) * sd);
    let center = T::lit(0.5) * (lo_x + hi_x);
    let mut width = T::lit(2.0) * (hi_x - lo_x);
    let span_pts = (n - 1) * refine_n + 1;
    loop {
        let need = Float::ceil(width / delta).to_usize().unwrap_or(usize::MAX);
        let npts = need.max(inv.min_points).max(2 * span_pts).next_power_of_two();
        if npts > inv.max_points {
            return numeric(format!(
                "density inversion needs {npts} FFT points (max {}); increase max_points or cf_tol",
                inv.max_points
            ));
        }
        let nf = T::of_usize(npts);
        let start_f = Float::round((grid[0] - (center - T::lit(0.5) * nf * delta)) / delta);
        let max_start = npts - span_pts;
        let offset = start_f.to_usize().unwrap_or(0).min(max_start);
        let x_start = grid[0] - T::of_usize(offset) * delta;
        let dens = invert_window(&cf, npts, delta, x_start)?;
        let peak = dens.iter().fold(T::zero(), |m, &v| Float::max(m, v));
        let edge = 1 + npts / 200;
        let wrap =
            dens[..edge].iter().chain(&dens[npts - edge..]).fold(T::zero(), |m, &v| Float::max(m, Float::abs(v)));
        if wrap > inv.wrap_tol * peak && npts < inv.max_points {
            width = width * T::lit(2.0);
            continue;
        }
        let min = dens.iter().fold(T::zero(), |m, &v| Float::min(m, v));
        if min < -inv.max_ringing * peak {
            return numeric("density inversion shows strong negative ringing; increase the band");
        }
        let cut = inv.clip_tol * peak;
        return Ok((0..n)
            .map(|i| {
                let v = dens[offset + i * refine_n];
                if v < cut {
                    T::zero()
                } else {
                    v
                }
            })
            .collect());
    }
}

/// Density on the window `x_start + j δ`, `j < npts`, from the CF sampled at
/// `u_k = (k − npts/2) du`, `du = 2π/(npts δ)`.
fn invert_window<T: Real + FftNum>(cf: &MarginalCf<T>, npts: usize, delta: T, x_start: T) -> Result<Vec<T>> {
    let two_pi = T::lit(2.0) * T::PI();
    let du = two_pi / (T::of_usize(npts) * delta);
    let half = npts / 2;
    let mut buf = vec![Complex::new(T::zero(), T::zero()); npts];
    for m in 0..=half {
        let u = T::of_usize(m) * du;
        let v = cf.eval(u) * Complex::from_polar(T::one(), -u * x_start);
        if m < half {
            buf[half + m] = v;
        }
        if m > 0 {
            buf[half - m] = v.conj();
        }
    }
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(npts).process(&mut buf);
    let scale = du / two_pi;
    Ok(buf
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let s = if j % 2 == 0 { scale } else { -scale };
            s * z.re
        })
        .collect())
}
