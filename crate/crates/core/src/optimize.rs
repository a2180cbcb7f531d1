//! Bounded one-dimensional optimization and root finding (Brent's methods).

use crate::error::{numeric, validation, Result};
use crate::Real;

/// Result of a bounded 1-D maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<T> {
    pub arg: T,
    pub value: T,
    /// The maximizer lies within tolerance of an end of the search interval.
    pub at_bound: bool,
}

/// Maximizes `f` on `[lo, hi]` by Brent's golden-section/parabolic method.
/// The interval ends are also evaluated, so a monotone objective returns the
/// better endpoint.
pub fn brent_maximize<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    xtol: T,
    max_iter: usize,
) -> Result<Maximum<T>> {
    if !(lo < hi) {
        return validation(format!("brent_maximize needs lo < hi, got [{lo}, {hi}]"));
    }
    let golden = T::lit(0.381_966_011_250_105_1);
    let (mut a, mut b) = (lo, hi);
    let mut x = a + golden * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = -f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d = T::zero();
    let mut e = T::zero();
    let half = T::lit(0.5);
    let eps = T::epsilon().sqrt();
    for _ in 0..max_iter {
        let xm = half * (a + b);
        let tol1 = eps * x.abs() + xtol / T::lit(3.0);
        let tol2 = T::lit(2.0) * tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = T::lit(2.0) * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (half * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        let fu = -f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    let mut best = Maximum { arg: x, value: -fx, at_bound: false };
    for end in [lo, hi] {
        let fe = f(end);
        if fe > best.value {
            best = Maximum { arg: end, value: fe, at_bound: true };
        }
    }
    if !best.value.is_finite() {
        return numeric("objective is not finite at the maximizer");
    }
    let span = hi - lo;
    let slack = T::lit(1e-6) * span + xtol;
    if (best.arg - lo).abs() <= slack || (hi - best.arg).abs() <= slack {
        best.at_bound = true;
    }
    Ok(best)
}

/// Finds a root of `f` in `[a, b]` (with `f(a)` and `f(b)` of opposite signs)
/// by Brent's method.
pub fn brent_root<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, xtol: T, max_iter: usize) -> Result<T> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return validation("brent_root needs a sign change on the interval");
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * T::epsilon() * b.abs() + half * xtol;
        let xm = half * (c - b);
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::lit(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol1 {
            b + d
        } else if xm > T::zero() {
            b + tol1
        } else {
            b - tol1
        };
        fb = f(b);
    }
    numeric("brent_root did not converge")
}
