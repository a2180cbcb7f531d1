//! Gauss–Legendre rules.

use crate::Real;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0f64; n];
    let mut w = vec![0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect())
}

/// Appends the nodes and weights of an `n`-point rule mapped to `[a, b]`.
pub fn push_panel<T: Real>(rule: &(Vec<T>, Vec<T>), a: T, b: T, nodes: &mut Vec<T>, weights: &mut Vec<T>) {
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (a + b);
    for (&x, &w) in rule.0.iter().zip(&rule.1) {
        nodes.push(mid + half * x);
        weights.push(half * w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre::<f64>(10);
        for p in 0..20 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "degree {p}");
        }
    }
}
