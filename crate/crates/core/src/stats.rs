//! Summary statistics used by the study and the diagnostics.

use crate::Real;

pub fn mean<T: Real>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::of_usize(x.len())
}

/// Unbiased sample variance.
pub fn variance<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(x.len() - 1)
}

/// Sample skewness g1.
pub fn skewness<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    let n = T::of_usize(x.len());
    let m2 = x.iter().map(|&v| (v - m).powi(2)).sum::<T>() / n;
    let m3 = x.iter().map(|&v| (v - m).powi(3)).sum::<T>() / n;
    m3 / m2.powf(T::lit(1.5))
}

/// Sample excess kurtosis g2.
pub fn excess_kurtosis<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    let n = T::of_usize(x.len());
    let m2 = x.iter().map(|&v| (v - m).powi(2)).sum::<T>() / n;
    let m4 = x.iter().map(|&v| (v - m).powi(4)).sum::<T>() / n;
    m4 / (m2 * m2) - T::lit(3.0)
}

pub fn median<T: Real>(x: &[T]) -> T {
    percentile(x, T::lit(50.0))
}

/// Percentile `p` in [0, 100] with linear interpolation between order
/// statistics; NaNs are ignored.
pub fn percentile<T: Real>(x: &[T], p: T) -> T {
    let mut v: Vec<T> = x.iter().copied().filter(|v| !v.is_nan()).collect();
    if v.is_empty() {
        return T::nan();
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaNs were filtered"));
    let pos = (p / T::lit(100.0)).max(T::zero()).min(T::one()) * T::of_usize(v.len() - 1);
    let lo = pos.floor().to_usize().unwrap_or(0);
    let hi = (lo + 1).min(v.len() - 1);
    let f = pos - T::of_usize(lo);
    v[lo] + f * (v[hi] - v[lo])
}

/// Empirical covariance by lag of replicated fields on a regular 1-D grid,
/// using only nodes in `window` (inclusive index range). Replicates are
/// centred by the pooled mean of each node.
pub fn empirical_covariance<T: Real>(fields: &[Vec<T>], window: (usize, usize), max_lag: usize) -> Vec<T> {
    let (lo, hi) = window;
    let n = hi + 1 - lo;
    let r = T::of_usize(fields.len());
    let means: Vec<T> = (lo..=hi).map(|i| fields.iter().map(|f| f[i]).sum::<T>() / r).collect();
    (0..=max_lag.min(n - 1))
        .map(|lag| {
            let mut s = T::zero();
            for f in fields {
                for i in 0..n - lag {
                    s += (f[lo + i] - means[i]) * (f[lo + i + lag] - means[i + lag]);
                }
            }
            s / (r * T::of_usize(n - lag))
        })
        .collect()
}

/// sup_x |F_n(x) − F(x)| of a sample against a density tabulated on a regular
/// grid; F is the trapezoidal cumulative integral, renormalized to one.
pub fn sup_cdf_distance<T: Real>(sample: &[T], grid: &[T], density: &[T]) -> T {
    let mut cdf = vec![T::zero(); grid.len()];
    for k in 1..grid.len() {
        cdf[k] = cdf[k - 1] + T::lit(0.5) * (density[k] + density[k - 1]) * (grid[k] - grid[k - 1]);
    }
    let total = cdf[grid.len() - 1];
    let mut s: Vec<T> = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = T::of_usize(s.len());
    let model = |x: T| -> T {
        if x <= grid[0] {
            return T::zero();
        }
        if x >= grid[grid.len() - 1] {
            return T::one();
        }
        let k = grid.partition_point(|&g| g <= x) - 1;
        let f = (x - grid[k]) / (grid[k + 1] - grid[k]);
        (cdf[k] + f * (cdf[k + 1] - cdf[k])) / total
    };
    let mut d = T::zero();
    for (i, &x) in s.iter().enumerate() {
        let f = model(x);
        d = d.max((f - T::of_usize(i) / n).abs()).max((T::of_usize(i + 1) / n - f).abs());
    }
    d
}
