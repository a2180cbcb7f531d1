//! Sparse and dense linear algebra used by the finite-element layer:
//! compressed sparse row matrices, banded Cholesky factorization and a
//! symmetric eigensolver (Householder tridiagonalization + implicit QL).

use crate::error::{numeric, validation, Result};
use crate::Real;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order, so the result is deterministic for a fixed triplet list.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return validation(format!("triplet ({i}, {j}) outside {nrows}x{ncols}"));
            }
        }
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (i, j, v) = triplets[k];
            if last == Some((i, j)) {
                *values.last_mut().expect("non-empty") += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.nrows).map(|i| self.row(i).1.iter().copied().sum()).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).fold(T::zero(), |acc, (&j, &v)| acc + v * x[j])
            })
            .collect()
    }

    /// `a * self + b * other` on the union of the two sparsity patterns.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let j1 = c1.get(p).copied().unwrap_or(usize::MAX);
                let j2 = c2.get(q).copied().unwrap_or(usize::MAX);
                if j1 == j2 {
                    indices.push(j1);
                    values.push(a * v1[p] + b * v2[q]);
                    p += 1;
                    q += 1;
                } else if j1 < j2 {
                    indices.push(j1);
                    values.push(a * v1[p]);
                    p += 1;
                } else {
                    indices.push(j2);
                    values.push(b * v2[q]);
                    q += 1;
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.values[k] = d[i] * out.values[k];
            }
        }
        out
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![T::zero(); other.ncols];
        let mut used = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if !used[j] {
                        used[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                indices.push(j);
                values.push(acc[j]);
                acc[j] = T::zero();
                used[j] = false;
            }
            cols.clear();
            indptr[i + 1] = indices.len();
        }
        Self { nrows: self.nrows, ncols: other.ncols, indptr, indices, values }
    }

    /// Largest |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.nrows {
            for &j in self.row(i).0 {
                b = b.max(i.abs_diff(j));
            }
        }
        b
    }

    /// Exact (bitwise) symmetry of the stored values.
    pub fn is_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
        })
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i * self.ncols + j] = v;
            }
        }
        d
    }

    /// Iterator over stored `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive-definite banded matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    // row i holds L[i, i-bw ..= i], left-padded for the first rows
    l: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return validation("Cholesky needs a square matrix");
        }
        let n = a.nrows();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![T::zero(); n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    l[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > T::zero()) {
                        return numeric(format!("matrix is not positive definite (pivot {i})"));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }

    /// log det A.
    pub fn log_det(&self) -> T {
        let w = self.bw + 1;
        T::lit(2.0) * (0..self.n).map(|i| self.l[i * w + self.bw].ln()).sum::<T>()
    }
}

/// Eigen-decomposition of a real symmetric matrix with ascending eigenvalues.
/// Eigenvectors are stored as rows: `vectors[k * n .. (k + 1) * n]` is the k-th.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> &[T] {
        let n = self.dim();
        &self.vectors[k * n..(k + 1) * n]
    }

    /// `Uᵀ x`: coordinates of `x` in the eigenbasis.
    pub fn to_eigen_coords(&self, x: &[T]) -> Vec<T> {
        (0..self.dim()).map(|k| self.vector(k).iter().zip(x).map(|(&u, &v)| u * v).sum()).collect()
    }

    /// `U y`: back-transform from eigen coordinates.
    pub fn from_eigen_coords(&self, y: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut out = vec![T::zero(); n];
        for (k, &c) in y.iter().enumerate() {
            if c != T::zero() {
                for (o, &u) in out.iter_mut().zip(self.vector(k)) {
                    *o += c * u;
                }
            }
        }
        out
    }
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T], want_vectors: bool) -> Result<SymmetricEigen<T>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return validation("tridiagonal eigenproblem needs off.len() == diag.len() - 1 >= 0");
    }
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[1..n].copy_from_slice(off);
    let mut vt = if want_vectors { identity_rows(n) } else { Vec::new() };
    tql2(&mut d, &mut e, &mut vt, want_vectors)?;
    Ok(sorted(d, vt, want_vectors))
}

/// Eigen-decomposition of a dense symmetric matrix (row-major `n × n`).
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> Result<SymmetricEigen<T>> {
    if a.len() != n * n || n == 0 {
        return validation("symmetric_eigen needs an n x n matrix");
    }
    let mut v = a.to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e, n);
    // tql2 rotates columns of V; work on the transpose so the updates touch rows
    let mut vt = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            vt[j * n + i] = v[i * n + j];
        }
    }
    tql2(&mut d, &mut e, &mut vt, true)?;
    Ok(sorted(d, vt, true))
}

fn identity_rows<T: Real>(n: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    v
}

fn sorted<T: Real>(d: Vec<T>, vt: Vec<T>, want_vectors: bool) -> SymmetricEigen<T> {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = if want_vectors {
        let mut out = Vec::with_capacity(n * n);
        for &k in &order {
            out.extend_from_slice(&vt[k * n..(k + 1) * n]);
        }
        out
    } else {
        Vec::new()
    };
    SymmetricEigen { values, vectors }
}

/// Householder reduction to tridiagonal form (row-major `v`, overwritten with
/// the accumulated orthogonal transform).
fn tred2<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = T::zero();
                v[idx(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in j + 1..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = T::zero();
    }
    v[idx(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL iteration on a symmetric tridiagonal matrix. `e[i]` holds the
/// sub-diagonal entry `(i, i-1)`; `vt` holds transform rows (eigenvector k is
/// row k on exit).
fn tql2<T: Real>(d: &mut [T], e: &mut [T], vt: &mut [T], want_vectors: bool) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    let max_sweeps = 60 * n.max(1);
    let mut sweeps = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return numeric("symmetric eigensolver did not converge");
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        let (lo, hi) = vt.split_at_mut((i + 1) * n);
                        let row_i = &mut lo[i * n..];
                        let row_i1 = &mut hi[..n];
                        for k in 0..n {
                            let hk = row_i1[k];
                            row_i1[k] = s * row_i[k] + c * hk;
                            row_i[k] = c * row_i[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn tridiagonal_known_spectrum() {
        // second-difference matrix: eigenvalues 2 - 2 cos(kπ/(n+1))
        let n = 12;
        let e = tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1], true).unwrap();
        for k in 0..n {
            let want = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((e.values[k] - want).abs() < 1e-13);
        }
        let y = e.to_eigen_coords(&vec![1.0; n]);
        let x = e.from_eigen_coords(&y);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn dense_matches_tridiagonal() {
        let n = 7;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0 + i as f64;
            if i + 1 < n {
                a[i * n + i + 1] = 0.3;
                a[(i + 1) * n + i] = 0.3;
            }
        }
        let dense = symmetric_eigen(&a, n).unwrap();
        let tri =
            tridiagonal_eigen(&(0..n).map(|i| 1.0 + i as f64).collect::<Vec<_>>(), &vec![0.3; n - 1], false).unwrap();
        for k in 0..n {
            assert!((dense.values[k] - tri.values[k]).abs() < 1e-13);
        }
    }
}
