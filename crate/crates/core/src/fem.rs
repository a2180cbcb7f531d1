//! Piecewise-linear finite elements on 1-D grids and structured 2-D
//! triangulations: mass and stiffness assembly, mass lumping, the operator
//! K = κ²C̃ + G and its fractional powers (C̃⁻¹K)^{α/2}.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::linalg::{symmetric_eigen, tridiagonal_eigen, BandedCholesky, CsrMatrix, SymmetricEigen};
use crate::Real;

/// Simplicial mesh in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh<T> {
    dim: usize,
    coords: Vec<T>,
    elements: Vec<usize>,
}

impl<T: Real> Mesh<T> {
    /// Mesh from flat coordinate (`dim` per node) and element (`dim + 1` per
    /// simplex) arrays.
    pub fn new(dim: usize, coords: Vec<T>, elements: Vec<usize>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return validation(format!("mesh dimension must be 1 or 2, got {dim}"));
        }
        if coords.len() % dim != 0 || elements.len() % (dim + 1) != 0 {
            return validation("coordinate or element array length does not match the dimension");
        }
        let mesh = Self { dim, coords, elements };
        let n = mesh.node_count();
        if mesh.elements.iter().any(|&i| i >= n) {
            return validation("element references a node that does not exist");
        }
        if mesh.coords.iter().any(|c| !c.is_finite()) {
            return validation("node coordinates must be finite");
        }
        if dim == 1 {
            if mesh.coords.windows(2).any(|w| !(w[1] > w[0])) {
                return validation("1-D nodes must be strictly increasing");
            }
        } else {
            mesh.check_conforming()?;
        }
        for e in 0..mesh.element_count() {
            if !(mesh.element_measure(e) > T::zero()) {
                return validation(format!("element {e} is degenerate or negatively oriented"));
            }
        }
        Ok(mesh)
    }

    fn check_conforming(&self) -> Result<()> {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(3 * self.element_count());
        for e in 0..self.element_count() {
            let t = self.element(e);
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        let mut k = 0;
        while k < edges.len() {
            let mut m = k + 1;
            while m < edges.len() && edges[m] == edges[k] {
                m += 1;
            }
            if m - k > 2 {
                return validation("triangulation is not conforming: an edge is shared by more than two triangles");
            }
            k = m;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn element_count(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn node(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    /// Length or signed area of element `e`.
    pub fn element_measure(&self, e: usize) -> T {
        let t = self.element(e);
        if self.dim == 1 {
            self.node(t[1])[0] - self.node(t[0])[0]
        } else {
            let (p, q, r) = (self.node(t[0]), self.node(t[1]), self.node(t[2]));
            T::lit(0.5) * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
        }
    }

    /// Total length or area.
    pub fn measure(&self) -> T {
        (0..self.element_count()).map(|e| self.element_measure(e)).sum()
    }
}

/// Uniform 1-D mesh with `n` nodes `x0, x0 + h, …`.
pub fn build_mesh_1d<T: Real>(x0: T, n: usize, h: T) -> Result<Mesh<T>> {
    if n < 3 || !(h > T::zero()) || !x0.is_finite() {
        return validation(format!("1-D mesh needs n >= 3 and h > 0 (got n = {n}, h = {h})"));
    }
    build_mesh_1d_nodes(&(0..n).map(|i| x0 + h * T::of_usize(i)).collect::<Vec<_>>())
}

/// 1-D mesh on the given strictly increasing nodes.
pub fn build_mesh_1d_nodes<T: Real>(nodes: &[T]) -> Result<Mesh<T>> {
    if nodes.len() < 2 {
        return validation("1-D mesh needs at least two nodes");
    }
    let elements = (0..nodes.len() - 1).flat_map(|i| [i, i + 1]).collect();
    Mesh::new(1, nodes.to_vec(), elements)
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

/// Structured triangulation with `nx × ny` nodes in row-major order
/// (`index = j·nx + i`); every cell is split along its lower-left to
/// upper-right diagonal.
pub fn build_mesh_2d<T: Real>(rect: Rect<T>, nx: usize, ny: usize) -> Result<Mesh<T>> {
    if nx < 3 || ny < 3 || !(rect.x1 > rect.x0) || !(rect.y1 > rect.y0) {
        return validation(format!("2-D mesh needs nx, ny >= 3 and a non-empty rectangle (got {nx} x {ny})"));
    }
    let hx = (rect.x1 - rect.x0) / T::of_usize(nx - 1);
    let hy = (rect.y1 - rect.y0) / T::of_usize(ny - 1);
    let mut coords = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            coords.push(if i == nx - 1 { rect.x1 } else { rect.x0 + hx * T::of_usize(i) });
            coords.push(if j == ny - 1 { rect.y1 } else { rect.y0 + hy * T::of_usize(j) });
        }
    }
    let mut elements = Vec::with_capacity(6 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let p00 = j * nx + i;
            let p10 = p00 + 1;
            let p01 = p00 + nx;
            let p11 = p01 + 1;
            elements.extend_from_slice(&[p00, p10, p11, p00, p11, p01]);
        }
    }
    Mesh::new(2, coords, elements)
}

/// Observation operator Φ with Φ_ij = φ_j(s_i).
#[derive(Debug, Clone, PartialEq)]
pub enum Observation<T> {
    /// Observations at the mesh nodes.
    Identity(usize),
    Matrix(CsrMatrix<T>),
}

impl<T: Real> Observation<T> {
    pub fn apply(&self, w: &[T]) -> Vec<T> {
        match self {
            Observation::Identity(_) => w.to_vec(),
            Observation::Matrix(m) => m.matvec(w),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Observation::Identity(_))
    }
}

/// Mass matrix used in the operator K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MassMatrix {
    /// Diagonal C̃ with a_i = ∫φ_i (Markov approximation).
    #[default]
    Lumped,
    /// Full consistent mass matrix C.
    Consistent,
}

/// Assembled finite-element matrices of a mesh.
#[derive(Debug)]
pub struct FemDiscretization<T> {
    mesh: Mesh<T>,
    mass: CsrMatrix<T>,
    stiffness: CsrMatrix<T>,
    lumped: Vec<T>,
    observation: Observation<T>,
    eigenvalues: OnceLock<Result<Vec<T>>>,
    spectrum: OnceLock<Result<SymmetricEigen<T>>>,
}

impl<T: Real> Clone for FemDiscretization<T> {
    fn clone(&self) -> Self {
        Self {
            mesh: self.mesh.clone(),
            mass: self.mass.clone(),
            stiffness: self.stiffness.clone(),
            lumped: self.lumped.clone(),
            observation: self.observation.clone(),
            eigenvalues: OnceLock::new(),
            spectrum: OnceLock::new(),
        }
    }
}

/// Assembles mass and stiffness matrices by exact integration of P1 hats.
pub fn assemble<T: Real>(mesh: &Mesh<T>) -> Result<FemDiscretization<T>> {
    let n = mesh.node_count();
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    for e in 0..mesh.element_count() {
        let t = mesh.element(e);
        let m = mesh.element_measure(e);
        if !(m > T::zero()) {
            return validation(format!("degenerate element {e}"));
        }
        if mesh.dim() == 1 {
            let h = m;
            let (mi, mo) = (h / T::lit(3.0), h / T::lit(6.0));
            let g = h.recip();
            for (a, &i) in t.iter().enumerate() {
                for (b, &j) in t.iter().enumerate() {
                    mass.push((i, j, if a == b { mi } else { mo }));
                    stiff.push((i, j, if a == b { g } else { -g }));
                }
            }
        } else {
            let p: Vec<&[T]> = t.iter().map(|&i| mesh.node(i)).collect();
            let bc: Vec<(T, T)> = (0..3)
                .map(|k| {
                    let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                    (p[j][1] - p[l][1], p[l][0] - p[j][0])
                })
                .collect();
            let four_a = T::lit(4.0) * m;
            let (mi, mo) = (m / T::lit(6.0), m / T::lit(12.0));
            for (a, &i) in t.iter().enumerate() {
                for (b, &j) in t.iter().enumerate() {
                    mass.push((i, j, if a == b { mi } else { mo }));
                    stiff.push((i, j, (bc[a].0 * bc[b].0 + bc[a].1 * bc[b].1) / four_a));
                }
            }
        }
    }
    let mass = CsrMatrix::from_triplets(n, n, &mass)?;
    let stiffness = CsrMatrix::from_triplets(n, n, &stiff)?;
    FemDiscretization::from_parts(mesh.clone(), mass, stiffness)
}

impl<T: Real> FemDiscretization<T> {
    /// Discretization from explicit matrices; the lumped masses are the row
    /// sums of `mass`.
    pub fn from_parts(mesh: Mesh<T>, mass: CsrMatrix<T>, stiffness: CsrMatrix<T>) -> Result<Self> {
        let n = mesh.node_count();
        if mass.nrows() != n || mass.ncols() != n || stiffness.nrows() != n || stiffness.ncols() != n {
            return validation("matrix dimensions do not match the mesh");
        }
        if !mass.is_symmetric() || !stiffness.is_symmetric() {
            return validation("mass and stiffness matrices must be symmetric");
        }
        let lumped = mass.row_sums();
        if lumped.iter().any(|&a| !(a > T::zero())) {
            return validation("lumped masses must be positive");
        }
        Ok(Self {
            mesh,
            mass,
            stiffness,
            lumped,
            observation: Observation::Identity(n),
            eigenvalues: OnceLock::new(),
            spectrum: OnceLock::new(),
        })
    }

    /// Replaces Φ by point evaluation of the basis at `locations` (flat, `dim`
    /// coordinates per point).
    pub fn with_observations(mut self, locations: &[T]) -> Result<Self> {
        let dim = self.mesh.dim();
        if locations.len() % dim != 0 {
            return validation("observation coordinates do not match the mesh dimension");
        }
        let mut trip = Vec::new();
        for (row, s) in locations.chunks(dim).enumerate() {
            let (nodes, bary) = self.locate(s)?;
            for (&j, &b) in nodes.iter().zip(&bary) {
                if b != T::zero() {
                    trip.push((row, j, b));
                }
            }
        }
        let m = CsrMatrix::from_triplets(locations.len() / dim, self.mesh.node_count(), &trip)?;
        self.observation = Observation::Matrix(m);
        Ok(self)
    }

    fn locate(&self, s: &[T]) -> Result<(Vec<usize>, Vec<T>)> {
        let tol = T::lit(1e-12);
        for e in 0..self.mesh.element_count() {
            let t = self.mesh.element(e);
            if self.mesh.dim() == 1 {
                let (a, b) = (self.mesh.node(t[0])[0], self.mesh.node(t[1])[0]);
                let w = (s[0] - a) / (b - a);
                if w >= -tol && w <= T::one() + tol {
                    return Ok((t.to_vec(), vec![T::one() - w, w]));
                }
            } else {
                let (p, q, r) = (self.mesh.node(t[0]), self.mesh.node(t[1]), self.mesh.node(t[2]));
                let det = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
                let l1 = ((s[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (s[1] - p[1])) / det;
                let l2 = ((q[0] - p[0]) * (s[1] - p[1]) - (s[0] - p[0]) * (q[1] - p[1])) / det;
                let l0 = T::one() - l1 - l2;
                if l0 >= -tol && l1 >= -tol && l2 >= -tol {
                    return Ok((t.to_vec(), vec![l0, l1, l2]));
                }
            }
        }
        validation("observation location lies outside the mesh")
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    /// Consistent mass matrix C.
    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    /// Stiffness matrix G.
    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    /// Lumped masses a_i = ∫φ_i.
    pub fn lumped(&self) -> &[T] {
        &self.lumped
    }

    pub fn observation(&self) -> &Observation<T> {
        &self.observation
    }

    fn symmetrized_diag_off(&self) -> Option<(Vec<T>, Vec<T>)> {
        if self.stiffness.bandwidth() > 1 {
            return None;
        }
        let n = self.node_count();
        let a = &self.lumped;
        let diag = (0..n).map(|i| self.stiffness.get(i, i) / a[i]).collect();
        let off = (0..n.saturating_sub(1)).map(|i| self.stiffness.get(i, i + 1) / (a[i] * a[i + 1]).sqrt()).collect();
        Some((diag, off))
    }

    fn symmetrized_dense(&self) -> Vec<T> {
        let n = self.node_count();
        let s: Vec<T> = self.lumped.iter().map(|a| a.sqrt().recip()).collect();
        let mut d = vec![T::zero(); n * n];
        for (i, j, v) in self.stiffness.triplets() {
            d[i * n + j] = s[i] * v * s[j];
        }
        d
    }

    fn compute_spectrum(&self, want_vectors: bool) -> Result<SymmetricEigen<T>> {
        let mut e = match self.symmetrized_diag_off() {
            Some((d, o)) if self.node_count() > 1 => tridiagonal_eigen(&d, &o, want_vectors)?,
            _ => symmetric_eigen(&self.symmetrized_dense(), self.node_count())?,
        };
        for v in e.values.iter_mut() {
            *v = v.max(T::zero());
        }
        Ok(e)
    }

    /// Eigenvalues λ_i of G v = λ C̃ v, ascending.
    pub fn eigenvalues(&self) -> Result<&[T]> {
        if let Some(Ok(s)) = self.spectrum.get() {
            return Ok(&s.values);
        }
        self.eigenvalues
            .get_or_init(|| self.compute_spectrum(false).map(|e| e.values))
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(Clone::clone)
    }

    /// Orthonormal eigen-decomposition of C̃^{-1/2} G C̃^{-1/2}.
    pub fn spectrum(&self) -> Result<&SymmetricEigen<T>> {
        self.spectrum.get_or_init(|| self.compute_spectrum(true)).as_ref().map_err(Clone::clone)
    }
}

/// K = κ² C̃ + G (lumped mass).
pub fn operator_matrix<T: Real>(fd: &FemDiscretization<T>, kappa: T) -> CsrMatrix<T> {
    operator_matrix_with(fd, kappa, MassMatrix::Lumped)
}

/// K = κ² M + G with the chosen mass matrix M.
pub fn operator_matrix_with<T: Real>(fd: &FemDiscretization<T>, kappa: T, mass: MassMatrix) -> CsrMatrix<T> {
    let k2 = kappa * kappa;
    match mass {
        MassMatrix::Lumped => CsrMatrix::from_diagonal(&fd.lumped).linear_combination(k2, &fd.stiffness, T::one()),
        MassMatrix::Consistent => fd.mass.linear_combination(k2, &fd.stiffness, T::one()),
    }
}

fn even_order<T: Real>(alpha: T) -> Option<usize> {
    let m = alpha / T::lit(2.0);
    if alpha >= T::lit(2.0) && m.fract() == T::zero() {
        m.to_usize()
    } else {
        None
    }
}

/// K_α = K C̃⁻¹ K_{α−2} with K_2 = K, for even integer α.
pub fn k_alpha_even<T: Real>(fd: &FemDiscretization<T>, kappa: T, alpha: u32) -> Result<CsrMatrix<T>> {
    if alpha < 2 || alpha % 2 != 0 {
        return validation(format!("k_alpha_even needs an even alpha >= 2, got {alpha}; use fractional_apply"));
    }
    let k = operator_matrix(fd, kappa);
    let inv_a: Vec<T> = fd.lumped.iter().map(|a| a.recip()).collect();
    let mut out = k.clone();
    for _ in 1..alpha / 2 {
        out = k.matmul(&out.scale_rows(&inv_a));
    }
    Ok(out)
}

/// Direction of a fractional operator application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// (C̃⁻¹K)^{−α/2} w
    Inverse,
    /// (C̃⁻¹K)^{α/2} w
    Forward,
}

/// Linear-algebra route for operator applications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SolverPath {
    /// Sparse recursion for even α, spectral otherwise.
    #[default]
    Auto,
    Spectral,
    /// Banded Cholesky of K; even α only.
    Sparse,
}

fn check_alpha<T: Real>(fd: &FemDiscretization<T>, alpha: T) -> Result<()> {
    let half_d = T::of_usize(fd.mesh.dim()) / T::lit(2.0);
    if !(alpha > half_d) || !alpha.is_finite() {
        return domain(format!("alpha must exceed d/2, got {alpha}"));
    }
    Ok(())
}

/// (C̃⁻¹K)^{±α/2} w through the eigen-decomposition of the symmetrized pencil.
pub fn fractional_apply<T: Real>(
    fd: &FemDiscretization<T>,
    kappa: T,
    alpha: T,
    w: &[T],
    dir: Direction,
) -> Result<Vec<T>> {
    FieldOperator::new(fd, kappa, alpha, SolverPath::Spectral)?.apply_dir(w, dir)
}

/// (α/2)·log|K| with K = κ²C̃ + G.
pub fn log_det_k_alpha<T: Real>(fd: &FemDiscretization<T>, kappa: T, alpha: T, path: SolverPath) -> Result<T> {
    FieldOperator::new(fd, kappa, alpha, path)?.log_det()
}

/// The operator (C̃⁻¹K)^{α/2} at fixed κ and α with its factorization cached.
#[derive(Debug, Clone)]
pub struct FieldOperator<'a, T> {
    fd: &'a FemDiscretization<T>,
    kappa: T,
    alpha: T,
    sparse: Option<(usize, CsrMatrix<T>, BandedCholesky<T>)>,
}

impl<'a, T: Real> FieldOperator<'a, T> {
    pub fn new(fd: &'a FemDiscretization<T>, kappa: T, alpha: T, path: SolverPath) -> Result<Self> {
        check_alpha(fd, alpha)?;
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return validation(format!("kappa must be positive, got {kappa}"));
        }
        let even = even_order(alpha);
        let use_sparse = match path {
            SolverPath::Spectral => false,
            SolverPath::Auto => even.is_some(),
            SolverPath::Sparse => {
                if even.is_none() {
                    return validation(format!("the sparse path needs an even integer alpha, got {alpha}"));
                }
                true
            }
        };
        let sparse = if use_sparse {
            let k = operator_matrix(fd, kappa);
            let chol = BandedCholesky::factor(&k)?;
            Some((even.unwrap_or(1), k, chol))
        } else {
            None
        };
        Ok(Self { fd, kappa, alpha, sparse })
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse.is_some()
    }

    fn apply_dir(&self, w: &[T], dir: Direction) -> Result<Vec<T>> {
        let n = self.fd.node_count();
        if w.len() != n {
            return validation(format!("vector length {} does not match {n} nodes", w.len()));
        }
        let a = &self.fd.lumped;
        if let Some((m, k, chol)) = &self.sparse {
            let mut v = w.to_vec();
            for _ in 0..*m {
                v = match dir {
                    Direction::Inverse => chol.solve(&v.iter().zip(a).map(|(&x, &ai)| ai * x).collect::<Vec<_>>()),
                    Direction::Forward => k.matvec(&v).into_iter().zip(a).map(|(x, &ai)| x / ai).collect(),
                };
            }
            return Ok(v);
        }
        let spec = self.fd.spectrum()?;
        let half = self.alpha / T::lit(2.0);
        let pw = match dir {
            Direction::Inverse => -half,
            Direction::Forward => half,
        };
        let k2 = self.kappa * self.kappa;
        let z: Vec<T> = w.iter().zip(a).map(|(&x, &ai)| ai.sqrt() * x).collect();
        let mut y = spec.to_eigen_coords(&z);
        for (yk, &lk) in y.iter_mut().zip(&spec.values) {
            *yk *= (lk + k2).powf(pw);
        }
        Ok(spec.from_eigen_coords(&y).into_iter().zip(a).map(|(x, &ai)| x / ai.sqrt()).collect())
    }

    /// (C̃⁻¹K)^{−α/2} w.
    pub fn solve(&self, w: &[T]) -> Result<Vec<T>> {
        self.apply_dir(w, Direction::Inverse)
    }

    /// (C̃⁻¹K)^{α/2} w.
    pub fn apply(&self, w: &[T]) -> Result<Vec<T>> {
        self.apply_dir(w, Direction::Forward)
    }

    /// Noise loads Λ = C̃ (C̃⁻¹K)^{α/2} x of a nodal field x.
    pub fn loads_from_field(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.apply(x)?.into_iter().zip(&self.fd.lumped).map(|(v, &a)| a * v).collect())
    }

    /// (α/2)·log|K|.
    pub fn log_det(&self) -> Result<T> {
        let half = self.alpha / T::lit(2.0);
        if let Some((_, _, chol)) = &self.sparse {
            return Ok(half * chol.log_det());
        }
        let k2 = self.kappa * self.kappa;
        let s: T = self.fd.eigenvalues()?.iter().map(|&l| (l + k2).ln()).sum();
        let la: T = self.fd.lumped.iter().map(|a| a.ln()).sum();
        Ok(half * (s + la))
    }

    /// log|C̃ K_α| with K_α = (C̃⁻¹K)^{α/2}, the Jacobian of x ↦ Λ.
    pub fn log_jacobian(&self) -> Result<T> {
        let la: T = self.fd.lumped.iter().map(|a| a.ln()).sum();
        Ok(self.log_det()? - (self.alpha / T::lit(2.0) - T::one()) * la)
    }
}
