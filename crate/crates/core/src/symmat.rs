//! Dense symmetric matrices and the spectral primitives used throughout the crate.
//!
//! [`SymMatrix`] stores only the upper triangle, so symmetry holds by construction.
//! Eigendecompositions use cyclic Jacobi rotations, which are accurate and
//! unconditionally stable at the small dimensions this crate works with.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Sweep budget for the cyclic Jacobi eigensolver.
const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense real symmetric matrix with packed upper-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    r * dim - r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Single 1 at `(k, k)`; `unit_diagonal(n + 1, 0)` is the trace-pinning matrix I00.
    pub fn unit_diagonal(dim: usize, k: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.set(k, k, 1.0);
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds the matrix from `f(i, j)` evaluated on the upper triangle (`i <= j`).
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Strict constructor: rows must form an exactly symmetric square matrix of finite values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        check_square(rows)?;
        for i in 0..dim {
            for j in 0..dim {
                if !rows[i][j].is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_upper_fn(dim, |i, j| rows[i][j]))
    }

    /// Lenient constructor: returns `(A + Aᵀ)/2` and whether any asymmetry was found.
    pub fn from_rows_symmetrized(rows: &[Vec<f64>]) -> Result<(Self, bool)> {
        let dim = rows.len();
        check_square(rows)?;
        let mut asymmetric = false;
        for row in rows {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("matrix entry"));
            }
        }
        let m = Self::from_upper_fn(dim, |i, j| {
            if rows[i][j] != rows[j][i] {
                asymmetric = true;
            }
            0.5 * (rows[i][j] + rows[j][i])
        });
        Ok((m, asymmetric))
    }

    /// Outer product `x xᵀ`.
    pub fn outer(x: &[f64]) -> Self {
        Self::from_upper_fn(x.len(), |i, j| x[i] * x[j])
    }

    /// Symmetrized outer product `(x yᵀ + y xᵀ)/2`.
    pub fn sym_outer(x: &[f64], y: &[f64]) -> Self {
        Self::from_upper_fn(x.len(), |i, j| 0.5 * (x[i] * y[j] + y[i] * x[j]))
    }

    /// Sum of outer products of the given vectors.
    pub fn sum_of_outer(dim: usize, vectors: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(dim);
        for v in vectors {
            m.add_outer(1.0, v);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.dim, i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = packed_index(self.dim, i, j);
        self.upper[k] = value;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &SymMatrix) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add_scaled");
        Self {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        self.add_scaled(-1.0, other)
    }

    /// In-place `self += s·x xᵀ`.
    pub fn add_outer(&mut self, s: f64, x: &[f64]) {
        assert_eq!(self.dim, x.len(), "dimension mismatch in add_outer");
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                self.upper[k] += s * x[i] * x[j];
                k += 1;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        dot(x, &ay)
    }

    /// `Bᵀ A B` for a general `dim × k` matrix `B`.
    pub fn congruence(&self, b: &Matrix) -> SymMatrix {
        assert_eq!(b.rows(), self.dim, "dimension mismatch in congruence");
        let ab = self.to_dense().matmul(b);
        let btab = b.transpose().matmul(&ab);
        SymMatrix::from_upper_fn(b.cols(), |i, j| 0.5 * (btab.get(i, j) + btab.get(j, i)))
    }

    /// Upper-left `k × k` block.
    pub fn leading_block(&self, k: usize) -> SymMatrix {
        SymMatrix::from_upper_fn(k, |i, j| self.get(i, j))
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

fn check_square(rows: &[Vec<f64>]) -> Result<()> {
    let dim = rows.len();
    if dim == 0 {
        return Err(Error::DimensionMismatch {
            what: "matrix rows",
            expected: 1,
            found: 0,
        });
    }
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "matrix row length",
                expected: dim,
                found: row.len(),
            });
        }
    }
    Ok(())
}

/// Dense row-major rectangular matrix, used for eigenbases and scaling factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Symmetric part `(A + Aᵀ)/2` of a square matrix.
    pub fn symmetric_part(&self) -> SymMatrix {
        assert_eq!(self.rows, self.cols);
        SymMatrix::from_upper_fn(self.rows, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)))
    }

    /// `B A Bᵀ` for symmetric `A`, symmetrized.
    pub fn sandwich(&self, a: &SymMatrix) -> SymMatrix {
        let ba = self.matmul(&a.to_dense());
        ba.matmul(&self.transpose()).symmetric_part()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Determinant by partial-pivot Gaussian elimination.
    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x * n + k].abs().total_cmp(&a[y * n + k].abs()))
                .unwrap_or(k);
            if a[p * n + k] == 0.0 {
                return 0.0;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        det
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect();
        rows.serialize(serializer)
    }
}

/// Orthogonal eigendecomposition `A = Q·diag(λ)·Qᵀ` with eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Columns are unit eigenvectors.
    pub basis: Matrix,
    pub eigenvalues: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.basis.column(k)
    }

    /// `Q·diag(f(λ))·Qᵀ`.
    pub fn map_eigenvalues(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        SymMatrix::from_upper_fn(n, |i, j| {
            (0..n)
                .map(|k| self.basis.get(i, k) * mapped[k] * self.basis.get(j, k))
                .sum()
        })
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_eigenvalues(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Frobenius inner product `A ⋅ B = Tr(A Bᵀ) = Σᵢⱼ Aᵢⱼ Bᵢⱼ`.
pub fn inner_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            what: "inner product",
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(inner_unchecked(a, b))
}

/// Inner product without the dimension check; panics on mismatch.
pub(crate) fn inner_unchecked(a: &SymMatrix, b: &SymMatrix) -> f64 {
    assert_eq!(a.dim, b.dim);
    let n = a.dim;
    let mut diag = 0.0;
    let mut off = 0.0;
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let p = a.upper[k] * b.upper[k];
            if i == j {
                diag += p;
            } else {
                off += p;
            }
            k += 1;
        }
    }
    diag + 2.0 * off
}

/// Cyclic Jacobi eigendecomposition; eigenvalues descending, ties keep input column order.
pub fn eigendecompose(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::NonFinite("eigendecompose input"));
    }
    let n = a.dim;
    let mut m = a.to_dense();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(EigenDecomposition {
            basis: v,
            eigenvalues: vec![0.0; n],
        });
    }
    let floor = scale * 1e-30;

    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                // Negligible relative to the diagonal pair, or below the absolute floor.
                if apq.abs() <= floor.max(f64::EPSILON * (app.abs() * aqq.abs()).sqrt()) {
                    m.set(p, q, 0.0);
                    m.set(q, p, 0.0);
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::EigenNonConvergence {
            sweeps: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps input column order among ties.
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let eigenvalues = order.iter().map(|&k| m.get(k, k)).collect();
    let basis = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(EigenDecomposition { basis, eigenvalues })
}

/// Numerical ε-rank: number of singular values (|eigenvalues|) strictly above `eps`.
pub fn numerical_rank(a: &SymMatrix, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rank tolerance must be positive, got {eps}"
        )));
    }
    let eig = eigendecompose(a)?;
    Ok(rank_of_spectrum(&eig.eigenvalues, eps))
}

pub(crate) fn rank_of_spectrum(eigenvalues: &[f64], eps: f64) -> usize {
    eigenvalues.iter().filter(|l| l.abs() > eps).count()
}

/// True iff the smallest eigenvalue is at least `-tol`. Non-finite input is never PSD.
pub fn is_psd(a: &SymMatrix, tol: f64) -> bool {
    match eigendecompose(a) {
        Ok(eig) => eig.min_eigenvalue() >= -tol,
        Err(_) => false,
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky(a: &SymMatrix) -> Result<Matrix> {
    let n = a.dim;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// Solves `A x = b` for symmetric positive definite `A` given its Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
