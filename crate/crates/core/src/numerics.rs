//! Dense complex linear algebra used by the relay formulas.
//!
//! Everything here is sized for desk-scale networks (a few hundred relays at
//! most), so matrices are stored as flat row-major `Vec<Complex64>` and all
//! kernels are straightforward `O(n^3)` loops.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{dim_mismatch, Error, Result};

/// Relative asymmetry below which a matrix is treated as Hermitian and
/// symmetrized as `(M + M^H) / 2`.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Cholesky pivots at or below this fraction of the largest diagonal entry are
/// treated as zero.
const PIVOT_RTOL: f64 = 1e-14;

const POWER_ITER_CAP: usize = 10_000;
const POWER_RAYLEIGH_RTOL: f64 = 1e-12;
const POWER_RESIDUAL_RTOL: f64 = 1e-11;

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

/// A dense complex column vector with at least one entry.
#[derive(Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    /// Wraps `entries`. Panics when `entries` is empty.
    pub fn new(entries: Vec<Complex64>) -> Self {
        assert!(!entries.is_empty(), "ComplexVector must have dim >= 1");
        Self(entries)
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn ones(dim: usize) -> Self {
        Self::new(vec![Complex64::new(1.0, 0.0); dim])
    }

    /// Unit vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = Complex64::new(1.0, 0.0);
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self(self.0.iter().map(|&z| f(z)).collect())
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(dim_mismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// Inner product `self^H other` (conjugate-linear in `self`).
    pub fn dot(&self, other: &Self) -> Result<Complex64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum())
    }

    /// Bilinear sum `sum_i self_i * other_i` without conjugation.
    pub fn dot_t(&self, other: &Self) -> Result<Complex64> {
        self.check_dim(other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.norm_sqr() == 0.0)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Rotates by a global phase so the first entry of largest modulus is real
    /// and nonnegative. The zero vector is returned unchanged.
    pub fn canonical_phase(&self) -> Self {
        let mut best = 0usize;
        let mut best_mod = -1.0;
        for (i, z) in self.0.iter().enumerate() {
            let m = z.norm();
            if m > best_mod {
                best = i;
                best_mod = m;
            }
        }
        if best_mod <= 0.0 {
            return self.clone();
        }
        let pivot = self.0[best];
        let rot = pivot.conj() / pivot.norm();
        let mut out = self.scale_complex(rot);
        // Clean the pivot so it is exactly real.
        out.0[best] = Complex64::new(best_mod, 0.0);
        out
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(v: Vec<Complex64>) -> Self {
        Self::new(v)
    }
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(dim_mismatch(rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0);
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(dim_mismatch(c, bad.len()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn from_diag(d: &ComplexVector) -> Self {
        let mut m = Self::zeros(d.dim(), d.dim());
        for (i, &z) in d.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        Self::from_diag(&ComplexVector::from_real(d))
    }

    /// Outer product `u v^H`.
    pub fn outer(u: &ComplexVector, v: &ComplexVector) -> Self {
        let mut m = Self::zeros(u.dim(), v.dim());
        for i in 0..u.dim() {
            for j in 0..v.dim() {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(dim_mismatch(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(dim_mismatch(
                format!("{0}x{0}", self.rows),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(dim_mismatch(self.cols, other.rows));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if self.cols != v.dim() {
            return Err(dim_mismatch(self.cols, v.dim()));
        }
        Ok(ComplexVector::new(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    /// Quadratic form `v^H M v`.
    pub fn quad_form(&self, v: &ComplexVector) -> Result<Complex64> {
        let mv = self.mul_vec(v)?;
        v.dot(&mv)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn diagonal(&self) -> ComplexVector {
        ComplexVector::new((0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect())
    }

    /// Real parts of the diagonal.
    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).collect()
    }

    /// `M ⊙ I`: keeps the diagonal, zeros everything else.
    pub fn diag_part(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows.min(self.cols) {
            out[(i, i)] = self[(i, i)];
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `max |M_ij - conj(M_ji)|`.
    pub fn max_asymmetry(&self) -> Result<f64> {
        self.require_square()?;
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        Ok(worst)
    }

    /// Inspects Hermitian symmetry (absolute tolerance `tol`) and positive
    /// definiteness.
    pub fn hermitian_report(&self, tol: f64) -> Result<HermitianCheckReport> {
        let max_asymmetry = self.max_asymmetry()?;
        let is_hermitian = max_asymmetry <= tol;
        let is_positive_definite = is_hermitian && cholesky(self).is_ok();
        Ok(HermitianCheckReport {
            is_hermitian,
            max_asymmetry,
            is_positive_definite,
        })
    }

    /// Symmetrizes `(M + M^H)/2` when the asymmetry is within
    /// [`HERMITIAN_TOL`] relative to `||M||_F`, otherwise errors.
    pub fn hermitian_part(&self) -> Result<Self> {
        let asym = self.max_asymmetry()?;
        let scale = self.frobenius_norm();
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { max_asymmetry: asym });
        }
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            out[(i, i)] = Complex64::new(self[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let z = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Result of [`ComplexMatrix::hermitian_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianCheckReport {
    pub is_hermitian: bool,
    pub max_asymmetry: f64,
    pub is_positive_definite: bool,
}

// ---------------------------------------------------------------------------
// Hadamard product
// ---------------------------------------------------------------------------

/// Elementwise product of equally shaped operands.
pub trait Hadamard: Sized {
    fn hadamard(&self, other: &Self) -> Result<Self>;
}

impl Hadamard for ComplexVector {
    fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect()))
    }
}

impl Hadamard for ComplexMatrix {
    fn hadamard(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }
}

pub fn hadamard<T: Hadamard>(a: &T, b: &T) -> Result<T> {
    a.hadamard(b)
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

/// Lower-triangular factor `L` of a Hermitian positive definite `M = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    pub fn factor(m: &ComplexMatrix) -> Result<Self> {
        m.require_square()?;
        let m = m.hermitian_part()?;
        let n = m.rows();
        let max_diag = m.real_diagonal().into_iter().fold(0.0, f64::max);
        let floor = PIVOT_RTOL * max_diag;
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut pivot = m[(j, j)].re;
            for k in 0..j {
                pivot -= l[(j, k)].norm_sqr();
            }
            if !pivot.is_finite() || pivot <= floor {
                return Err(Error::NotPositiveDefinite { index: j, pivot });
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &ComplexMatrix {
        &self.l
    }

    pub fn into_l(self) -> ComplexMatrix {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &ComplexVector) -> Result<ComplexVector> {
        let n = self.dim();
        if b.dim() != n {
            return Err(dim_mismatch(n, b.dim()));
        }
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        Ok(y)
    }

    /// Solves `L^H x = y`.
    pub fn solve_lower_adjoint(&self, y: &ComplexVector) -> Result<ComplexVector> {
        let n = self.dim();
        if y.dim() != n {
            return Err(dim_mismatch(n, y.dim()));
        }
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)].conj() * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        Ok(x)
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &ComplexVector) -> Result<ComplexVector> {
        self.solve_lower_adjoint(&self.solve_lower(b)?)
    }

    /// `b^H M^{-1} b = ||L^{-1} b||^2`, real and nonnegative.
    pub fn inverse_quad_form(&self, b: &ComplexVector) -> Result<f64> {
        Ok(self.solve_lower(b)?.norm_sqr())
    }

    /// `Tr(M^{-1}) = ||L^{-1}||_F^2`.
    pub fn inverse_trace(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|j| {
                self.solve_lower(&ComplexVector::basis(n, j))
                    .expect("basis vector has matching dim")
                    .norm_sqr()
            })
            .sum()
    }
}

/// Lower-triangular `L` with `L L^H = M`.
pub fn cholesky(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Cholesky::factor(m).map(Cholesky::into_l)
}

/// Solves `M x = b` for Hermitian positive definite `M`.
pub fn solve_hermitian(m: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    if m.rows() != b.dim() {
        return Err(dim_mismatch(m.rows(), b.dim()));
    }
    Cholesky::factor(m)?.solve(b)
}

// ---------------------------------------------------------------------------
// Principal eigenpair
// ---------------------------------------------------------------------------

/// Largest eigenvalue and its unit eigenvector (canonical phase) of a
/// Hermitian positive semi-definite matrix, by power iteration.
pub fn principal_eigenpair(m: &ComplexMatrix) -> Result<(f64, ComplexVector)> {
    let m = m.hermitian_part()?;
    let n = m.rows();

    // A fixed generic start vector; it has a nonzero component along any
    // eigenvector for all but a measure-zero set of matrices.
    let mut x = ComplexVector::new(
        (0..n)
            .map(|j| Complex64::from_polar(1.0 + j as f64 / n as f64, 0.7 * j as f64 + 0.3))
            .collect(),
    );
    x = x.scale(1.0 / x.norm());

    let mut prev = f64::NAN;
    for _ in 0..POWER_ITER_CAP {
        let y = m.mul_vec(&x)?;
        let ynorm = y.norm();
        if ynorm == 0.0 {
            // x lies in the null space; for PSD input that means M = 0 along
            // every direction we can reach, so 0 is the top eigenvalue.
            if m.frobenius_norm() == 0.0 {
                return Ok((0.0, x.canonical_phase()));
            }
            // Perturb towards the largest column and retry.
            x = largest_column(&m);
            continue;
        }
        let lambda = x.dot(&y)?.re;
        let residual = y.sub(&x.scale_complex(Complex64::new(lambda, 0.0)))?.norm();
        let settled = (lambda - prev).abs() <= POWER_RAYLEIGH_RTOL * lambda.abs();
        if settled && residual <= POWER_RESIDUAL_RTOL * lambda.abs() {
            return Ok((lambda, x.canonical_phase()));
        }
        prev = lambda;
        x = y.scale(1.0 / ynorm);
    }
    Err(Error::NoConvergence {
        iterations: POWER_ITER_CAP,
    })
}

fn largest_column(m: &ComplexMatrix) -> ComplexVector {
    let n = m.rows();
    let col = (0..n)
        .max_by(|&a, &b| {
            let na: f64 = (0..n).map(|i| m[(i, a)].norm_sqr()).sum();
            let nb: f64 = (0..n).map(|i| m[(i, b)].norm_sqr()).sum();
            na.total_cmp(&nb)
        })
        .unwrap_or(0);
    let v = ComplexVector::new((0..n).map(|i| m[(i, col)]).collect());
    let nv = v.norm();
    v.scale(1.0 / nv)
}
