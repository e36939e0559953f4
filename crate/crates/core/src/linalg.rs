//! Dense symmetric linear algebra: eigendecomposition-based matrix functions,
//! coupled Newton–Schulz iterations, PSD validation and thresholding.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::math;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance under which negative eigenvalues are treated as round-off.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A real symmetric matrix. Construction symmetrizes the input as `(M + Mᵀ)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Square, finite input; the stored matrix is its symmetric part.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Like [`SymMatrix::new`] but rejects inputs whose asymmetry
    /// `max|M - Mᵀ|` exceeds `tol · max(max|M|, 1)`.
    pub fn new_checked(m: Matrix, tol: f64) -> Result<Self> {
        if m.is_square() {
            let asym = max_abs(&(&m - m.transpose()));
            if asym > tol * max_abs(&m).max(1.0) {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric (max |M - Mᵀ| = {asym:e})"
                )));
            }
        }
        Self::new(m)
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::invalid(format!(
                "expected {} entries for a {d}x{d} matrix, got {}",
                d * d,
                entries.len()
            )));
        }
        Self::new(Matrix::from_row_slice(d, d, entries))
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(Matrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(Matrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        SymMatrix(symmetrize(&m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl Deref for SymMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// A symmetric positive semi-definite matrix.
///
/// Eigenvalues down to `-PSD_TOLERANCE · max(spectral radius, 1)` are accepted
/// and clamped to zero; anything more negative is rejected with `NotPsd`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix(SymMatrix);

impl PsdMatrix {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let eig = sym_eig(&m)?;
        let radius = eig.values.iter().fold(0.0f64, |r, &l| r.max(math::abs(l)));
        let floor = -PSD_TOLERANCE * radius.max(1.0);
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < floor {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        if min < 0.0 {
            return Ok(PsdMatrix(SymMatrix(eig.map(|l| l.max(0.0)))));
        }
        Ok(PsdMatrix(m))
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        Self::new(SymMatrix::new(m)?)
    }

    pub fn from_row_slice(d: usize, entries: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_row_slice(d, entries)?)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SymMatrix::from_diagonal(diag)?)
    }

    pub fn identity(d: usize) -> Self {
        PsdMatrix(SymMatrix::identity(d))
    }

    pub fn zeros(d: usize) -> Self {
        PsdMatrix(SymMatrix::zeros(d))
    }

    /// Caller guarantees positive semi-definiteness (e.g. `GGᵀ`, `V diag(λ≥0) Vᵀ`).
    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        PsdMatrix(SymMatrix::from_matrix_unchecked(m))
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    /// `M + r·I` for `r ≥ 0`.
    pub fn with_ridge(&self, r: f64) -> PsdMatrix {
        let mut m = self.0 .0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += r;
        }
        PsdMatrix(SymMatrix(m))
    }
}

impl Deref for PsdMatrix {
    type Target = SymMatrix;
    fn deref(&self) -> &SymMatrix {
        &self.0
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (columns of `vectors`). Each eigenvector is signed so that its
/// largest-magnitude component is positive.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vector,
    pub vectors: Matrix,
}

impl SymEig {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..d {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn max(&self) -> f64 {
        self.values.get(0).copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().last().copied().unwrap_or(0.0)
    }
}

pub fn sym_eig(m: &SymMatrix) -> Result<SymEig> {
    let d = m.dim();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if d == 0 {
        return Ok(SymEig {
            values: Vector::zeros(0),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let raw = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalInconsistency("eigendecomposition failed".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| raw.eigenvalues[j].total_cmp(&raw.eigenvalues[i]));
    let mut values = Vector::zeros(d);
    let mut vectors = Matrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        values[k] = raw.eigenvalues[i];
        let col = raw.eigenvectors.column(i);
        let mut pivot = 0;
        for r in 1..d {
            if math::abs(col[r]) > math::abs(col[pivot]) {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(k).copy_from(&(col * sign));
    }
    Ok(SymEig { values, vectors })
}

pub fn sqrtm_psd(m: &PsdMatrix) -> Result<PsdMatrix> {
    let eig = sym_eig(m)?;
    Ok(PsdMatrix::from_matrix_unchecked(
        eig.map(|l| math::sqrt(l.max(0.0))),
    ))
}

/// `(M + ridge·I)^{-1/2}`.
pub fn invsqrtm_pd(m: &PsdMatrix, ridge: f64) -> Result<SymMatrix> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid("ridge must be finite and non-negative"));
    }
    let eig = sym_eig(m)?;
    check_invertible(&eig, ridge)?;
    Ok(SymMatrix(eig.map(|l| 1.0 / math::sqrt(l.max(0.0) + ridge))))
}

/// `(M + ridge·I)^{-1}` through the eigendecomposition.
pub fn inv_pd(m: &PsdMatrix, ridge: f64) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    check_invertible(&eig, ridge)?;
    Ok(SymMatrix(eig.map(|l| 1.0 / (l.max(0.0) + ridge))))
}

fn check_invertible(eig: &SymEig, ridge: f64) -> Result<()> {
    let d = eig.values.len() as f64;
    let min = eig.min().max(0.0) + ridge;
    let rank_floor = if ridge > 0.0 {
        0.0
    } else {
        d * f64::EPSILON * eig.max()
    };
    if min <= rank_floor {
        return Err(Error::SingularMatrix);
    }
    Ok(())
}

pub fn logdet_pd(m: &PsdMatrix) -> Result<f64> {
    let eig = sym_eig(m)?;
    if eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(eig.values.iter().map(|&l| math::ln(l)).sum())
}

/// Eigenvalues mapped `λ ↦ max(λ - t, 0)`, eigenvectors kept.
pub fn threshold_psd(m: &SymMatrix, t: f64) -> Result<PsdMatrix> {
    let eig = sym_eig(m)?;
    Ok(PsdMatrix::from_matrix_unchecked(
        eig.map(|l| (l - t).max(0.0)),
    ))
}

/// `(a - b)ᵀ C (a - b)`.
pub fn mahalanobis_sq(a: &Vector, b: &Vector, c: &PsdMatrix) -> Result<f64> {
    let d = c.dim();
    if a.len() != d || b.len() != d {
        return Err(Error::invalid(format!(
            "dimension mismatch: vectors of length {} and {} with a {d}x{d} matrix",
            a.len(),
            b.len()
        )));
    }
    let diff = a - b;
    Ok((diff.dot(&(c.as_matrix() * &diff))).max(0.0))
}

/// Output of [`newton_schulz_monge`].
#[derive(Clone, Debug)]
pub struct NewtonSchulz {
    pub t_ab: SymMatrix,
    pub t_ba: SymMatrix,
    pub iterations: usize,
    /// `‖I - Z_k Y_k‖_F` after each iteration.
    pub residuals: Vec<f64>,
}

/// Coupled Newton–Schulz iterations for the Monge maps `T^{AB}` and `T^{BA}`.
///
/// Inputs are scaled by `(1 + eps)` times their largest eigenvalue so the
/// spectrum of `ZY` lies in `(0, 1)`. Stops when successive `Y` iterates
/// differ by less than `tol` in entrywise 1-norm. Fails with `NotConverged`
/// if `‖I - ZY‖_F` grows three iterations in a row or `max_iter` is reached.
pub fn newton_schulz_monge(
    a: &PsdMatrix,
    b: &PsdMatrix,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonSchulz> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::invalid("A and B must have the same dimension"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let ea = sym_eig(a)?;
    let eb = sym_eig(b)?;
    if ea.min() <= 0.0 || eb.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let (na, nb) = (ea.max(), eb.max());
    let eye = Matrix::identity(d, d);
    let mut y = b.as_matrix() / ((1.0 + eps) * nb);
    let mut z = a.as_matrix() / ((1.0 + eps) * na);
    let mut residuals = Vec::new();
    let mut growth = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let t = (&eye * 3.0 - &z * &y) * 0.5;
        let y_next = &y * &t;
        z = &t * &z;
        let step: f64 = (&y_next - &y).iter().map(|x| math::abs(*x)).sum();
        y = y_next;
        iterations += 1;
        let r = (&eye - &z * &y).norm();
        if let Some(&prev) = residuals.last() {
            growth = if r > prev { growth + 1 } else { 0 };
        }
        residuals.push(r);
        if !r.is_finite() || growth >= 3 {
            return Err(Error::NotConverged {
                iterations,
                residual: r,
            });
        }
        if step < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: residuals.last().copied().unwrap_or(f64::NAN),
        });
    }
    let ratio = math::sqrt(nb / na);
    Ok(NewtonSchulz {
        t_ab: SymMatrix::from_matrix_unchecked(y * ratio),
        t_ba: SymMatrix::from_matrix_unchecked(z / ratio),
        iterations,
        residuals,
    })
}

/// Inverse of a symmetric positive definite matrix by Cholesky factorization.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let chol = Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite)?;
    Ok(symmetrize(&chol.inverse()))
}

/// `log det M` for symmetric positive definite `M` via Cholesky.
pub fn spd_logdet(m: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite)?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|&x| math::ln(x))
            .sum::<f64>())
}

/// True when the symmetric part of `m` admits a Cholesky factorization.
pub fn is_positive_definite(m: &Matrix) -> bool {
    Cholesky::new(symmetrize(m)).is_some()
}

/// Solve `M x = rhs` for a general square `M` by LU with partial pivoting.
pub fn solve_general(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    m.clone().lu().solve(rhs).ok_or(Error::SingularMatrix)
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(math::abs(*x)))
}

pub(crate) fn scaled_identity(d: usize, c: f64) -> Matrix {
    Matrix::identity(d, d) * c
}

pub(crate) fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(format!(
            "{what}: expected dimension {want}, got {got}"
        )));
    }
    Ok(())
}

/// `f` applied to the spectrum of a matrix known to be PSD up to round-off;
/// slightly negative eigenvalues are clamped to zero first.
pub(crate) fn psd_fn(m: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let eig = sym_eig(&SymMatrix::from_matrix_unchecked(m.clone()))?;
    Ok(eig.map(|l| f(l.max(0.0))))
}
