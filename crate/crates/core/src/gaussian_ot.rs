//! Unregularized Gaussian optimal transport: Bures metric, Wasserstein-Bures
//! distance, Monge map and the Bures gradient.

use alloc::format;

use crate::error::{Error, Result};
use crate::linalg::{self, psd_fn, Matrix, PsdMatrix, SymMatrix, Vector};
use crate::math;

/// The measure `mass · N(mean, cov)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    mean: Vector,
    cov: PsdMatrix,
    mass: f64,
}

impl Gaussian {
    /// Probability measure `N(mean, cov)`.
    pub fn new(mean: Vector, cov: PsdMatrix) -> Result<Self> {
        Self::with_mass(mean, cov, 1.0)
    }

    pub fn with_mass(mean: Vector, cov: PsdMatrix, mass: f64) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::invalid(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.dim(),
                cov.dim()
            )));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("mean has non-finite entries"));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("mass must be positive, got {mass}")));
        }
        Ok(Gaussian { mean, cov, mass })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        Gaussian {
            mean: Vector::zeros(d),
            cov: PsdMatrix::identity(d),
            mass: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &PsdMatrix {
        &self.cov
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Same measure with its mean shifted by `t`.
    pub fn translated(&self, t: &Vector) -> Result<Self> {
        linalg::check_dim("translation", t.len(), self.dim())?;
        Ok(Gaussian {
            mean: &self.mean + t,
            cov: self.cov.clone(),
            mass: self.mass,
        })
    }

    pub(crate) fn require_unit_mass(&self) -> Result<()> {
        if math::abs(self.mass - 1.0) > 1e-12 {
            return Err(Error::invalid(format!(
                "expected a probability measure, got mass {} (use the unbalanced module)",
                self.mass
            )));
        }
        Ok(())
    }
}

pub(crate) fn same_dim(a: &PsdMatrix, b: &PsdMatrix) -> Result<usize> {
    linalg::check_dim("second covariance", b.dim(), a.dim())?;
    Ok(a.dim())
}

/// `tr A + tr B - 2 tr (A^{1/2} B A^{1/2})^{1/2}`. Accepts singular inputs.
pub fn bures(a: &PsdMatrix, b: &PsdMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let ra = linalg::sqrtm_psd(a)?;
    let m = ra.as_matrix() * b.as_matrix() * ra.as_matrix();
    let cross = psd_fn(&m, math::sqrt)?.trace();
    Ok((a.trace() + b.trace() - 2.0 * cross).max(0.0))
}

/// Squared 2-Wasserstein distance `‖a - b‖² + Bures(A, B)` between probability measures.
pub fn w2_gaussian(alpha: &Gaussian, beta: &Gaussian) -> Result<f64> {
    alpha.require_unit_mass()?;
    beta.require_unit_mass()?;
    let bures = bures(alpha.cov(), beta.cov())?;
    Ok((alpha.mean() - beta.mean()).norm_squared() + bures)
}

/// Linear part of the Monge map `T = A^{-1/2}(A^{1/2} B A^{1/2})^{1/2} A^{-1/2}`.
pub fn monge_map(a: &PsdMatrix, b: &PsdMatrix) -> Result<SymMatrix> {
    same_dim(a, b)?;
    let ra = linalg::sqrtm_psd(a)?;
    let ria = linalg::invsqrtm_pd(a, 0.0)?;
    let m = ra.as_matrix() * b.as_matrix() * ra.as_matrix();
    let s = psd_fn(&m, math::sqrt)?;
    Ok(SymMatrix::from_matrix_unchecked(
        ria.as_matrix() * s * ria.as_matrix(),
    ))
}

/// Gradient of `A ↦ Bures(A, B)`: `I - T^{AB}`.
pub fn bures_grad(a: &PsdMatrix, b: &PsdMatrix) -> Result<SymMatrix> {
    let t = monge_map(a, b)?;
    let d = a.dim();
    Ok(SymMatrix::from_matrix_unchecked(
        Matrix::identity(d, d) - t.as_matrix(),
    ))
}
