//! Quadratic potentials `h(x) = -½(xᵀUx - 2uᵀx) + log m` and the closed-form
//! integrals of `exp(h)` against Gaussians that drive the Sinkhorn transforms.

use crate::error::{Error, Result};
use crate::gaussian_ot::Gaussian;
use crate::linalg::{self, Matrix, SymMatrix, Vector};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadPotential {
    /// `U`
    pub quad: SymMatrix,
    /// `u`
    pub lin: Vector,
    pub log_m: f64,
}

impl QuadPotential {
    pub fn new(quad: SymMatrix, lin: Vector, log_m: f64) -> Result<Self> {
        linalg::check_dim("linear coefficient", lin.len(), quad.dim())?;
        Ok(QuadPotential { quad, lin, log_m })
    }

    /// The constant potential `h = 0` on `R^d`.
    pub fn zero(d: usize) -> Self {
        QuadPotential {
            quad: SymMatrix::zeros(d),
            lin: Vector::zeros(d),
            log_m: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn eval(&self, x: &Vector) -> Result<f64> {
        linalg::check_dim("evaluation point", x.len(), self.dim())?;
        Ok(-0.5 * x.dot(&(self.quad.as_matrix() * x)) + self.lin.dot(x) + self.log_m)
    }

    /// `c · h`.
    pub fn scaled(&self, c: f64) -> Self {
        QuadPotential {
            quad: SymMatrix::from_matrix_unchecked(self.quad.as_matrix() * c),
            lin: &self.lin * c,
            log_m: self.log_m * c,
        }
    }

    /// `log ∫ exp(h) dμ` for `μ = m N(a, A)` with `A ≻ 0`.
    ///
    /// Finite iff `U + A⁻¹ ≻ 0`, otherwise `NotIntegrable`.
    pub fn log_integral(&self, measure: &Gaussian) -> Result<f64> {
        linalg::check_dim("measure", measure.dim(), self.dim())?;
        let a = measure.mean();
        let a_inv = linalg::spd_inverse(measure.cov())?;
        let p = &a_inv + self.quad.as_matrix();
        let p_inv = linalg::spd_inverse(&p).map_err(|_| Error::NotIntegrable)?;
        let w = &self.lin + &a_inv * a;
        let logdet = linalg::spd_logdet(measure.cov())? + linalg::spd_logdet(&p)?;
        Ok(
            math::ln(measure.mass()) + self.log_m - 0.5 * logdet + 0.5 * w.dot(&(&p_inv * &w))
                - 0.5 * a.dot(&(&a_inv * a)),
        )
    }
}

/// Completes the square in `-½(x-a)ᵀA(x-a) - ½(x-b)ᵀB(x-b) = -½((x-c)ᵀC(x-c) + q)`.
///
/// Returns `(C, c, q)` with `C = A + B`, `c = C⁻¹(Aa + Bb)`, `q = aᵀAa + bᵀBb - cᵀCc`.
pub fn add_factored(
    a_mat: &SymMatrix,
    a: &Vector,
    b_mat: &SymMatrix,
    b: &Vector,
) -> Result<(SymMatrix, Vector, f64)> {
    let d = a_mat.dim();
    linalg::check_dim("B", b_mat.dim(), d)?;
    linalg::check_dim("a", a.len(), d)?;
    linalg::check_dim("b", b.len(), d)?;
    let c_mat = a_mat.as_matrix() + b_mat.as_matrix();
    let rhs = a_mat.as_matrix() * a + b_mat.as_matrix() * b;
    let c = linalg::solve_general(&c_mat, &Matrix::from_column_slice(d, 1, rhs.as_slice()))?;
    let c = Vector::from_column_slice(c.as_slice());
    let q =
        a.dot(&(a_mat.as_matrix() * a)) + b.dot(&(b_mat.as_matrix() * b)) - c.dot(&(&c_mat * &c));
    Ok((SymMatrix::from_matrix_unchecked(c_mat), c, q))
}

/// `log (N(0, σ²I) ⋆ exp(h))` as a quadratic potential.
///
/// With `G = (σ²U + I)⁻¹`: `U' = GU`, `u' = Gu`,
/// `log m' = log m + σ² uᵀGu / 2 - ½ log det(σ²U + I)`.
pub fn gaussian_convolve_quad(h: &QuadPotential, sigma: f64) -> Result<QuadPotential> {
    check_sigma(sigma)?;
    let d = h.dim();
    let s2 = sigma * sigma;
    let m = h.quad.as_matrix() * s2 + Matrix::identity(d, d);
    let g = linalg::spd_inverse(&m).map_err(|_| Error::NotIntegrable)?;
    let gu = &g * &h.lin;
    Ok(QuadPotential {
        quad: SymMatrix::from_matrix_unchecked(&g * h.quad.as_matrix()),
        log_m: h.log_m + 0.5 * s2 * h.lin.dot(&gu) - 0.5 * linalg::spd_logdet(&m)?,
        lin: gu,
    })
}

/// The τ-Sinkhorn transform `x ↦ -τ log ∫ exp(-‖x-y‖²/2σ² + h(y)) dα(y)`.
///
/// `α = m_α N(a, A)` with `A ≻ 0`. The result is quadratic iff
/// `F = σ²U + σ²A⁻¹ + I ≻ 0`; then `V = (τ/σ²)(F⁻¹ - I)`,
/// `v = -τ F⁻¹(A⁻¹a + u)` and the constant follows from the Gaussian integral.
/// `τ = 1` is the balanced transform.
pub fn sinkhorn_transform(
    h: &QuadPotential,
    measure: &Gaussian,
    sigma: f64,
    tau: f64,
) -> Result<QuadPotential> {
    check_sigma(sigma)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau must lie in (0, 1]"));
    }
    let d = h.dim();
    linalg::check_dim("measure", measure.dim(), d)?;
    let s2 = sigma * sigma;
    let a = measure.mean();
    let a_inv = linalg::spd_inverse(measure.cov())?;
    let f = (h.quad.as_matrix() + &a_inv) * s2 + Matrix::identity(d, d);
    let f_inv = linalg::spd_inverse(&f).map_err(|_| Error::NotIntegrable)?;
    let w = &a_inv * a + &h.lin;
    let f_inv_w = &f_inv * &w;
    let q = s2 * w.dot(&f_inv_w) - a.dot(&(&a_inv * a));
    let log_m = tau
        * (0.5 * linalg::spd_logdet(measure.cov())? + 0.5 * linalg::spd_logdet(&f)?
            - h.log_m
            - math::ln(measure.mass())
            - 0.5 * q
            - d as f64 * math::ln(sigma));
    Ok(QuadPotential {
        quad: SymMatrix::from_matrix_unchecked((f_inv - Matrix::identity(d, d)) * (tau / s2)),
        lin: f_inv_w * (-tau),
        log_m,
    })
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be positive and finite"));
    }
    Ok(())
}
