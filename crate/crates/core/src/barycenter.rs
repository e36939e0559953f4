//! Debiased Sinkhorn barycenter of Gaussian measures.
//!
//! The barycenter of `Σ w_k S_σ(·, α_k)` is `N(Σ w_k a_k, B)` where `B` solves
//! `Σ w_k (B^{1/2}A_kB^{1/2} + σ⁴/4 I)^{1/2} = (B² + σ⁴/4 I)^{1/2}`.
//! `B` is found by damped iteration of
//! `T(B) = ((Σ w_k (B^{1/2}A_kB^{1/2} + σ⁴/4 I)^{1/2})² - σ⁴/4 I)^{1/2}`
//! started from the Euclidean mean `Σ w_k A_k`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian_ot::Gaussian;
use crate::linalg::{self, psd_fn, Matrix, PsdMatrix, Vector};
use crate::math;
use crate::quadform::check_sigma;

#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterProblem {
    components: Vec<(f64, Gaussian)>,
    sigma: f64,
}

impl BarycenterProblem {
    /// Weights must be positive and sum to 1 within 1e-12; measures must be
    /// probability measures of a common dimension.
    pub fn new(components: Vec<(f64, Gaussian)>, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("barycenter needs at least one component"))?;
        let d = first.1.dim();
        let mut total = 0.0;
        for (k, (w, g)) in components.iter().enumerate() {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!(
                    "weight {k} must be positive, got {w}"
                )));
            }
            linalg::check_dim("component", g.dim(), d)?;
            g.require_unit_mass()?;
            total += w;
        }
        if math::abs(total - 1.0) > 1e-12 {
            return Err(Error::invalid(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(BarycenterProblem { components, sigma })
    }

    pub fn components(&self) -> &[(f64, Gaussian)] {
        &self.components
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.components[0].1.dim()
    }

    /// `Σ w_k A_k`.
    pub fn euclidean_mean_cov(&self) -> Matrix {
        let d = self.dim();
        self.components
            .iter()
            .fold(Matrix::zeros(d, d), |acc, (w, g)| {
                acc + g.cov().as_matrix() * *w
            })
    }

    /// `Σ w_k a_k`.
    pub fn mean(&self) -> Vector {
        let d = self.dim();
        self.components
            .iter()
            .fold(Vector::zeros(d), |acc, (w, g)| acc + g.mean() * *w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarycenterOptions {
    /// Absolute Frobenius tolerance on the fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping `η ∈ (0, 1]`; halved (down to 1/8) when the residual
    /// increases twice in a row.
    pub damping: f64,
}

impl BarycenterOptions {
    /// `tol = 1e-10 · tr(Σ w_k A_k)`, 1000 iterations, no damping.
    pub fn for_problem(problem: &BarycenterProblem) -> Self {
        BarycenterOptions {
            tol: 1e-10 * problem.euclidean_mean_cov().trace().max(f64::MIN_POSITIVE),
            max_iter: 1000,
            damping: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterSolution {
    pub barycenter: Gaussian,
    pub residual: f64,
    pub iterations: usize,
}

/// `Σ w_k (B^{1/2}A_kB^{1/2} + σ⁴/4 I)^{1/2}`.
fn weighted_root_sum(b: &PsdMatrix, problem: &BarycenterProblem) -> Result<Matrix> {
    let s = 0.25 * math::powi(problem.sigma, 4);
    let rb = linalg::sqrtm_psd(b)?;
    let d = problem.dim();
    let mut acc = Matrix::zeros(d, d);
    for (w, g) in &problem.components {
        let m = rb.as_matrix() * g.cov().as_matrix() * rb.as_matrix();
        acc += psd_fn(&m, |l| math::sqrt(l + s))? * *w;
    }
    Ok(acc)
}

fn residual_from_sum(b: &PsdMatrix, sum: &Matrix, sigma: f64) -> Result<f64> {
    let s = 0.25 * math::powi(sigma, 4);
    let rhs = psd_fn(&(b.as_matrix() * b.as_matrix()), |l| math::sqrt(l + s))?;
    Ok((sum - rhs).norm())
}

/// Frobenius norm of `Σ w_k (B^{1/2}A_kB^{1/2} + σ⁴/4 I)^{1/2} - (B² + σ⁴/4 I)^{1/2}`.
pub fn barycenter_residual(b: &PsdMatrix, problem: &BarycenterProblem) -> Result<f64> {
    linalg::check_dim("B", b.dim(), problem.dim())?;
    let sum = weighted_root_sum(b, problem)?;
    residual_from_sum(b, &sum, problem.sigma)
}

pub fn debiased_barycenter(
    problem: &BarycenterProblem,
    options: &BarycenterOptions,
) -> Result<BarycenterSolution> {
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::invalid("damping must lie in (0, 1]"));
    }
    let mean = problem.mean();
    if problem.components.len() == 1 {
        return Ok(BarycenterSolution {
            barycenter: Gaussian::new(mean, problem.components[0].1.cov().clone())?,
            residual: 0.0,
            iterations: 0,
        });
    }
    let s = 0.25 * math::powi(problem.sigma, 4);
    let mut b = PsdMatrix::from_matrix_unchecked(problem.euclidean_mean_cov());
    let mut eta = options.damping;
    let mut best = (b.clone(), f64::INFINITY, 0usize);
    let mut prev = f64::INFINITY;
    let mut increases = 0;
    for it in 0..=options.max_iter {
        let sum = weighted_root_sum(&b, problem)?;
        let r = residual_from_sum(&b, &sum, problem.sigma)?;
        if r < best.1 {
            best = (b.clone(), r, it);
        }
        if r <= options.tol {
            return Ok(BarycenterSolution {
                barycenter: Gaussian::new(mean, b)?,
                residual: r,
                iterations: it,
            });
        }
        if it == options.max_iter {
            break;
        }
        increases = if r > prev { increases + 1 } else { 0 };
        if increases >= 2 {
            eta = (eta * 0.5).max(0.125);
            increases = 0;
        }
        prev = r;
        let t = psd_fn(&(&sum * &sum), |l| math::sqrt((l - s).max(0.0)))?;
        b = PsdMatrix::from_matrix_unchecked(b.as_matrix() * (1.0 - eta) + t * eta);
    }
    Err(Error::BarycenterNotConverged(Box::new(
        BarycenterSolution {
            barycenter: Gaussian::new(mean, best.0)?,
            residual: best.1,
            iterations: options.max_iter,
        },
    )))
}
