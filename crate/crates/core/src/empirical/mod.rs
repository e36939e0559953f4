//! Sample-based oracle: Gaussian and Wishart sampling, discrete Sinkhorn
//! (balanced and unbalanced) and statistics of the resulting plans.

mod rng;
mod sinkhorn;

use alloc::format;
use alloc::vec::Vec;

pub use rng::{trial_seed, SeededRng, RNG_ALGORITHM};
pub use sinkhorn::{
    plan_histogram, plan_moments, sinkhorn_discrete, sinkhorn_discrete_unbalanced, PlanHistogram,
    PlanMoments, SinkhornOptions, SinkhornSolution, UnbalancedSinkhornSolution,
};

use crate::error::{Error, Result};
use crate::gaussian_ot::Gaussian;
use crate::linalg::{self, Matrix, PsdMatrix, Vector};

/// Weighted point cloud; `points` is row-major `n × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * weights.len() {
            return Err(Error::invalid(format!(
                "{} coordinates do not form {} points of dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        Ok(DiscreteMeasure {
            dim,
            points,
            weights,
        })
    }

    /// `n` points sharing `mass` equally.
    pub fn uniform(dim: usize, points: Vec<f64>, mass: f64) -> Result<Self> {
        let n = if dim == 0 { 0 } else { points.len() / dim };
        Self::new(dim, points, alloc::vec![mass / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean and (biased, mass-normalized) covariance.
    pub fn moments(&self) -> (Vector, Matrix) {
        let d = self.dim;
        let m = self.mass();
        let mut mean = Vector::zeros(d);
        for i in 0..self.len() {
            mean += Vector::from_column_slice(self.point(i)) * self.weights[i];
        }
        mean /= m;
        let mut cov = Matrix::zeros(d, d);
        for i in 0..self.len() {
            let x = Vector::from_column_slice(self.point(i)) - &mean;
            cov += &x * x.transpose() * self.weights[i];
        }
        (mean, cov / m)
    }
}

/// `n` i.i.d. draws `mean + L z` with `L = cov^{1/2}`, each carrying weight `mass / n`.
pub fn sample_gaussian(g: &Gaussian, n: usize, rng: &mut SeededRng) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let d = g.dim();
    let l = linalg::sqrtm_psd(g.cov())?;
    let mut points = Vec::with_capacity(n * d);
    let mut z = Vector::zeros(d);
    for _ in 0..n {
        for k in 0..d {
            z[k] = rng.standard_normal();
        }
        let x = g.mean() + l.as_matrix() * &z;
        points.extend_from_slice(x.as_slice());
    }
    DiscreteMeasure::uniform(d, points, g.mass())
}

/// `scale · G Gᵀ` with `G` a `d × dof` matrix of standard normals.
pub fn sample_wishart(d: usize, scale: f64, dof: usize, rng: &mut SeededRng) -> Result<PsdMatrix> {
    if dof < d {
        return Err(Error::invalid(format!(
            "Wishart degrees of freedom {dof} must be at least the dimension {d}"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid("Wishart scale must be positive"));
    }
    let mut g = Matrix::zeros(d, dof);
    for i in 0..d {
        for j in 0..dof {
            g[(i, j)] = rng.standard_normal();
        }
    }
    Ok(PsdMatrix::from_matrix_unchecked(&g * g.transpose() * scale))
}

/// Vector with i.i.d. entries uniform on `[lo, hi)`.
pub fn sample_uniform_vector(d: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.uniform(lo, hi)))
}
