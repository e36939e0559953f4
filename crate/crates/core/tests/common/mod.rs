#![allow(dead_code)]

use gauss_eot_core::empirical::{sample_wishart, SeededRng};
use gauss_eot_core::{Gaussian, Matrix, PsdMatrix, SymMatrix, Vector};

pub fn rng(seed: u64) -> SeededRng {
    SeededRng::new(seed)
}

/// `W_d(0.2 I, d)`, the covariance law used throughout the experiments.
pub fn wishart(d: usize, rng: &mut SeededRng) -> PsdMatrix {
    sample_wishart(d, 0.2, d, rng).unwrap()
}

/// Wishart draw with extra degrees of freedom and a ridge: comfortably PD.
pub fn random_pd(d: usize, rng: &mut SeededRng) -> PsdMatrix {
    let w = sample_wishart(d, 1.0 / d as f64, d + 2, rng).unwrap();
    w.with_ridge(0.1)
}

pub fn random_sym(d: usize, rng: &mut SeededRng) -> SymMatrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.standard_normal());
    SymMatrix::new(&g + g.transpose()).unwrap()
}

pub fn random_vector(d: usize, rng: &mut SeededRng) -> Vector {
    Vector::from_fn(d, |_, _| rng.standard_normal())
}

/// PSD matrix of rank `d - 1`.
pub fn singular_psd(d: usize, rng: &mut SeededRng) -> PsdMatrix {
    let g = Matrix::from_fn(d, d - 1, |_, _| rng.standard_normal());
    PsdMatrix::from_matrix(&g * g.transpose() / d as f64).unwrap()
}

pub fn gaussian(mean: Vector, cov: PsdMatrix) -> Gaussian {
    Gaussian::new(mean, cov).unwrap()
}

pub fn psd(m: Matrix) -> PsdMatrix {
    PsdMatrix::from_matrix(m).unwrap()
}

pub fn diag(v: &[f64]) -> PsdMatrix {
    PsdMatrix::from_diagonal(v).unwrap()
}

pub fn scalar(x: f64) -> PsdMatrix {
    diag(&[x])
}

pub fn rel_frob(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Central finite-difference gradient of `f` over symmetric matrices, in
/// the trace pairing: off-diagonal perturbations move both `(i, j)` and
/// `(j, i)`, so their difference quotient is halved.
pub fn fd_grad(f: impl Fn(&PsdMatrix) -> f64, at: &PsdMatrix, step: f64) -> Matrix {
    let d = at.dim();
    let mut g = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut e = Matrix::zeros(d, d);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let plus = PsdMatrix::from_matrix(at.as_matrix() + &e * step).unwrap();
            let minus = PsdMatrix::from_matrix(at.as_matrix() - &e * step).unwrap();
            let q = (f(&plus) - f(&minus)) / (2.0 * step);
            let v = if i == j { q } else { 0.5 * q };
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `∫_lo^hi f` by double-exponential quadrature.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    quadrature::integrate(f, lo, hi, 1e-14).integral
}

/// Density of `N(mean, var)` at `x`.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}
