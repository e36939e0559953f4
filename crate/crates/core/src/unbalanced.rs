//! Unbalanced entropic OT between scaled Gaussians `m_α N(a, A)` and
//! `m_β N(b, B)` with `γ·KL` marginal penalties: the optimal plan (mass, mean,
//! covariance), the UOT value, and the quadratic dual potentials.

use alloc::format;
use core::ops::AddAssign;

use crate::error::{Error, Result};
use crate::gaussian_ot::{same_dim, Gaussian};
use crate::linalg::{self, Matrix, PsdMatrix, SymEig, SymMatrix, Vector};
use crate::math;
use crate::quadform::{check_sigma, QuadPotential};

/// `σ`, `γ` and the derived `τ = γ/(2σ² + γ)`, `λ = σ² + γ/2 = σ²/(1 - τ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnbalancedParams {
    pub sigma: f64,
    pub gamma: f64,
    pub tau: f64,
    pub lambda: f64,
}

impl UnbalancedParams {
    pub fn new(sigma: f64, gamma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma must be positive and finite"));
        }
        let s2 = sigma * sigma;
        Ok(UnbalancedParams {
            sigma,
            gamma,
            tau: gamma / (2.0 * s2 + gamma),
            lambda: s2 + 0.5 * gamma,
        })
    }

    fn s2(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// `m_π N(μ, H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnbalancedPlan {
    pub mass: f64,
    pub log_mass: f64,
    pub mean: Vector,
    pub cov: SymMatrix,
}

/// Dual potentials `f/2σ² = Q(u, U) + log m_u` and `g/2σ² = Q(v, V) + log m_v`
/// in the notation of [`QuadPotential`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnbalancedDuals {
    pub u_quad: SymMatrix,
    pub v_quad: SymMatrix,
    pub u: Vector,
    pub v: Vector,
    pub log_mu: f64,
    pub log_mv: f64,
}

impl UnbalancedDuals {
    pub fn log_mu_mv(&self) -> f64 {
        self.log_mu + self.log_mv
    }

    /// `f / 2σ²`.
    pub fn f_potential(&self) -> QuadPotential {
        QuadPotential {
            quad: self.u_quad.clone(),
            lin: self.u.clone(),
            log_m: self.log_mu,
        }
    }

    /// `g / 2σ²`.
    pub fn g_potential(&self) -> QuadPotential {
        QuadPotential {
            quad: self.v_quad.clone(),
            lin: self.v.clone(),
            log_m: self.log_mv,
        }
    }
}

/// `Ã = γ/2 (I - λ(A + λI)⁻¹)`, i.e. eigenvalues `a ↦ (γ/2)·a/(a + λ)`.
pub fn tilde_transform(a: &PsdMatrix, params: &UnbalancedParams) -> Result<PsdMatrix> {
    let eig = linalg::sym_eig(a)?;
    Ok(tilde_from_eig(&eig, params))
}

fn tilde_from_eig(eig: &SymEig, params: &UnbalancedParams) -> PsdMatrix {
    let (g2, lam) = (0.5 * params.gamma, params.lambda);
    PsdMatrix::from_matrix_unchecked(eig.map(|l| {
        let l = l.max(0.0);
        g2 * l / (l + lam)
    }))
}

/// Spectral data of `R = Ã^{1/2}B̃Ã^{1/2}/τ`, shared by the plan and dual formulas.
struct Reduced {
    ra: Matrix,
    ria: Matrix,
    eig: SymEig,
    s4q: f64,
}

impl Reduced {
    fn new(a_t: &PsdMatrix, b_t: &PsdMatrix, params: &UnbalancedParams) -> Result<Self> {
        let ra = linalg::sqrtm_psd(a_t)?.into_sym().into_matrix();
        let ria = linalg::invsqrtm_pd(a_t, 0.0)?.into_matrix();
        let r = &ra * b_t.as_matrix() * &ra / params.tau;
        let eig = linalg::sym_eig(&SymMatrix::from_matrix_unchecked(r))?;
        let s2 = params.s2();
        Ok(Reduced {
            ra,
            ria,
            eig,
            s4q: 0.25 * s2 * s2,
        })
    }

    /// Eigenvalue of `C` (similar to `(R + σ⁴/4)^{1/2} - σ²/2`) for eigenvalue `r` of `R`.
    fn z(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        r / (math::sqrt(r + self.s4q) + math::sqrt(self.s4q))
    }

    /// `C = Ã^{1/2} Z Ã^{-1/2}`.
    fn c(&self) -> Matrix {
        &self.ra * self.eig.map(|r| self.z(r)) * &self.ria
    }
}

/// `C = (ÃB̃/τ + σ⁴/4 I)^{1/2} - σ²/2 I`, evaluated through a similarity with a
/// symmetric matrix. `C` is not symmetric in general.
pub fn unbalanced_c(a_t: &PsdMatrix, b_t: &PsdMatrix, params: &UnbalancedParams) -> Result<Matrix> {
    let d = same_dim(a_t, b_t)?;
    if a_t.iter().all(|x| *x == 0.0) || b_t.iter().all(|x| *x == 0.0) {
        return Ok(Matrix::zeros(d, d));
    }
    match Reduced::new(a_t, b_t, params) {
        Ok(red) => Ok(red.c()),
        Err(Error::SingularMatrix) => {
            // (ÃB̃)ᵀ = B̃Ã, so C(Ã, B̃) = C(B̃, Ã)ᵀ.
            let red = Reduced::new(b_t, a_t, params)?;
            Ok(red.c().transpose())
        }
        Err(e) => Err(e),
    }
}

struct Setup {
    d: usize,
    a_inv: Matrix,
    b_inv: Matrix,
    logdet_a: f64,
    logdet_b: f64,
    a_t: PsdMatrix,
    b_t: PsdMatrix,
    logdet_a_t: f64,
    logdet_b_t: f64,
    red: Reduced,
}

impl Setup {
    fn new(alpha: &Gaussian, beta: &Gaussian, params: &UnbalancedParams) -> Result<Self> {
        let d = same_dim(alpha.cov(), beta.cov())?;
        let ea = linalg::sym_eig(alpha.cov())?;
        let eb = linalg::sym_eig(beta.cov())?;
        if ea.min() <= 0.0 || eb.min() <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let a_inv = ea.map(|l| 1.0 / l);
        let b_inv = eb.map(|l| 1.0 / l);
        let logdet = |e: &SymEig| e.values.iter().map(|&l| math::ln(l)).sum::<f64>();
        let logdet_tilde = |e: &SymEig| {
            e.values
                .iter()
                .map(|&l| math::ln(0.5 * params.gamma * l / (l + params.lambda)))
                .sum::<f64>()
        };
        let a_t = tilde_from_eig(&ea, params);
        let b_t = tilde_from_eig(&eb, params);
        let red = Reduced::new(&a_t, &b_t, params)?;
        Ok(Setup {
            d,
            a_inv,
            b_inv,
            logdet_a: logdet(&ea),
            logdet_b: logdet(&eb),
            logdet_a_t: logdet_tilde(&ea),
            logdet_b_t: logdet_tilde(&eb),
            a_t,
            b_t,
            red,
        })
    }
}

/// Optimal unbalanced plan `m_π N(μ, H)` between `α = m_α N(a, A)` and
/// `β = m_β N(b, B)` with `A, B ≻ 0`.
pub fn unbalanced_plan(
    alpha: &Gaussian,
    beta: &Gaussian,
    params: &UnbalancedParams,
) -> Result<UnbalancedPlan> {
    let st = Setup::new(alpha, beta, params)?;
    let d = st.d;
    let (a_cov, b_cov) = (alpha.cov().as_matrix(), beta.cov().as_matrix());
    let (a, b) = (alpha.mean(), beta.mean());
    let lam = params.lambda;
    let tau = params.tau;
    let eye = Matrix::identity(d, d);

    let x = a_cov + b_cov + &eye * lam;
    let x_inv = linalg::spd_inverse(&x)?;
    let diff = b - a;
    let x_inv_diff = &x_inv * &diff;

    let mut mean = Vector::zeros(2 * d);
    mean.rows_mut(0, d).copy_from(&(a + a_cov * &x_inv_diff));
    mean.rows_mut(d, d).copy_from(&(b - b_cov * &x_inv_diff));

    let c = st.red.c();
    let ct = c.transpose();
    let left = &eye + &c / lam;
    let right = &eye + &ct / lam;
    let h11 = &left * (a_cov - a_cov * &x_inv * a_cov);
    let h12 = &c + &left * a_cov * &x_inv * b_cov;
    let h21 = &ct + &right * b_cov * &x_inv * a_cov;
    let h22 = &right * (b_cov - b_cov * &x_inv * b_cov);
    let mut h = Matrix::zeros(2 * d, 2 * d);
    h.view_mut((0, 0), (d, d)).copy_from(&h11);
    h.view_mut((0, d), (d, d)).copy_from(&h12);
    h.view_mut((d, 0), (d, d)).copy_from(&h21);
    h.view_mut((d, d), (d, d)).copy_from(&h22);
    let asym = linalg::max_abs(&(&h - h.transpose()));
    if asym > 1e-9 * linalg::max_abs(&h).max(1.0) {
        return Err(Error::NumericalInconsistency(format!(
            "plan covariance is not symmetric (max |H - Hᵀ| = {asym:e})"
        )));
    }
    let cov = SymMatrix::from_matrix_unchecked(linalg::symmetrize(&h));
    if !linalg::is_positive_definite(&cov) {
        return Err(Error::NumericalInconsistency(
            "plan covariance is not positive definite".into(),
        ));
    }

    // det C and det(C - (2/γ)ÃB̃) through the eigenvalues z of C:
    // C - (2/γ)ÃB̃ is similar to z(γ/2 - z)/λ.
    let mut logdet_c = 0.0;
    let mut logdet_k = 0.0;
    for &r in st.red.eig.values.iter() {
        let z = st.red.z(r);
        let k = z * (0.5 * params.gamma - z) / lam;
        if !(z > 0.0) || !(k > 0.0) {
            return Err(Error::NumericalInconsistency(format!(
                "det(C - (2/γ)ÃB̃) is not positive (eigenvalue {k:e})"
            )));
        }
        logdet_c += math::ln(z);
        logdet_k += math::ln(k);
    }
    let s2 = params.s2();
    let inner = math::ln(alpha.mass())
        + math::ln(beta.mass())
        + logdet_c
        + 0.5 * (tau * (st.logdet_a_t + st.logdet_b_t) - st.logdet_a - st.logdet_b);
    let log_mass = d as f64 * s2 / (params.gamma + s2) * math::ln(params.sigma)
        + inner / (tau + 1.0)
        - diff.dot(&x_inv_diff) / (2.0 * (tau + 1.0))
        - 0.5 * logdet_k;
    Ok(UnbalancedPlan {
        mass: math::exp(log_mass),
        log_mass,
        mean,
        cov,
    })
}

/// `γ(m_α + m_β) + 2σ² m_α m_β - 2(σ² + γ) m_π`.
pub fn uot(alpha: &Gaussian, beta: &Gaussian, params: &UnbalancedParams) -> Result<f64> {
    let plan = unbalanced_plan(alpha, beta, params)?;
    Ok(uot_from_mass(alpha.mass(), beta.mass(), plan.mass, params))
}

pub fn uot_from_mass(m_alpha: f64, m_beta: f64, m_plan: f64, params: &UnbalancedParams) -> f64 {
    let s2 = params.s2();
    params.gamma * (m_alpha + m_beta) + 2.0 * s2 * m_alpha * m_beta
        - 2.0 * (s2 + params.gamma) * m_plan
}

/// Matrices `(F, G)` of the optimality conditions, with `G = C⁻¹Ã` and
/// `F = τG⁻¹ + σ²A⁻¹ + (1-τ)I`.
fn dual_matrices(st: &Setup, params: &UnbalancedParams) -> (Matrix, Matrix) {
    let d = st.d;
    let red = &st.red;
    let g = &red.ra * red.eig.map(|r| 1.0 / red.z(r)) * &red.ra;
    let g_inv = &red.ria * red.eig.map(|r| red.z(r)) * &red.ria;
    let f =
        g_inv * params.tau + &st.a_inv * params.s2() + Matrix::identity(d, d) * (1.0 - params.tau);
    (linalg::symmetrize(&f), linalg::symmetrize(&g))
}

/// Closed-form quadratic dual potentials of the unbalanced problem.
pub fn unbalanced_duals(
    alpha: &Gaussian,
    beta: &Gaussian,
    params: &UnbalancedParams,
) -> Result<UnbalancedDuals> {
    let st = Setup::new(alpha, beta, params)?;
    let d = st.d;
    let (tau, s2) = (params.tau, params.s2());
    let eye = Matrix::identity(d, d);
    let (f, g) = dual_matrices(&st, params);
    let (a, b) = (alpha.mean(), beta.mean());
    let a_inv_a = &st.a_inv * a;
    let b_inv_b = &st.b_inv * b;

    let inconsistent = |_| Error::NumericalInconsistency("(GF - τ²I) is singular".into());
    let v = linalg::solve_general(
        &(&g * &f - &eye * (tau * tau)),
        &column(&(&g * &a_inv_a * (-tau) + &b_inv_b * (tau * tau))),
    )
    .map_err(inconsistent)?;
    let u = linalg::solve_general(
        &(&f * &g - &eye * (tau * tau)),
        &column(&(&f * &b_inv_b * (-tau) + &a_inv_a * (tau * tau))),
    )
    .map_err(inconsistent)?;
    let u = Vector::from_column_slice(u.as_slice());
    let v = Vector::from_column_slice(v.as_slice());

    let u_quad = (&f - &eye - &st.a_inv * s2) / s2;
    let v_quad = (&g - &eye - &st.b_inv * s2) / s2;

    // Constants: log m_v = -τ(log m_u + K_α), log m_u = -τ(log m_v + K_β).
    let k_side =
        |mass: f64, mean: &Vector, inv: &Matrix, lin: &Vector, mat: &Matrix, logdet: f64| {
            let w = inv * mean + lin;
            let mat_inv = linalg::spd_inverse(mat)?;
            let q = s2 * w.dot(&(&mat_inv * &w)) - mean.dot(&(inv * mean));
            Ok::<f64, Error>(
                math::ln(mass) + 0.5 * q + d as f64 * math::ln(params.sigma)
                    - 0.5 * logdet
                    - 0.5 * linalg::spd_logdet(mat)?,
            )
        };
    let k_alpha = k_side(alpha.mass(), a, &st.a_inv, &u, &f, st.logdet_a)?;
    let k_beta = k_side(beta.mass(), b, &st.b_inv, &v, &g, st.logdet_b)?;
    let denom = 1.0 - tau * tau;
    let log_mu = (tau * tau * k_alpha - tau * k_beta) / denom;
    let log_mv = (tau * tau * k_beta - tau * k_alpha) / denom;

    Ok(UnbalancedDuals {
        u_quad: SymMatrix::from_matrix_unchecked(u_quad),
        v_quad: SymMatrix::from_matrix_unchecked(v_quad),
        u,
        v,
        log_mu,
        log_mv,
    })
}

fn column(v: &Vector) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// The plan `exp((f(x) + g(y) - ‖x-y‖²)/2σ²) dα(x) dβ(y)` for quadratic duals,
/// integrated in closed form.
pub fn plan_from_duals(
    alpha: &Gaussian,
    beta: &Gaussian,
    params: &UnbalancedParams,
    duals: &UnbalancedDuals,
) -> Result<UnbalancedPlan> {
    let d = same_dim(alpha.cov(), beta.cov())?;
    let s2 = params.s2();
    let joint = joint_potential(duals, s2)?;
    let a_inv = linalg::spd_inverse(alpha.cov())?;
    let b_inv = linalg::spd_inverse(beta.cov())?;
    // Add the Gaussian log-densities of α and β to the joint potential.
    let mut gamma = joint.quad.as_matrix().clone();
    gamma.view_mut((0, 0), (d, d)).add_assign(&a_inv);
    gamma.view_mut((d, d), (d, d)).add_assign(&b_inv);
    let mut eta = joint.lin.clone();
    eta.rows_mut(0, d).add_assign(&(&a_inv * alpha.mean()));
    eta.rows_mut(d, d).add_assign(&(&b_inv * beta.mean()));
    let two_pi_ln = math::ln(2.0 * core::f64::consts::PI);
    let log_const = joint.log_m + math::ln(alpha.mass()) + math::ln(beta.mass())
        - 0.5 * (linalg::spd_logdet(alpha.cov())? + linalg::spd_logdet(beta.cov())?)
        - d as f64 * two_pi_ln
        - 0.5 * alpha.mean().dot(&(&a_inv * alpha.mean()))
        - 0.5 * beta.mean().dot(&(&b_inv * beta.mean()));
    let h = linalg::spd_inverse(&gamma).map_err(|_| Error::NotIntegrable)?;
    let mean = &h * &eta;
    let log_mass =
        log_const + 0.5 * eta.dot(&mean) + d as f64 * two_pi_ln - 0.5 * linalg::spd_logdet(&gamma)?;
    Ok(UnbalancedPlan {
        mass: math::exp(log_mass),
        log_mass,
        mean,
        cov: SymMatrix::from_matrix_unchecked(h),
    })
}

/// `(f(x) + g(y) - ‖x - y‖²)/2σ²` as a quadratic potential on `R^{2d}`.
fn joint_potential(duals: &UnbalancedDuals, s2: f64) -> Result<QuadPotential> {
    let d = duals.u.len();
    let mut quad = Matrix::zeros(2 * d, 2 * d);
    let eye = Matrix::identity(d, d) / s2;
    quad.view_mut((0, 0), (d, d))
        .copy_from(&(duals.u_quad.as_matrix() + &eye));
    quad.view_mut((d, d), (d, d))
        .copy_from(&(duals.v_quad.as_matrix() + &eye));
    quad.view_mut((0, d), (d, d)).copy_from(&(-&eye));
    quad.view_mut((d, 0), (d, d)).copy_from(&(-&eye));
    let mut lin = Vector::zeros(2 * d);
    lin.rows_mut(0, d).copy_from(&duals.u);
    lin.rows_mut(d, d).copy_from(&duals.v);
    QuadPotential::new(SymMatrix::new(quad)?, lin, duals.log_mu_mv())
}

/// The dual objective
/// `γ∫(1 - e^{-f/γ})dα + γ∫(1 - e^{-g/γ})dβ - 2σ²∫(e^{(f+g-‖x-y‖²)/2σ²} - 1)dα⊗β`
/// evaluated in closed form for quadratic potentials.
pub fn dual_objective(
    alpha: &Gaussian,
    beta: &Gaussian,
    params: &UnbalancedParams,
    duals: &UnbalancedDuals,
) -> Result<f64> {
    let (ma, mb) = (alpha.mass(), beta.mass());
    let (s2, gamma) = (params.s2(), params.gamma);
    let scale = -2.0 * s2 / gamma;
    let ia = math::exp(duals.f_potential().scaled(scale).log_integral(alpha)?);
    let ib = math::exp(duals.g_potential().scaled(scale).log_integral(beta)?);
    let product = Gaussian::with_mass(
        stack(alpha.mean(), beta.mean()),
        PsdMatrix::from_matrix_unchecked(block_diag(alpha.cov(), beta.cov())),
        ma * mb,
    )?;
    let plan = math::exp(joint_potential(duals, s2)?.log_integral(&product)?);
    Ok(gamma * (ma - ia) + gamma * (mb - ib) - 2.0 * s2 * (plan - ma * mb))
}

fn stack(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = Matrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// Accessors for quantities used in consistency checks.
pub mod internals {
    use super::*;

    /// `(F, G)` from the closed forms.
    pub fn dual_matrices(
        alpha: &Gaussian,
        beta: &Gaussian,
        params: &UnbalancedParams,
    ) -> Result<(Matrix, Matrix)> {
        let st = Setup::new(alpha, beta, params)?;
        Ok(super::dual_matrices(&st, params))
    }

    /// `(Ã, B̃, C)`.
    pub fn reduced_problem(
        alpha: &Gaussian,
        beta: &Gaussian,
        params: &UnbalancedParams,
    ) -> Result<(PsdMatrix, PsdMatrix, Matrix)> {
        let st = Setup::new(alpha, beta, params)?;
        let c = st.red.c();
        Ok((st.a_t, st.b_t, c))
    }
}
