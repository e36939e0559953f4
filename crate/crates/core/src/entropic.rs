//! Balanced entropic OT between Gaussians: the closed-form value `B²_σ`, the
//! optimal plan, dual potentials, the matrix Sinkhorn iteration, gradients,
//! the primal/dual matrix programs and the Sinkhorn divergence.

use crate::error::{Error, Result};
use crate::gaussian_ot::{same_dim, Gaussian};
use crate::linalg::{self, psd_fn, Matrix, PsdMatrix, SymMatrix, Vector};
use crate::math;
use crate::quadform::check_sigma;

/// Gaussian coupling `N((a; b), [[A, C], [Cᵀ, B]])`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropicPlan {
    pub mean: Vector,
    pub cov: SymMatrix,
    pub sigma: f64,
}

impl EntropicPlan {
    /// Assemble the block covariance from its parts. No definiteness check.
    pub fn from_blocks(
        a: &Vector,
        b: &Vector,
        a_cov: &Matrix,
        b_cov: &Matrix,
        c: &Matrix,
        sigma: f64,
    ) -> Result<Self> {
        let d = a.len();
        linalg::check_dim("b", b.len(), d)?;
        for (name, m) in [("A", a_cov), ("B", b_cov), ("C", c)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::invalid(alloc::format!(
                    "block {name} must be {d}x{d}"
                )));
            }
        }
        let mut mean = Vector::zeros(2 * d);
        mean.rows_mut(0, d).copy_from(a);
        mean.rows_mut(d, d).copy_from(b);
        let mut cov = Matrix::zeros(2 * d, 2 * d);
        cov.view_mut((0, 0), (d, d)).copy_from(a_cov);
        cov.view_mut((d, d), (d, d)).copy_from(b_cov);
        cov.view_mut((0, d), (d, d)).copy_from(c);
        cov.view_mut((d, 0), (d, d)).copy_from(&c.transpose());
        Ok(EntropicPlan {
            mean,
            cov: SymMatrix::new(cov)?,
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len() / 2
    }

    /// Cross-covariance block `C_σ`.
    pub fn cross(&self) -> Matrix {
        let d = self.dim();
        self.cov.view((0, d), (d, d)).into_owned()
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix {
        let d = self.dim();
        self.cov.view((i * d, j * d), (d, d)).into_owned()
    }
}

/// Positive definite solution `(F, G)` of the matrix Sinkhorn fixed point
/// `F = σ²A⁻¹ + G⁻¹`, `G = σ²B⁻¹ + F⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornPair {
    pub f: PsdMatrix,
    pub g: PsdMatrix,
}

/// `D_σ = (4A^{1/2}BA^{1/2} + σ⁴I)^{1/2}`.
pub fn d_sigma(a: &PsdMatrix, b: &PsdMatrix, sigma: f64) -> Result<PsdMatrix> {
    check_sigma(sigma)?;
    let s4 = math::powi(sigma, 4);
    let m = cross_product(a, b)?;
    Ok(PsdMatrix::from_matrix_unchecked(psd_fn(&m, |l| {
        math::sqrt(4.0 * l + s4)
    })?))
}

/// `A^{1/2} B A^{1/2}`.
fn cross_product(a: &PsdMatrix, b: &PsdMatrix) -> Result<Matrix> {
    same_dim(a, b)?;
    let ra = linalg::sqrtm_psd(a)?;
    Ok(ra.as_matrix() * b.as_matrix() * ra.as_matrix())
}

/// Covariance part of the entropic cost,
/// `tr A + tr B - tr D_σ + dσ²(1 - log 2σ²) + σ² log det(D_σ + σ²I)`.
///
/// Well defined for singular PSD inputs.
pub fn bures_sigma_sq(a: &PsdMatrix, b: &PsdMatrix, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let d = a.dim() as f64;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let m = cross_product(a, b)?;
    let eig = linalg::sym_eig(&SymMatrix::from_matrix_unchecked(m))?;
    let mut tr_d = 0.0;
    let mut logdet = 0.0;
    for &mu in eig.values.iter() {
        let dk = math::sqrt(4.0 * mu.max(0.0) + s4);
        tr_d += dk;
        logdet += math::ln(dk + s2);
    }
    Ok(a.trace() + b.trace() - tr_d + d * s2 * (1.0 - math::ln(2.0 * s2)) + s2 * logdet)
}

/// `OT_σ(α, β) = ‖a - b‖² + B²_σ(A, B)` for probability measures.
pub fn ot_sigma(alpha: &Gaussian, beta: &Gaussian, sigma: f64) -> Result<f64> {
    alpha.require_unit_mass()?;
    beta.require_unit_mass()?;
    let cov = bures_sigma_sq(alpha.cov(), beta.cov(), sigma)?;
    Ok((alpha.mean() - beta.mean()).norm_squared() + cov)
}

/// Cross-covariance of the optimal plan,
/// `C_σ = A^{1/2}(A^{1/2}BA^{1/2} + σ⁴/4 I)^{1/2}A^{-1/2} - σ²/2 I`,
/// computed with `A + ridge·I` in place of `A`.
pub fn cross_covariance(a: &PsdMatrix, b: &PsdMatrix, sigma: f64, ridge: f64) -> Result<Matrix> {
    check_sigma(sigma)?;
    same_dim(a, b)?;
    let a = if ridge > 0.0 {
        a.with_ridge(ridge)
    } else {
        a.clone()
    };
    let d = a.dim();
    let s2 = sigma * sigma;
    let ra = linalg::sqrtm_psd(&a)?;
    let ria = linalg::invsqrtm_pd(&a, 0.0)?;
    let m = ra.as_matrix() * b.as_matrix() * ra.as_matrix();
    let s = psd_fn(&m, |l| math::sqrt(l + 0.25 * s2 * s2))?;
    Ok(ra.as_matrix() * s * ria.as_matrix() - linalg::scaled_identity(d, 0.5 * s2))
}

/// Optimal entropic plan between two probability measures with `A, B ≻ 0`.
pub fn plan_closed_form(alpha: &Gaussian, beta: &Gaussian, sigma: f64) -> Result<EntropicPlan> {
    plan_closed_form_with_ridge(alpha, beta, sigma, 0.0)
}

/// As [`plan_closed_form`], for `N(a, A + ridge·I)` in place of `α`.
///
/// The top-left block is then `A + ridge·I`; a positive ridge makes the
/// plan well defined for singular `A`.
pub fn plan_closed_form_with_ridge(
    alpha: &Gaussian,
    beta: &Gaussian,
    sigma: f64,
    ridge: f64,
) -> Result<EntropicPlan> {
    alpha.require_unit_mass()?;
    beta.require_unit_mass()?;
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid("ridge must be finite and non-negative"));
    }
    let a = if ridge > 0.0 {
        alpha.cov().with_ridge(ridge)
    } else {
        alpha.cov().clone()
    };
    let c = cross_covariance(&a, beta.cov(), sigma, 0.0)?;
    let plan = EntropicPlan::from_blocks(
        alpha.mean(),
        beta.mean(),
        a.as_matrix(),
        beta.cov().as_matrix(),
        &c,
        sigma,
    )?;
    if !linalg::is_positive_definite(plan.cov.as_matrix()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(plan)
}

/// `(S + σ²/2 I)⁻¹` sandwiched by `Y^{1/2}`, where `S = (Y^{1/2}XY^{1/2} + σ⁴/4 I)^{1/2}`.
fn sandwich(x: &PsdMatrix, y: &PsdMatrix, sigma: f64) -> Result<Matrix> {
    let s2 = sigma * sigma;
    let ry = linalg::sqrtm_psd(y)?;
    let m = ry.as_matrix() * x.as_matrix() * ry.as_matrix();
    let inner = psd_fn(&m, |l| 1.0 / (math::sqrt(l + 0.25 * s2 * s2) + 0.5 * s2))?;
    Ok(linalg::symmetrize(
        &(ry.as_matrix() * inner * ry.as_matrix()),
    ))
}

/// Closed-form dual potentials `f/2σ² = Q(U)`, `g/2σ² = Q(V)` for centered
/// measures. Valid for singular PSD inputs.
pub fn dual_potentials(a: &PsdMatrix, b: &PsdMatrix, sigma: f64) -> Result<(SymMatrix, SymMatrix)> {
    check_sigma(sigma)?;
    same_dim(a, b)?;
    let d = a.dim();
    let s2 = sigma * sigma;
    let eye = Matrix::identity(d, d);
    let u = (sandwich(a, b, sigma)? - &eye) / s2;
    let v = (sandwich(b, a, sigma)? - &eye) / s2;
    Ok((
        SymMatrix::from_matrix_unchecked(u),
        SymMatrix::from_matrix_unchecked(v),
    ))
}

/// Gradient of `B²_σ` in both arguments, `(-σ²U, -σ²V)`, with
/// `∇_A = I - B^{1/2}((B^{1/2}AB^{1/2} + σ⁴/4 I)^{1/2} + σ²/2 I)⁻¹B^{1/2}`.
pub fn grad_bures_sigma(
    a: &PsdMatrix,
    b: &PsdMatrix,
    sigma: f64,
) -> Result<(SymMatrix, SymMatrix)> {
    check_sigma(sigma)?;
    same_dim(a, b)?;
    let eye = Matrix::identity(a.dim(), a.dim());
    Ok((
        SymMatrix::from_matrix_unchecked(&eye - sandwich(a, b, sigma)?),
        SymMatrix::from_matrix_unchecked(&eye - sandwich(b, a, sigma)?),
    ))
}

/// `A^{-1/2}(Z + σ²I)A^{-1/2}` with `Z = (A^{1/2}BA^{1/2} + σ⁴/4 I)^{1/2} - σ²/2 I`.
fn f_block(a: &PsdMatrix, b: &PsdMatrix, s2: f64) -> Result<Matrix> {
    let s4q = 0.25 * s2 * s2;
    let ra = linalg::sqrtm_psd(a)?;
    let ria = linalg::invsqrtm_pd(a, 0.0)?;
    let m = ra.as_matrix() * b.as_matrix() * ra.as_matrix();
    let eig = linalg::sym_eig(&SymMatrix::from_matrix_unchecked(m))?;
    if eig.min().max(0.0) <= 0.0 {
        return Err(Error::SingularMatrix);
    }
    // z = μ / (sqrt(μ + σ⁴/4) + σ²/2) avoids cancellation for small μ.
    let z_shift = eig.map(|mu| mu / (math::sqrt(mu + s4q) + 0.5 * s2) + s2);
    Ok(ria.as_matrix() * z_shift * ria.as_matrix())
}

/// Closed-form solution of the matrix Sinkhorn fixed point:
/// `F = A^{-1/2}(Z + σ²I)A^{-1/2}` with `Z = (A^{1/2}BA^{1/2} + σ⁴/4 I)^{1/2} - σ²/2 I`,
/// and `G` the same expression with `A` and `B` swapped (the fixed-point
/// system is symmetric). This equals `C⁻¹A = A^{1/2}Z⁻¹A^{1/2}`, but that
/// form inverts the smallest eigenvalues of `Z` and loses accuracy when
/// `B` is ill-conditioned.
pub fn closed_form_pair(a: &PsdMatrix, b: &PsdMatrix, sigma: f64) -> Result<SinkhornPair> {
    check_sigma(sigma)?;
    same_dim(a, b)?;
    let s2 = sigma * sigma;
    let f = f_block(a, b, s2)?;
    let g = f_block(b, a, s2)?;
    Ok(SinkhornPair {
        f: PsdMatrix::from_matrix_unchecked(f),
        g: PsdMatrix::from_matrix_unchecked(g),
    })
}

/// Matrix form of Sinkhorn's algorithm between centered Gaussians:
/// `F ← σ²A⁻¹ + G⁻¹`, `G ← σ²B⁻¹ + F⁻¹` from `F₀ = σ²A⁻¹ + I`, `G₀ = σ²B⁻¹ + I`.
///
/// Stops when one sweep changes both `F` and `G` by less than `tol`
/// relative to their Frobenius norms. Watching `G` matters when `F` is
/// dominated by a large `σ²A⁻¹`: errors in `F` reach `G` through `F⁻¹`.
pub fn sinkhorn_matrix_iterate(
    a: &PsdMatrix,
    b: &PsdMatrix,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(SinkhornPair, usize)> {
    check_sigma(sigma)?;
    let d = same_dim(a, b)?;
    let s2 = sigma * sigma;
    let eye = Matrix::identity(d, d);
    let a_term = linalg::spd_inverse(a)? * s2;
    let b_term = linalg::spd_inverse(b)? * s2;
    let mut f = &a_term + &eye;
    let mut g = &b_term + &eye;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let f_next = &a_term + linalg::spd_inverse(&g)?;
        let g_next = &b_term + linalg::spd_inverse(&f_next)?;
        change = ((&f_next - &f).norm() / f_next.norm()).max((&g_next - &g).norm() / g_next.norm());
        f = f_next;
        g = g_next;
        if change < tol {
            return Ok((
                SinkhornPair {
                    f: PsdMatrix::from_matrix_unchecked(f),
                    g: PsdMatrix::from_matrix_unchecked(g),
                },
                it,
            ));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: change,
    })
}

/// Minimizer of `A ↦ B²_σ(A, B)`: `P(Σ - σ²I)₊Pᵀ` for `B = PΣPᵀ`.
pub fn argmin_in_a(b: &PsdMatrix, sigma: f64) -> Result<PsdMatrix> {
    check_sigma(sigma)?;
    linalg::threshold_psd(b, sigma * sigma)
}

/// `OT_σ(α, β) - ½(OT_σ(α, α) + OT_σ(β, β))`.
pub fn sinkhorn_divergence(alpha: &Gaussian, beta: &Gaussian, sigma: f64) -> Result<f64> {
    let ab = ot_sigma(alpha, beta, sigma)?;
    let aa = ot_sigma(alpha, alpha, sigma)?;
    let bb = ot_sigma(beta, beta, sigma)?;
    Ok(ab - 0.5 * (aa + bb))
}

/// Dual matrix program
/// `⟨I - F, A⟩ + ⟨I - G, B⟩ + σ² log det((FG - I)/σ⁴) + σ² log det AB + 2dσ²`.
///
/// Feasible pairs have `F ≻ 0` and `G - F⁻¹ ≻ 0`; otherwise `InfeasibleDual`.
pub fn dual_objective(
    f: &SymMatrix,
    g: &SymMatrix,
    a: &PsdMatrix,
    b: &PsdMatrix,
    sigma: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    let d = same_dim(a, b)?;
    linalg::check_dim("F", f.dim(), d)?;
    linalg::check_dim("G", g.dim(), d)?;
    let s2 = sigma * sigma;
    let eye = Matrix::identity(d, d);
    let f_inv = linalg::spd_inverse(f).map_err(|_| Error::InfeasibleDual)?;
    let logdet_f = linalg::spd_logdet(f).map_err(|_| Error::InfeasibleDual)?;
    let schur = g.as_matrix() - f_inv;
    let logdet_schur = linalg::spd_logdet(&schur).map_err(|_| Error::InfeasibleDual)?;
    let logdet_fg = logdet_f + logdet_schur - 2.0 * d as f64 * math::ln(s2);
    let logdet_ab = linalg::spd_logdet(a)? + linalg::spd_logdet(b)?;
    let lin = ((&eye - f.as_matrix()) * a.as_matrix()).trace()
        + ((&eye - g.as_matrix()) * b.as_matrix()).trace();
    Ok(lin + s2 * logdet_fg + s2 * logdet_ab + 2.0 * d as f64 * s2)
}

/// Primal program over contractions,
/// `tr A + tr B - 2 tr(A^{1/2}KB^{1/2}) - σ² log det(I - KKᵀ)`.
pub fn primal_k_objective(k: &Matrix, a: &PsdMatrix, b: &PsdMatrix, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let d = same_dim(a, b)?;
    if k.nrows() != d || k.ncols() != d {
        return Err(Error::invalid(alloc::format!("K must be {d}x{d}")));
    }
    let norm = k.clone().svd(false, false).singular_values.max();
    if !(norm <= 1.0 - 1e-12) {
        return Err(Error::InfeasiblePrimal { norm });
    }
    let ra = linalg::sqrtm_psd(a)?;
    let rb = linalg::sqrtm_psd(b)?;
    let gram = Matrix::identity(d, d) - k * k.transpose();
    let logdet = linalg::spd_logdet(&gram).map_err(|_| Error::InfeasiblePrimal { norm })?;
    Ok(a.trace() + b.trace()
        - 2.0 * (ra.as_matrix() * k * rb.as_matrix()).trace()
        - sigma * sigma * logdet)
}

/// Transport cost `tr A + tr B - 2 tr C` and `KL(π | α⊗β) = ½(log det A + log det B - log det Σ_π)`
/// of a centered Gaussian plan.
pub fn plan_cost_and_kl(plan: &EntropicPlan) -> Result<(f64, f64)> {
    let a = plan.block(0, 0);
    let b = plan.block(1, 1);
    let c = plan.cross();
    let cost = a.trace() + b.trace() - 2.0 * c.trace();
    let logdet_cov = linalg::spd_logdet(plan.cov.as_matrix())?;
    let kl = 0.5 * (linalg::spd_logdet(&a)? + linalg::spd_logdet(&b)? - logdet_cov);
    Ok((cost, kl))
}
