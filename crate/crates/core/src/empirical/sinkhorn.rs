use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::math;
use crate::quadform::check_sigma;

/// Scaling factors are folded back into the stored kernel once their
/// logarithm exceeds this bound.
const ABSORB_LOG_BOUND: f64 = 30.0;

/// Over-relaxation only pays off for slowly contracting problems.
const RELAX_MIN_RATE: f64 = 0.5;
const RELAX_MAX_PLAIN_RATE: f64 = 0.999_999;
/// Relaxed iterates whose change exceeds this multiple of the best change
/// seen since switching are abandoned.
const RELAX_BLOWUP: f64 = 100.0;

enum Relaxation {
    Observing,
    Active {
        f0: Vec<f64>,
        g0: Vec<f64>,
        best: f64,
    },
    Disabled,
}

/// Per-iteration contraction rate once two consecutive 5-step estimates
/// agree to 1e-3.
fn settled_rate(history: &[f64]) -> Option<f64> {
    const W: usize = 5;
    let k = history.len();
    if k < 2 * W + 2 {
        return None;
    }
    let est = |end: usize| math::pow(history[end] / history[end - W], 1.0 / W as f64);
    let (r1, r0) = (est(k - 1), est(k - 2));
    if !(r1 > 0.0 && r1 < 1.0) || math::abs(r1 - r0) > 1e-3 {
        return None;
    }
    Some(r1)
}

/// Relaxation factor after observing contraction `rate` under `omega`, or
/// `None` to keep the current one.
///
/// For two-block alternating iterations the relaxed rate `λ` and the plain
/// rate `ρ` satisfy `(λ + ω - 1)² = λω²ρ`, so `ρ` can be recovered from the
/// observed `λ` while `ω` is still below the optimum. Early estimates are
/// pre-asymptotic and too small, hence the repeated updates; `ω` only grows.
fn next_omega(omega: f64, rate: f64) -> Option<f64> {
    if rate - (omega - 1.0) <= 0.1 * (2.0 - omega) {
        return None;
    }
    let plain = (rate + omega - 1.0) * (rate + omega - 1.0) / (rate * omega * omega);
    if !(plain > RELAX_MIN_RATE) {
        return None;
    }
    let next = 2.0 / (1.0 + math::sqrt(1.0 - plain.min(RELAX_MAX_PLAIN_RATE)));
    (next > omega * 1.001).then_some(next)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornOptions {
    /// Stop when the max-norm change of `f` over one iteration is below `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// When positive, also stop once the dual value `Σ aᵢfᵢ + Σ bⱼgⱼ` has
    /// moved by at most `value_rtol·|value|` in each of the last
    /// `VALUE_WINDOW` iterations. The value settles long before slowly
    /// mixing potentials do, so this is the practical rule for estimating
    /// values from large samples. Zero disables it.
    pub value_rtol: f64,
}

/// Consecutive quiet iterations required by `SinkhornOptions::value_rtol`.
pub const VALUE_WINDOW: usize = 10;

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            tol: 1e-9,
            max_iter: 10_000,
            value_rtol: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Dual value `Σ aᵢfᵢ + Σ bⱼgⱼ`.
    pub value: f64,
    pub iterations: usize,
    /// L1 distance between the second marginal of the plan and `b`.
    pub marginal_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnbalancedSinkhornSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Dual objective `γΣaᵢ(1 - e^{-fᵢ/γ}) + γΣbⱼ(1 - e^{-gⱼ/γ}) - 2σ²(mass - m_a m_b)`;
    /// equals `γ(m_a + m_b) + 2σ² m_a m_b - 2(σ² + γ)·mass` at the fixed point.
    pub value: f64,
    /// Plan mass `Σᵢⱼ Pᵢⱼ`.
    pub mass: f64,
    pub iterations: usize,
}

fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Dense stabilized kernel `exp((f̄ᵢ + ḡⱼ - Cᵢⱼ)/ε)`, row-major.
struct Kernel {
    data: Vec<f64>,
    f_bar: Vec<f64>,
    g_bar: Vec<f64>,
}

struct Run {
    f: Vec<f64>,
    g: Vec<f64>,
    iterations: usize,
    converged: bool,
    /// Last max-norm change of `f`.
    change: f64,
    kernel: Kernel,
}

struct Solver<'a> {
    x: &'a DiscreteMeasure,
    y: &'a DiscreteMeasure,
    eps: f64,
    tau: f64,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(x: &'a DiscreteMeasure, y: &'a DiscreteMeasure, sigma: f64, tau: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if x.dim() != y.dim() {
            return Err(Error::invalid(format!(
                "point clouds have dimensions {} and {}",
                x.dim(),
                y.dim()
            )));
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::invalid("point clouds must be non-empty"));
        }
        Ok(Solver {
            x,
            y,
            eps: 2.0 * sigma * sigma,
            tau,
            log_a: x.weights().iter().map(|&w| math::ln(w)).collect(),
            log_b: y.weights().iter().map(|&w| math::ln(w)).collect(),
        })
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.x.point(i), self.y.point(j))
    }

    /// `gⱼ = -τε log Σᵢ aᵢ exp((fᵢ - Cᵢⱼ)/ε)` by log-sum-exp.
    fn exact_g(&self, f: &[f64]) -> Vec<f64> {
        let n = self.x.len();
        (0..self.y.len())
            .map(|j| {
                let terms = (0..n).map(|i| self.log_a[i] + (f[i] - self.cost(i, j)) / self.eps);
                -self.tau * self.eps * log_sum_exp(terms)
            })
            .collect()
    }

    /// `fᵢ = -τε log Σⱼ bⱼ exp((gⱼ - Cᵢⱼ)/ε)` by log-sum-exp.
    fn exact_f(&self, g: &[f64]) -> Vec<f64> {
        let m = self.y.len();
        (0..self.x.len())
            .map(|i| {
                let terms = (0..m).map(|j| self.log_b[j] + (g[j] - self.cost(i, j)) / self.eps);
                -self.tau * self.eps * log_sum_exp(terms)
            })
            .collect()
    }

    fn kernel(&self, f: &[f64], g: &[f64]) -> Kernel {
        let (n, m) = (self.x.len(), self.y.len());
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            let xi = self.x.point(i);
            let row = &mut data[i * m..(i + 1) * m];
            for (j, k) in row.iter_mut().enumerate() {
                *k = math::exp((f[i] + g[j] - sq_dist(xi, self.y.point(j))) / self.eps);
            }
        }
        Kernel {
            data,
            f_bar: f.to_vec(),
            g_bar: g.to_vec(),
        }
    }

    /// Kernel for `f = 0` with `ḡⱼ = minᵢ Cᵢⱼ`, so every column peaks at 1 and
    /// the first `g` update cannot underflow.
    fn initial_kernel(&self) -> Kernel {
        let (n, m) = (self.x.len(), self.y.len());
        let mut data = vec![0.0; n * m];
        let mut g_bar = vec![f64::INFINITY; m];
        for i in 0..n {
            let xi = self.x.point(i);
            let row = &mut data[i * m..(i + 1) * m];
            for (j, c) in row.iter_mut().enumerate() {
                *c = sq_dist(xi, self.y.point(j));
                g_bar[j] = g_bar[j].min(*c);
            }
        }
        for row in data.chunks_exact_mut(m) {
            for (c, gb) in row.iter_mut().zip(&g_bar) {
                *c = math::exp((gb - *c) / self.eps);
            }
        }
        Kernel {
            data,
            f_bar: vec![0.0; n],
            g_bar,
        }
    }

    /// `g` from `f` through the stored kernel; `None` if a column underflowed.
    fn g_step(&self, k: &Kernel, f: &[f64], out: &mut [f64]) -> Option<()> {
        let m = self.y.len();
        let mut s = vec![0.0; m];
        for (i, row) in k.data.chunks_exact(m).enumerate() {
            let w = self.x.weights()[i] * math::exp((f[i] - k.f_bar[i]) / self.eps);
            for (sj, kij) in s.iter_mut().zip(row) {
                *sj += w * kij;
            }
        }
        for j in 0..m {
            if !(s[j] > 0.0) || !s[j].is_finite() {
                return None;
            }
            out[j] = self.tau * (k.g_bar[j] - self.eps * math::ln(s[j]));
        }
        Some(())
    }

    /// `f` from `g` through the stored kernel; `None` if a row underflowed.
    fn f_step(&self, k: &Kernel, g: &[f64], out: &mut [f64]) -> Option<()> {
        let m = self.y.len();
        let v: Vec<f64> = (0..m)
            .map(|j| self.y.weights()[j] * math::exp((g[j] - k.g_bar[j]) / self.eps))
            .collect();
        for (i, row) in k.data.chunks_exact(m).enumerate() {
            let t: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            if !(t > 0.0) || !t.is_finite() {
                return None;
            }
            out[i] = self.tau * (k.f_bar[i] - self.eps * math::ln(t));
        }
        Some(())
    }

    fn needs_absorb(&self, k: &Kernel, f: &[f64], g: &[f64]) -> bool {
        let far = |p: &[f64], bar: &[f64]| {
            p.iter()
                .zip(bar)
                .any(|(a, b)| math::abs(a - b) > ABSORB_LOG_BOUND * self.eps)
        };
        far(f, &k.f_bar) || far(g, &k.g_bar)
    }

    /// `g ← (1 - ω)g + ω·T(f)`, falling back to exact log-sum-exp (and a
    /// fresh kernel) when the stabilized sums underflow.
    fn relaxed_g(
        &self,
        kernel: &mut Kernel,
        f: &[f64],
        g: &mut [f64],
        omega: f64,
        scratch: &mut [f64],
    ) {
        if self.g_step(kernel, f, scratch).is_none() {
            scratch.copy_from_slice(&self.exact_g(f));
            *kernel = self.kernel(f, scratch);
        }
        relax_into(g, scratch, omega);
    }

    fn relaxed_f(
        &self,
        kernel: &mut Kernel,
        g: &[f64],
        f: &mut [f64],
        omega: f64,
        scratch: &mut [f64],
    ) {
        if self.f_step(kernel, g, scratch).is_none() {
            scratch.copy_from_slice(&self.exact_f(g));
            *kernel = self.kernel(scratch, g);
        }
        relax_into(f, scratch, omega);
    }

    /// Alternating updates from `f = 0` until the change in `f` is below tol.
    ///
    /// Once the observed contraction rate `ρ` settles, both updates are
    /// over-relaxed, `p ← (1 - ω)p + ω·T(p)` with `ω = 2/(1 + √(1 - ρ))`,
    /// the classical optimum for two-block alternating iterations. A final
    /// plain sweep leaves `(f, g)` an exact Sinkhorn pair.
    fn run(&self, opts: &SinkhornOptions) -> Run {
        let (n, m) = (self.x.len(), self.y.len());
        let mut kernel = self.initial_kernel();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; m];
        let mut f_scratch = vec![0.0; n];
        let mut g_scratch = vec![0.0; m];
        let mut f_prev = vec![0.0; n];
        let mut history: Vec<f64> = Vec::new();
        let mut omega = 1.0;
        let mut relax = Relaxation::Observing;
        let mut change = f64::INFINITY;
        let mut value = f64::NAN;
        let mut quiet = 0;
        for it in 1..=opts.max_iter {
            f_prev.copy_from_slice(&f);
            self.relaxed_g(&mut kernel, &f, &mut g, omega, &mut g_scratch);
            self.relaxed_f(&mut kernel, &g, &mut f, omega, &mut f_scratch);
            change = f
                .iter()
                .zip(&f_prev)
                .fold(0.0f64, |acc, (a, b)| acc.max(math::abs(a - b)));
            if !change.is_finite() || f.iter().chain(&g).any(|v| !v.is_finite()) {
                if let Relaxation::Active { f0, g0, .. } = relax {
                    // Relaxation diverged: resume plain iterations from the switch point.
                    f = f0;
                    g = g0;
                    kernel = self.kernel(&f, &g);
                    omega = 1.0;
                    relax = Relaxation::Disabled;
                    continue;
                }
                return Run {
                    f,
                    g,
                    iterations: it,
                    converged: false,
                    change,
                    kernel,
                };
            }
            if opts.value_rtol > 0.0 {
                let next = dot(self.x.weights(), &f) + dot(self.y.weights(), &g);
                quiet = if math::abs(next - value) <= opts.value_rtol * math::abs(next) {
                    quiet + 1
                } else {
                    0
                };
                value = next;
            }
            if change < opts.tol || quiet >= VALUE_WINDOW {
                if omega != 1.0 {
                    self.relaxed_g(&mut kernel, &f, &mut g, 1.0, &mut g_scratch);
                    self.relaxed_f(&mut kernel, &g, &mut f, 1.0, &mut f_scratch);
                }
                return Run {
                    f,
                    g,
                    iterations: it,
                    converged: true,
                    change,
                    kernel,
                };
            }
            if let Relaxation::Active { f0, g0, best } = &mut relax {
                if change > RELAX_BLOWUP * *best {
                    f = core::mem::take(f0);
                    g = core::mem::take(g0);
                    kernel = self.kernel(&f, &g);
                    omega = 1.0;
                    relax = Relaxation::Disabled;
                    continue;
                }
                *best = best.min(change);
            }
            if !matches!(relax, Relaxation::Disabled) {
                history.push(change);
                if let Some(rate) = settled_rate(&history) {
                    if let Some(next) = next_omega(omega, rate) {
                        omega = next;
                        history.clear();
                        if matches!(relax, Relaxation::Observing) {
                            relax = Relaxation::Active {
                                f0: f.clone(),
                                g0: g.clone(),
                                best: change,
                            };
                        }
                    }
                }
            }
            if self.needs_absorb(&kernel, &f, &g) {
                kernel = self.kernel(&f, &g);
            }
        }
        Run {
            f,
            g,
            iterations: opts.max_iter,
            converged: false,
            change,
            kernel,
        }
    }

    /// Second marginal of the plan defined by `(f, g)`, through the kernel.
    fn column_marginal(&self, k: &Kernel, f: &[f64], g: &[f64]) -> Vec<f64> {
        let m = self.y.len();
        let mut col = vec![0.0; m];
        for (i, row) in k.data.chunks_exact(m).enumerate() {
            let w = self.x.weights()[i] * math::exp((f[i] - k.f_bar[i]) / self.eps);
            for (cj, kij) in col.iter_mut().zip(row) {
                *cj += w * kij;
            }
        }
        for j in 0..m {
            col[j] *= self.y.weights()[j] * math::exp((g[j] - k.g_bar[j]) / self.eps);
        }
        col
    }
}

/// `p ← (1 - ω)p + ω·t`; plain assignment when `ω = 1`.
fn relax_into(p: &mut [f64], t: &[f64], omega: f64) {
    if omega == 1.0 {
        p.copy_from_slice(t);
    } else {
        for (pi, ti) in p.iter_mut().zip(t) {
            *pi = (1.0 - omega) * *pi + omega * ti;
        }
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + math::ln(terms.map(|t| math::exp(t - max)).sum::<f64>())
}

/// Balanced entropic OT between two discrete probability measures,
/// log-domain Sinkhorn with cost `‖x - y‖²` and regularization `ε = 2σ²`.
pub fn sinkhorn_discrete(
    x: &DiscreteMeasure,
    y: &DiscreteMeasure,
    sigma: f64,
    opts: &SinkhornOptions,
) -> Result<SinkhornSolution> {
    for (name, mu) in [("first", x), ("second", y)] {
        let mass = mu.mass();
        if math::abs(mass - 1.0) > 1e-9 {
            return Err(Error::invalid(format!(
                "{name} measure has mass {mass}, expected 1"
            )));
        }
    }
    let solver = Solver::new(x, y, sigma, 1.0)?;
    let Run {
        f,
        g,
        iterations,
        converged,
        kernel,
        ..
    } = solver.run(opts);
    let col = solver.column_marginal(&kernel, &f, &g);
    let marginal_error = col
        .iter()
        .zip(y.weights())
        .map(|(c, b)| math::abs(c - b))
        .sum();
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: marginal_error,
        });
    }
    let value = dot(x.weights(), &f) + dot(y.weights(), &g);
    Ok(SinkhornSolution {
        f,
        g,
        value,
        iterations,
        marginal_error,
    })
}

/// Unbalanced entropic OT with `γ·KL` marginal penalties: Sinkhorn updates
/// damped by `τ = γ/(γ + 2σ²)`.
pub fn sinkhorn_discrete_unbalanced(
    x: &DiscreteMeasure,
    y: &DiscreteMeasure,
    sigma: f64,
    gamma: f64,
    opts: &SinkhornOptions,
) -> Result<UnbalancedSinkhornSolution> {
    check_sigma(sigma)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma must be positive and finite"));
    }
    let s2 = sigma * sigma;
    let (ma, mb) = (x.mass(), y.mass());
    if ma == 0.0 || mb == 0.0 {
        return Ok(UnbalancedSinkhornSolution {
            f: vec![f64::INFINITY; x.len()],
            g: vec![f64::INFINITY; y.len()],
            value: gamma * (ma + mb),
            mass: 0.0,
            iterations: 0,
        });
    }
    let tau = gamma / (gamma + 2.0 * s2);
    let solver = Solver::new(x, y, sigma, tau)?;
    let Run {
        f,
        g,
        iterations,
        converged,
        change,
        kernel,
    } = solver.run(opts);
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: change,
        });
    }
    // The dual objective, not the mass identity that holds only at the exact
    // fixed point: for large γ the constant shift (f + c, g - c) converges at
    // rate τ², and this form is insensitive to it to first order.
    // γ(1 - e^{-f/γ}) is written as -γ expm1(-f/γ) to stay accurate for large γ.
    let side = |mu: &DiscreteMeasure, pot: &[f64]| -> f64 {
        mu.weights()
            .iter()
            .zip(pot)
            .map(|(w, p)| -w * math::expm1(-p / gamma))
            .sum()
    };
    let mass: f64 = solver.column_marginal(&kernel, &f, &g).iter().sum();
    let value = gamma * (side(x, &f) + side(y, &g)) - 2.0 * s2 * (mass - ma * mb);
    Ok(UnbalancedSinkhornSolution {
        f,
        g,
        value,
        mass,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_potentials(x: &DiscreteMeasure, y: &DiscreteMeasure, f: &[f64], g: &[f64]) -> Result<()> {
    if f.len() != x.len() || g.len() != y.len() {
        return Err(Error::invalid("potentials do not match the point clouds"));
    }
    if x.dim() != y.dim() {
        return Err(Error::invalid("point clouds have different dimensions"));
    }
    Ok(())
}

/// Mass, mean and covariance of the discrete plan
/// `Pᵢⱼ = aᵢbⱼ exp((fᵢ + gⱼ - ‖xᵢ - yⱼ‖²)/2σ²)` on `R^{2d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanMoments {
    pub mass: f64,
    pub mean: Vector,
    pub cov: Matrix,
}

pub fn plan_moments(
    f: &[f64],
    g: &[f64],
    x: &DiscreteMeasure,
    y: &DiscreteMeasure,
    sigma: f64,
) -> Result<PlanMoments> {
    check_sigma(sigma)?;
    check_potentials(x, y, f, g)?;
    let d = x.dim();
    let (n, m) = (x.len(), y.len());
    let eps = 2.0 * sigma * sigma;
    let mut col = vec![0.0; m];
    let mut s1 = Vector::zeros(2 * d);
    let mut s2 = Matrix::zeros(2 * d, 2 * d);
    let mut w = vec![0.0; d];
    for i in 0..n {
        let xi = x.point(i);
        let ai = x.weights()[i];
        let mut r = 0.0;
        w.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..m {
            let yj = y.point(j);
            let p = ai * y.weights()[j] * math::exp((f[i] + g[j] - sq_dist(xi, yj)) / eps);
            r += p;
            col[j] += p;
            for k in 0..d {
                w[k] += p * yj[k];
            }
        }
        for k in 0..d {
            s1[k] += r * xi[k];
            for l in 0..d {
                s2[(k, l)] += r * xi[k] * xi[l];
                s2[(k, d + l)] += xi[k] * w[l];
            }
        }
    }
    for j in 0..m {
        let yj = y.point(j);
        for k in 0..d {
            s1[d + k] += col[j] * yj[k];
            for l in 0..d {
                s2[(d + k, d + l)] += col[j] * yj[k] * yj[l];
            }
        }
    }
    for k in 0..d {
        for l in 0..d {
            s2[(d + l, k)] = s2[(k, d + l)];
        }
    }
    let mass: f64 = col.iter().sum();
    let mean = s1 / mass;
    let cov = s2 / mass - &mean * mean.transpose();
    Ok(PlanMoments { mass, mean, cov })
}

/// Plan weights aggregated on a `bins × bins` grid (1-D measures only).
#[derive(Clone, Debug, PartialEq)]
pub struct PlanHistogram {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// Row-major, `weights[ix * bins + iy]`.
    pub weights: Vec<f64>,
    pub bins: usize,
}

impl PlanHistogram {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn edges(points: &[f64], bins: usize) -> Vec<f64> {
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    (0..=bins)
        .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
        .collect()
}

fn bin_of(v: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let k = ((v - lo) / (hi - lo) * bins as f64) as usize;
    k.min(bins - 1)
}

pub fn plan_histogram(
    f: &[f64],
    g: &[f64],
    x: &DiscreteMeasure,
    y: &DiscreteMeasure,
    sigma: f64,
    bins: usize,
) -> Result<PlanHistogram> {
    check_sigma(sigma)?;
    check_potentials(x, y, f, g)?;
    if x.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "plan histograms need 1-D measures, got dimension {}",
            x.dim()
        )));
    }
    if bins == 0 {
        return Err(Error::invalid("bins must be positive"));
    }
    let eps = 2.0 * sigma * sigma;
    let x_edges = edges(x.points(), bins);
    let y_edges = edges(y.points(), bins);
    let mut weights = vec![0.0; bins * bins];
    let ybin: Vec<usize> = y.points().iter().map(|&v| bin_of(v, &y_edges)).collect();
    for (i, &xi) in x.points().iter().enumerate() {
        let row = bin_of(xi, &x_edges) * bins;
        for (j, &yj) in y.points().iter().enumerate() {
            let p = x.weights()[i]
                * y.weights()[j]
                * math::exp((f[i] + g[j] - (xi - yj) * (xi - yj)) / eps);
            weights[row + ybin[j]] += p;
        }
    }
    Ok(PlanHistogram {
        x_edges,
        y_edges,
        weights,
        bins,
    })
}
