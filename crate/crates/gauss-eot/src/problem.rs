//! JSON problem files.
//!
//! ```json
//! {"alpha": {"mean": [0.0], "cov": [[1.0]], "mass": 1.0},
//!  "beta":  {"mean": [1.0], "cov": [[2.0]]},
//!  "sigma": 0.5, "gamma": 1.0}
//! ```
//!
//! `epsilon = 2σ²` may replace `sigma`; `mass` defaults to 1 and `gamma`
//! is only read by unbalanced commands. Barycenter files list weighted
//! components: `{"components": [{"weight": 0.5, "mean": [...], "cov": [[...]]}, ...]}`.

use std::path::Path;

use gauss_eot_core::{Gaussian, Matrix, PsdMatrix, SymMatrix, Vector};
use serde::Deserialize;

use crate::exit::{CliError, CliResult};

/// Largest accepted `max|C - Cᵀ|`, relative to `max(max|C|, 1)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    #[serde(default = "unit")]
    pub mass: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub alpha: GaussianSpec,
    pub beta: GaussianSpec,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarycenterSpec {
    pub components: Vec<ComponentSpec>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
}

/// A validated two-measure problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub alpha: Gaussian,
    pub beta: Gaussian,
    /// `None` when the file gives neither `sigma` nor `epsilon`.
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
}

impl Problem {
    pub fn sigma(&self) -> CliResult<f64> {
        self.sigma
            .ok_or_else(|| CliError::input("this command needs sigma or epsilon"))
    }

    pub fn gamma(&self) -> CliResult<f64> {
        self.gamma
            .ok_or_else(|| CliError::input("this command needs gamma"))
    }
}

/// Resolve `sigma`/`epsilon` (`ε = 2σ²`); giving both is an error.
pub fn resolve_sigma(sigma: Option<f64>, epsilon: Option<f64>) -> CliResult<Option<f64>> {
    let s = match (sigma, epsilon) {
        (Some(_), Some(_)) => {
            return Err(CliError::input("give either sigma or epsilon, not both"))
        }
        (Some(s), None) => s,
        (None, Some(e)) => {
            if !(e > 0.0) {
                return Err(CliError::input(format!("epsilon must be positive, got {e}")));
            }
            (e / 2.0).sqrt()
        }
        (None, None) => return Ok(None),
    };
    if !(s > 0.0) || !s.is_finite() {
        return Err(CliError::input(format!("sigma must be positive and finite, got {s}")));
    }
    Ok(Some(s))
}

fn covariance(name: &str, rows: &[Vec<f64>], d: usize) -> CliResult<PsdMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::input(format!(
            "{name}.cov must be a {d}x{d} array to match {name}.mean"
        )));
    }
    let m = Matrix::from_fn(d, d, |i, j| rows[i][j]);
    let sym = SymMatrix::new_checked(m, SYMMETRY_TOLERANCE)
        .map_err(|e| CliError::input(format!("{name}.cov: {e}")))?;
    PsdMatrix::new(sym).map_err(|e| CliError::input(format!("{name}.cov: {e}")))
}

fn gaussian(name: &str, mean: &[f64], cov: &[Vec<f64>], mass: f64) -> CliResult<Gaussian> {
    if mean.is_empty() {
        return Err(CliError::input(format!("{name}.mean is empty")));
    }
    if mean.iter().any(|x| !x.is_finite()) {
        return Err(CliError::input(format!("{name}.mean has non-finite entries")));
    }
    let cov = covariance(name, cov, mean.len())?;
    Gaussian::with_mass(Vector::from_column_slice(mean), cov, mass)
        .map_err(|e| CliError::input(format!("{name}: {e}")))
}

impl GaussianSpec {
    pub fn build(&self, name: &str) -> CliResult<Gaussian> {
        gaussian(name, &self.mean, &self.cov, self.mass)
    }
}

impl ProblemSpec {
    pub fn build(&self) -> CliResult<Problem> {
        let alpha = self.alpha.build("alpha")?;
        let beta = self.beta.build("beta")?;
        if alpha.dim() != beta.dim() {
            return Err(CliError::input(format!(
                "alpha has dimension {} but beta has dimension {}",
                alpha.dim(),
                beta.dim()
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(CliError::input(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(Problem {
            alpha,
            beta,
            sigma: resolve_sigma(self.sigma, self.epsilon)?,
            gamma: self.gamma,
        })
    }
}

impl BarycenterSpec {
    /// Components as `(weight, measure)` pairs.
    pub fn build(&self) -> CliResult<Vec<(f64, Gaussian)>> {
        self.components
            .iter()
            .enumerate()
            .map(|(k, c)| Ok((c.weight, gaussian(&format!("components[{k}]"), &c.mean, &c.cov, 1.0)?)))
            .collect()
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_problem(path: &Path) -> CliResult<Problem> {
    let spec: ProblemSpec = serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    spec.build()
}

pub fn load_barycenter(path: &Path) -> CliResult<BarycenterSpec> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
