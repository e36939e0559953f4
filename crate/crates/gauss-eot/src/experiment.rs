//! Sample-size convergence experiments: empirical Sinkhorn estimates
//! against the closed forms, one row per `(d, n, trial)`.
//!
//! For each dimension one pair `α = m_α N(a, A)`, `β = m_β N(b, B)` is drawn
//! (means uniform in `[-1, 1]^d`, covariances `W_d(0.2 I, d)`) from the seed
//! `trial_seed(base, d, 0, 0)`; each trial then draws `n` points from each
//! measure with the seed `trial_seed(base, d, n, trial)`.

use std::io::Write;

use gauss_eot_core::empirical::{
    plan_moments, sample_gaussian, sample_uniform_vector, sample_wishart, sinkhorn_discrete,
    sinkhorn_discrete_unbalanced, trial_seed, SeededRng, SinkhornOptions,
};
use gauss_eot_core::entropic::ot_sigma;
use gauss_eot_core::unbalanced::{unbalanced_plan, uot, UnbalancedParams};
use gauss_eot_core::{Error, Gaussian};
use rayon::prelude::*;
use serde::Serialize;

use crate::exit::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GAUSS_EOT_THREADS";

pub const CSV_HEADER: &str = "d,n,trial,sigma,gamma,mass_alpha,mass_beta,empirical,closed_form,seed";
pub const PLAN_CSV_HEADER: &str =
    "d,n,trial,sigma,gamma,mass_alpha,mass_beta,mass_rel_err,mean_rel_err,cov_rel_err,seed";

/// Sinkhorn settings used by the experiments: `tol = 1e-9`, `max_iter = 10⁴`,
/// and the value-based stop at `1e-8` relative.
pub fn experiment_sinkhorn() -> SinkhornOptions {
    SinkhornOptions {
        tol: 1e-9,
        max_iter: 10_000,
        value_rtol: 1e-8,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub sigma: f64,
    /// `None` runs balanced OT and needs unit masses.
    pub gamma: Option<f64>,
    pub mass_alpha: f64,
    pub mass_beta: f64,
    pub base_seed: u64,
    pub sinkhorn: SinkhornOptions,
}

impl ExperimentConfig {
    fn check(&self) -> CliResult<()> {
        if self.dims.is_empty() || self.ns.is_empty() || self.trials == 0 {
            return Err(CliError::input("dims, ns and trials must be non-empty"));
        }
        if self.dims.contains(&0) || self.ns.contains(&0) {
            return Err(CliError::input("dimensions and sample sizes must be positive"));
        }
        Ok(())
    }

    fn jobs(&self) -> Vec<(usize, usize, usize)> {
        let mut dims = self.dims.clone();
        let mut ns = self.ns.clone();
        dims.sort_unstable();
        dims.dedup();
        ns.sort_unstable();
        ns.dedup();
        let mut jobs = Vec::new();
        for &d in &dims {
            for &n in &ns {
                for t in 0..self.trials {
                    jobs.push((d, n, t));
                }
            }
        }
        jobs
    }
}

/// Serialized with the column names of [`CSV_HEADER`]; `gamma` is empty for
/// balanced runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub sigma: f64,
    pub gamma: Option<f64>,
    pub mass_alpha: f64,
    pub mass_beta: f64,
    pub empirical: f64,
    pub closed_form: f64,
    pub seed: u64,
}

impl ExperimentRow {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.closed_form).abs() / self.closed_form.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanRow {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub sigma: f64,
    pub gamma: Option<f64>,
    pub mass_alpha: f64,
    pub mass_beta: f64,
    pub mass_rel_err: f64,
    /// `‖μ_n - μ‖_∞ / ‖μ‖_∞`
    pub mean_rel_err: f64,
    /// `max|Σ_n - H| / max|H|`
    pub cov_rel_err: f64,
    pub seed: u64,
}

/// The Gaussian pair shared by every trial in dimension `d`.
pub fn cell_problem(config: &ExperimentConfig, d: usize) -> CliResult<(Gaussian, Gaussian)> {
    let mut rng = SeededRng::new(trial_seed(config.base_seed, d, 0, 0));
    let a = sample_uniform_vector(d, -1.0, 1.0, &mut rng);
    let b = sample_uniform_vector(d, -1.0, 1.0, &mut rng);
    let a_cov = sample_wishart(d, 0.2, d, &mut rng)?;
    let b_cov = sample_wishart(d, 0.2, d, &mut rng)?;
    Ok((
        Gaussian::with_mass(a, a_cov, config.mass_alpha)?,
        Gaussian::with_mass(b, b_cov, config.mass_beta)?,
    ))
}

/// Worker count: available parallelism, capped by `GAUSS_EOT_THREADS`.
pub fn thread_count() -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(cap) if cap > 0 => available.min(cap),
        _ => available,
    }
}

/// Runs `job` over `(d, n, trial)` in parallel; results come back in job order.
fn run_jobs<T: Send>(
    config: &ExperimentConfig,
    job: impl Fn(&Gaussian, &Gaussian, usize, usize, usize) -> CliResult<T> + Sync,
) -> CliResult<Vec<T>> {
    config.check()?;
    let mut problems = Vec::new();
    for &d in config.dims.iter() {
        if !problems.iter().any(|(k, _)| *k == d) {
            problems.push((d, cell_problem(config, d)?));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| CliError::input(format!("cannot start worker threads: {e}")))?;
    let jobs = config.jobs();
    pool.install(|| {
        jobs.par_iter()
            .map(|&(d, n, t)| {
                let (alpha, beta) = &problems.iter().find(|(k, _)| *k == d).unwrap().1;
                job(alpha, beta, d, n, t).map_err(|e| match e {
                    CliError::Input(m) => CliError::Input(format!("d={d} n={n} trial={t}: {m}")),
                    CliError::Numerical(m) => {
                        CliError::Numerical(format!("d={d} n={n} trial={t}: {m}"))
                    }
                    CliError::NotConverged(m) => {
                        CliError::NotConverged(format!("d={d} n={n} trial={t}: {m}"))
                    }
                })
            })
            .collect()
    })
}

/// Empirical `OT_σ` (or `UOT_σ` when `gamma` is set) against the closed form.
pub fn convergence_experiment(config: &ExperimentConfig) -> CliResult<Vec<ExperimentRow>> {
    let sigma = config.sigma;
    let closed = |alpha: &Gaussian, beta: &Gaussian| -> Result<f64, Error> {
        match config.gamma {
            Some(g) => uot(alpha, beta, &UnbalancedParams::new(sigma, g)?),
            None => ot_sigma(alpha, beta, sigma),
        }
    };
    run_jobs(config, |alpha, beta, d, n, trial| {
        let closed_form = closed(alpha, beta)?;
        let seed = trial_seed(config.base_seed, d, n, trial);
        let mut rng = SeededRng::new(seed);
        let x = sample_gaussian(alpha, n, &mut rng)?;
        let y = sample_gaussian(beta, n, &mut rng)?;
        let empirical = match config.gamma {
            Some(g) => sinkhorn_discrete_unbalanced(&x, &y, sigma, g, &config.sinkhorn)?.value,
            None => sinkhorn_discrete(&x, &y, sigma, &config.sinkhorn)?.value,
        };
        Ok(ExperimentRow {
            d,
            n,
            trial,
            sigma,
            gamma: config.gamma,
            mass_alpha: config.mass_alpha,
            mass_beta: config.mass_beta,
            empirical,
            closed_form,
            seed,
        })
    })
}

/// Mass, mean and covariance of the empirical unbalanced plan against the
/// closed-form `m_π N(μ, H)`, as relative errors.
pub fn plan_experiment(config: &ExperimentConfig) -> CliResult<Vec<PlanRow>> {
    let gamma = config
        .gamma
        .ok_or_else(|| CliError::input("the plan experiment needs gamma"))?;
    let sigma = config.sigma;
    let params = UnbalancedParams::new(sigma, gamma)?;
    run_jobs(config, |alpha, beta, d, n, trial| {
        let plan = unbalanced_plan(alpha, beta, &params)?;
        let seed = trial_seed(config.base_seed, d, n, trial);
        let mut rng = SeededRng::new(seed);
        let x = sample_gaussian(alpha, n, &mut rng)?;
        let y = sample_gaussian(beta, n, &mut rng)?;
        let sol = sinkhorn_discrete_unbalanced(&x, &y, sigma, gamma, &config.sinkhorn)?;
        let m = plan_moments(&sol.f, &sol.g, &x, &y, sigma)?;
        Ok(PlanRow {
            d,
            n,
            trial,
            sigma,
            gamma: Some(gamma),
            mass_alpha: config.mass_alpha,
            mass_beta: config.mass_beta,
            mass_rel_err: (m.mass - plan.mass).abs() / plan.mass,
            mean_rel_err: (&m.mean - &plan.mean).amax() / plan.mean.amax(),
            cov_rel_err: (&m.cov - plan.cov.as_matrix()).amax() / plan.cov.as_matrix().amax(),
            seed,
        })
    })
}

/// CSV with a header row; column order follows the struct fields.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Median of a non-empty sample.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}
