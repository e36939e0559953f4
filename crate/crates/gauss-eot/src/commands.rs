//! Command-line surface. Every command prints one JSON object on stdout;
//! failures go to stderr with the exit status of [`CliError`].

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gauss_eot_core::barycenter::{debiased_barycenter, BarycenterOptions, BarycenterProblem};
use gauss_eot_core::empirical::{
    plan_histogram, sample_gaussian, sinkhorn_discrete, sinkhorn_discrete_unbalanced, SeededRng,
    RNG_ALGORITHM,
};
use gauss_eot_core::entropic::{
    bures_sigma_sq, dual_potentials, grad_bures_sigma, ot_sigma, plan_closed_form_with_ridge,
    sinkhorn_divergence,
};
use gauss_eot_core::gaussian_ot::{bures, w2_gaussian};
use gauss_eot_core::unbalanced::{unbalanced_plan, uot, UnbalancedParams};
use serde_json::{json, Value};

use crate::exit::{CliError, CliResult};
use crate::experiment::{
    convergence_experiment, experiment_sinkhorn, plan_experiment, write_csv, ExperimentConfig,
    THREADS_ENV,
};
use crate::json::{matrix, num, vector};
use crate::problem::{load_barycenter, load_problem, resolve_sigma, Problem};

/// Experiment default: `ε = 2σ² = 0.5`.
pub const DEFAULT_EPSILON: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(name = "gauss-eot", version, about = "Entropic optimal transport between Gaussian measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// `--sigma` / `--epsilon` (`ε = 2σ²`), overriding the problem file.
#[derive(Debug, Args, Clone, Copy, Default)]
pub struct Regularization {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

impl Regularization {
    fn resolve(&self) -> CliResult<Option<f64>> {
        resolve_sigma(self.sigma, self.epsilon)
    }

    fn apply(&self, problem: &mut Problem) -> CliResult<()> {
        if let Some(s) = self.resolve()? {
            problem.sigma = Some(s);
        }
        Ok(())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Squared 2-Wasserstein distance and Bures term.
    Bures { problem: PathBuf },
    /// Balanced entropic OT closed forms.
    Entropic {
        problem: PathBuf,
        #[command(flatten)]
        reg: Regularization,
        /// Include the optimal coupling.
        #[arg(long)]
        plan: bool,
        /// Include the quadratic dual potentials `U`, `V`.
        #[arg(long)]
        duals: bool,
        /// Include the gradient of `B²_σ` in both covariances.
        #[arg(long)]
        gradient: bool,
        /// Add `ridge·I` to the first covariance before forming the plan.
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
    /// Unbalanced entropic OT: value and optimal plan.
    Uot {
        problem: PathBuf,
        #[command(flatten)]
        reg: Regularization,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Debiased barycenter of weighted Gaussian components.
    Barycenter {
        components: PathBuf,
        #[command(flatten)]
        reg: Regularization,
        /// Absolute residual tolerance; defaults to `1e-10·tr(Σ w_k A_k)`.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1.0)]
        damping: f64,
    },
    /// Sample-size convergence of the empirical value (CSV).
    Validate(ValidateArgs),
    /// Sample-size convergence of the empirical unbalanced plan moments (CSV).
    ValidatePlan(ValidateArgs),
    /// Histogram of the discrete plan between samples of a 1-D problem.
    PlanHist {
        problem: PathBuf,
        #[command(flatten)]
        reg: Regularization,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        bins: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args, Clone)]
pub struct ValidateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[command(flatten)]
    pub reg: Regularization,
    /// Marginal penalty; omit for balanced OT.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub mass_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass_beta: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl ValidateArgs {
    pub fn config(&self) -> CliResult<ExperimentConfig> {
        let sigma = self
            .reg
            .resolve()?
            .unwrap_or_else(|| (DEFAULT_EPSILON / 2.0).sqrt());
        for (name, m) in [("mass-alpha", self.mass_alpha), ("mass-beta", self.mass_beta)] {
            if !(m > 0.0) || !m.is_finite() {
                return Err(CliError::input(format!("{name} must be positive, got {m}")));
            }
        }
        Ok(ExperimentConfig {
            dims: self.dims.clone(),
            ns: self.ns.clone(),
            trials: self.trials,
            sigma,
            gamma: self.gamma,
            mass_alpha: self.mass_alpha,
            mass_beta: self.mass_beta,
            base_seed: self.seed,
            sinkhorn: experiment_sinkhorn(),
        })
    }
}

pub fn run(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Bures { problem } => cmd_bures(&load_problem(problem)?),
        Command::Entropic {
            problem,
            reg,
            plan,
            duals,
            gradient,
            ridge,
        } => {
            let mut p = load_problem(problem)?;
            reg.apply(&mut p)?;
            cmd_entropic(
                &p,
                &EntropicOutputs {
                    plan: *plan,
                    duals: *duals,
                    gradient: *gradient,
                    ridge: *ridge,
                },
            )
        }
        Command::Uot {
            problem,
            reg,
            gamma,
        } => {
            let mut p = load_problem(problem)?;
            reg.apply(&mut p)?;
            if gamma.is_some() {
                p.gamma = *gamma;
            }
            cmd_uot(&p)
        }
        Command::Barycenter {
            components,
            reg,
            tol,
            max_iter,
            damping,
        } => {
            let spec = load_barycenter(components)?;
            let sigma = match reg.resolve()? {
                Some(s) => s,
                None => resolve_sigma(spec.sigma, spec.epsilon)?
                    .ok_or_else(|| CliError::input("barycenter needs sigma or epsilon"))?,
            };
            let problem = BarycenterProblem::new(spec.build()?, sigma)?;
            let mut options = BarycenterOptions::for_problem(&problem);
            if let Some(t) = tol {
                options.tol = *t;
            }
            options.max_iter = *max_iter;
            options.damping = *damping;
            cmd_barycenter(&problem, &options)
        }
        Command::Validate(args) => {
            let config = args.config()?;
            let rows = convergence_experiment(&config)?;
            write_csv(&rows, create(&args.out)?)?;
            Ok(metadata(&config, rows.len(), &args.out))
        }
        Command::ValidatePlan(args) => {
            let config = args.config()?;
            let rows = plan_experiment(&config)?;
            write_csv(&rows, create(&args.out)?)?;
            Ok(metadata(&config, rows.len(), &args.out))
        }
        Command::PlanHist {
            problem,
            reg,
            gamma,
            n,
            bins,
            seed,
            out,
        } => {
            let mut p = load_problem(problem)?;
            reg.apply(&mut p)?;
            if gamma.is_some() {
                p.gamma = *gamma;
            }
            cmd_plan_hist(&p, *n, *bins, *seed, out)
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))
}

fn metadata(config: &ExperimentConfig, rows: usize, out: &Path) -> Value {
    json!({
        "out": out.display().to_string(),
        "rows": rows,
        "sigma": num(config.sigma),
        "epsilon": num(2.0 * config.sigma * config.sigma),
        "gamma": config.gamma.map_or(Value::Null, num),
        "base_seed": config.base_seed,
        "rng": RNG_ALGORITHM,
        "sinkhorn": {
            "tol": num(config.sinkhorn.tol),
            "max_iter": config.sinkhorn.max_iter,
            "value_rtol": num(config.sinkhorn.value_rtol),
        },
        "threads": crate::experiment::thread_count(),
        "threads_env": THREADS_ENV,
    })
}

pub fn cmd_bures(p: &Problem) -> CliResult<Value> {
    Ok(json!({
        "w2": num(w2_gaussian(&p.alpha, &p.beta)?),
        "bures": num(bures(p.alpha.cov(), p.beta.cov())?),
    }))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EntropicOutputs {
    pub plan: bool,
    pub duals: bool,
    pub gradient: bool,
    pub ridge: f64,
}

pub fn cmd_entropic(p: &Problem, out: &EntropicOutputs) -> CliResult<Value> {
    let sigma = p.sigma()?;
    let (a, b) = (p.alpha.cov(), p.beta.cov());
    let mut v = json!({
        "sigma": num(sigma),
        "ot_sigma": num(ot_sigma(&p.alpha, &p.beta, sigma)?),
        "bures_sigma_sq": num(bures_sigma_sq(a, b, sigma)?),
        "divergence": num(sinkhorn_divergence(&p.alpha, &p.beta, sigma)?),
    });
    if out.plan {
        let plan = plan_closed_form_with_ridge(&p.alpha, &p.beta, sigma, out.ridge)?;
        v["plan"] = json!({
            "mean": vector(&plan.mean),
            "cov": matrix(plan.cov.as_matrix()),
        });
    }
    if out.duals {
        let (u, w) = dual_potentials(a, b, sigma)?;
        v["duals"] = json!({"U": matrix(u.as_matrix()), "V": matrix(w.as_matrix())});
    }
    if out.gradient {
        let (ga, gb) = grad_bures_sigma(a, b, sigma)?;
        v["grad"] = json!({"A": matrix(ga.as_matrix()), "B": matrix(gb.as_matrix())});
    }
    Ok(v)
}

pub fn cmd_uot(p: &Problem) -> CliResult<Value> {
    let params = UnbalancedParams::new(p.sigma()?, p.gamma()?)?;
    let plan = unbalanced_plan(&p.alpha, &p.beta, &params)?;
    Ok(json!({
        "uot": num(uot(&p.alpha, &p.beta, &params)?),
        "mass": num(plan.mass),
        "mean": vector(&plan.mean),
        "cov": matrix(plan.cov.as_matrix()),
    }))
}

pub fn cmd_barycenter(problem: &BarycenterProblem, options: &BarycenterOptions) -> CliResult<Value> {
    let sol = debiased_barycenter(problem, options)?;
    Ok(json!({
        "mean": vector(sol.barycenter.mean()),
        "cov": matrix(sol.barycenter.cov().as_matrix()),
        "residual": num(sol.residual),
        "iterations": sol.iterations,
    }))
}

/// Histogram CSV columns.
pub const HIST_CSV_HEADER: &str = "x_lo,x_hi,y_lo,y_hi,weight";

/// Samples `n` points from each measure, solves the discrete problem
/// (unbalanced when `gamma` is set) and writes the binned plan to `out`.
/// Returns the closed-form plan parameters alongside the histogram totals.
pub fn cmd_plan_hist(p: &Problem, n: usize, bins: usize, seed: u64, out: &Path) -> CliResult<Value> {
    let sigma = p.sigma()?;
    if p.alpha.dim() != 1 {
        return Err(CliError::input(format!(
            "plan-hist needs 1-D measures, got dimension {}",
            p.alpha.dim()
        )));
    }
    if n == 0 || bins == 0 {
        return Err(CliError::input("n and bins must be positive"));
    }
    let mut rng = SeededRng::new(seed);
    let x = sample_gaussian(&p.alpha, n, &mut rng)?;
    let y = sample_gaussian(&p.beta, n, &mut rng)?;
    let options = experiment_sinkhorn();
    let (theory, f, g) = match p.gamma {
        Some(gamma) => {
            let params = UnbalancedParams::new(sigma, gamma)?;
            let plan = unbalanced_plan(&p.alpha, &p.beta, &params)?;
            let sol = sinkhorn_discrete_unbalanced(&x, &y, sigma, gamma, &options)?;
            (
                json!({"mass": num(plan.mass), "mean": vector(&plan.mean), "cov": matrix(plan.cov.as_matrix())}),
                sol.f,
                sol.g,
            )
        }
        None => {
            let plan = plan_closed_form_with_ridge(&p.alpha, &p.beta, sigma, 0.0)?;
            let sol = sinkhorn_discrete(&x, &y, sigma, &options)?;
            (
                json!({"mass": num(1.0), "mean": vector(&plan.mean), "cov": matrix(plan.cov.as_matrix())}),
                sol.f,
                sol.g,
            )
        }
    };
    let hist = plan_histogram(&f, &g, &x, &y, sigma, bins)?;
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(HIST_CSV_HEADER.split(','))?;
    for ix in 0..bins {
        for iy in 0..bins {
            w.serialize((
                hist.x_edges[ix],
                hist.x_edges[ix + 1],
                hist.y_edges[iy],
                hist.y_edges[iy + 1],
                hist.weights[ix * bins + iy],
            ))?;
        }
    }
    w.flush()?;
    Ok(json!({
        "out": out.display().to_string(),
        "sigma": num(sigma),
        "gamma": p.gamma.map_or(Value::Null, num),
        "n": n,
        "bins": bins,
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "histogram_mass": num(hist.total()),
        "plan": theory,
    }))
}
