use gauss_eot::experiment::{
    cell_problem, convergence_experiment, experiment_sinkhorn, median, plan_experiment, write_csv,
    ExperimentConfig, ExperimentRow, PlanRow, CSV_HEADER, PLAN_CSV_HEADER,
};
use gauss_eot::CliError;

fn config(dims: &[usize], ns: &[usize], trials: usize, gamma: Option<f64>) -> ExperimentConfig {
    ExperimentConfig {
        dims: dims.to_vec(),
        ns: ns.to_vec(),
        trials,
        sigma: 0.5,
        gamma,
        mass_alpha: 1.0,
        mass_beta: if gamma.is_some() { 1.5 } else { 1.0 },
        base_seed: 99,
        sinkhorn: experiment_sinkhorn(),
    }
}

fn header(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned()
}

#[test]
fn median_examples() {
    assert_eq!(median(&mut [3.0]), 3.0);
    assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
}

#[test]
fn csv_headers_follow_the_row_structs() {
    let row = ExperimentRow {
        d: 1,
        n: 2,
        trial: 0,
        sigma: 0.5,
        gamma: None,
        mass_alpha: 1.0,
        mass_beta: 1.0,
        empirical: 0.25,
        closed_form: 0.5,
        seed: 7,
    };
    assert_eq!(row.relative_error(), 0.5);
    let mut buf = Vec::new();
    write_csv(&[row], &mut buf).unwrap();
    assert_eq!(header(&buf), CSV_HEADER);
    assert_eq!(
        String::from_utf8(buf).unwrap().lines().nth(1).unwrap(),
        "1,2,0,0.5,,1.0,1.0,0.25,0.5,7"
    );

    let plan = PlanRow {
        d: 1,
        n: 2,
        trial: 0,
        sigma: 0.5,
        gamma: Some(0.1),
        mass_alpha: 1.0,
        mass_beta: 1.1,
        mass_rel_err: 0.0,
        mean_rel_err: 0.0,
        cov_rel_err: 0.0,
        seed: 7,
    };
    let mut buf = Vec::new();
    write_csv(&[plan], &mut buf).unwrap();
    assert_eq!(header(&buf), PLAN_CSV_HEADER);
}

#[test]
fn cell_problem_is_fixed_per_dimension() {
    let c = config(&[3], &[10], 1, Some(1.0));
    let (a1, b1) = cell_problem(&c, 3).unwrap();
    let (a2, b2) = cell_problem(&c, 3).unwrap();
    assert_eq!(a1, a2);
    assert_eq!(b1, b2);
    assert!(a1.mean().iter().chain(b1.mean().iter()).all(|x| (-1.0..1.0).contains(x)));
    assert_eq!(a1.mass(), 1.0);
    assert_eq!(b1.mass(), 1.5);
    let (a3, _) = cell_problem(&c, 4).unwrap();
    assert_eq!(a3.dim(), 4);
}

#[test]
fn single_trial_single_row() {
    let rows = convergence_experiment(&config(&[1], &[10], 1, None)).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].empirical.is_finite() && rows[0].closed_form.is_finite());
    assert_eq!(rows[0].gamma, None);
}

#[test]
fn rows_are_sorted_and_deterministic() {
    let c = config(&[2, 1], &[20, 10], 2, Some(1.0));
    let rows = convergence_experiment(&c).unwrap();
    assert_eq!(rows.len(), 8);
    let keys: Vec<_> = rows.iter().map(|r| (r.d, r.n, r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(rows, convergence_experiment(&c).unwrap());
    // same pair within a cell, distinct sample seeds across trials
    assert_eq!(rows[0].closed_form, rows[3].closed_form);
    assert_ne!(rows[0].seed, rows[1].seed);
}

#[test]
fn plan_rows_are_finite() {
    let rows = plan_experiment(&config(&[2], &[30], 2, Some(0.1))).unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.mass_rel_err.is_finite() && r.mean_rel_err.is_finite() && r.cov_rel_err.is_finite());
    }
}

#[test]
fn invalid_configs() {
    assert!(matches!(
        convergence_experiment(&config(&[], &[10], 1, None)),
        Err(CliError::Input(_))
    ));
    assert!(matches!(
        convergence_experiment(&config(&[1], &[0], 1, None)),
        Err(CliError::Input(_))
    ));
    assert!(matches!(
        plan_experiment(&config(&[1], &[10], 1, None)),
        Err(CliError::Input(_))
    ));
    let mut c = config(&[1], &[10], 1, None);
    c.mass_beta = 2.0;
    assert!(matches!(convergence_experiment(&c), Err(CliError::Input(_))));
}
