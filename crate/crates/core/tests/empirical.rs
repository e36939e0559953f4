mod common;

use common::*;
use gauss_eot_core::empirical::*;
use gauss_eot_core::entropic::{bures_sigma_sq, plan_closed_form};
use gauss_eot_core::unbalanced::{uot, UnbalancedParams};
use gauss_eot_core::{Error, Gaussian, Matrix, PsdMatrix, Vector};

fn sample(g: &Gaussian, n: usize, seed: u64) -> DiscreteMeasure {
    sample_gaussian(g, n, &mut rng(seed)).unwrap()
}

fn plan_matrix(sol_f: &[f64], sol_g: &[f64], x: &DiscreteMeasure, y: &DiscreteMeasure, sigma: f64) -> Vec<Vec<f64>> {
    let eps = 2.0 * sigma * sigma;
    (0..x.len())
        .map(|i| {
            (0..y.len())
                .map(|j| {
                    let c: f64 = x.point(i).iter().zip(y.point(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    x.weights()[i] * y.weights()[j] * ((sol_f[i] + sol_g[j] - c) / eps).exp()
                })
                .collect()
        })
        .collect()
}

#[test]
fn gaussian_sampling() {
    let mean = Vector::from_vec(vec![1.0, -2.0, 0.5]);
    let point = Gaussian::new(mean.clone(), PsdMatrix::zeros(3)).unwrap();
    let one = sample(&point, 1, 1);
    assert_eq!(one.point(0), mean.as_slice());
    assert_eq!(one.weights(), &[1.0]);

    let cov = psd(Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]));
    let g = Gaussian::with_mass(Vector::from_vec(vec![0.3, -0.1]), cov.clone(), 1.5).unwrap();
    let big = sample(&g, 100_000, 2);
    let (m, c) = big.moments();
    assert!((big.mass() - 1.5).abs() < 1e-9);
    assert!(rel_frob(&c, cov.as_matrix()) < 0.03);
    assert!((m - g.mean()).amax() < 0.02);

    assert_eq!(sample(&g, 50, 3), sample(&g, 50, 3));
    assert_ne!(sample(&g, 50, 3), sample(&g, 50, 4));
    assert!(sample_gaussian(&g, 0, &mut rng(1)).is_err());
}

#[test]
fn wishart_sampling() {
    let z = rng(5).standard_normal();
    let w = sample_wishart(1, 0.2, 1, &mut rng(5)).unwrap();
    assert_eq!(w[(0, 0)], 0.2 * z * z);

    let mut g = rng(6);
    let mut acc = Matrix::zeros(5, 5);
    for _ in 0..10_000 {
        acc += sample_wishart(5, 0.2, 5, &mut g).unwrap().as_matrix();
    }
    assert!(rel_frob(&(acc / 10_000.0), &Matrix::identity(5, 5)) < 0.05);

    let a = sample_wishart(4, 0.2, 4, &mut rng(7)).unwrap();
    assert_eq!(a, sample_wishart(4, 0.2, 4, &mut rng(7)).unwrap());
    assert!(matches!(sample_wishart(4, 0.2, 3, &mut rng(7)), Err(Error::InvalidInput(_))));
}

#[test]
fn trial_seeds_are_stable_and_distinct() {
    assert_eq!(trial_seed(42, 5, 100, 3), trial_seed(42, 5, 100, 3));
    let mut seen = std::collections::HashSet::new();
    for d in [1, 2, 5, 10] {
        for n in [100, 500, 2000, 5000] {
            for t in 0..50 {
                assert!(seen.insert(trial_seed(0, d, n, t)));
            }
        }
    }
    assert_eq!(trial_seed(7, 1, 2, 3), trial_seed(0, 1, 2, 3).wrapping_add(7));
    assert_eq!(SeededRng::new(9).seed(), 9);
}

#[test]
fn single_points() {
    let x = DiscreteMeasure::new(2, vec![0.0, 0.0], vec![1.0]).unwrap();
    let y = DiscreteMeasure::new(2, vec![3.0, 4.0], vec![1.0]).unwrap();
    let sol = sinkhorn_discrete(&x, &y, 0.7, &SinkhornOptions::default()).unwrap();
    assert!((sol.value - 25.0).abs() < 1e-9);
}

#[test]
fn symmetric_input_gives_symmetric_plan() {
    let g = Gaussian::new(Vector::zeros(2), diag(&[1.0, 0.5])).unwrap();
    let x = sample(&g, 200, 10);
    let sol = sinkhorn_discrete(&x, &x, 0.5, &SinkhornOptions::default()).unwrap();
    let p = plan_matrix(&sol.f, &sol.g, &x, &x, 0.5);
    for i in 0..x.len() {
        for j in 0..i {
            assert!((p[i][j] - p[j][i]).abs() < 1e-9 * p[i][j].max(1e-300).max(1.0 / 4e4));
        }
    }
}

/// Entropic OT between two 2-point uniform measures: the couplings are
/// `[[p, ½ - p], [½ - p, p]]`, and the objective
/// `⟨P, C⟩ + 2σ² Σ P log(4P)` has derivative `c₁₁ + c₂₂ - c₁₂ - c₂₁ + 4σ² log(p/(½ - p))`,
/// increasing in `p`; bisect it.
fn two_point_oracle(c: [[f64; 2]; 2], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let slope = c[0][0] + c[1][1] - c[0][1] - c[1][0];
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let p = 0.5 * (lo + hi);
        if slope + 4.0 * s2 * (p / (0.5 - p)).ln() > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
    }
    let p = 0.5 * (lo + hi);
    let plan = [[p, 0.5 - p], [0.5 - p, p]];
    let mut obj = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            obj += plan[i][j] * c[i][j] + 2.0 * s2 * plan[i][j] * (4.0 * plan[i][j]).ln();
        }
    }
    obj
}

#[test]
fn two_points_match_brute_force() {
    let xs = [0.0, 1.0, -0.3, 0.8];
    let x = DiscreteMeasure::uniform(2, xs.to_vec(), 1.0).unwrap();
    let ys = [0.5, 0.2, 1.5, -1.0];
    let y = DiscreteMeasure::uniform(2, ys.to_vec(), 1.0).unwrap();
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = (0..2).map(|k| (x.point(i)[k] - y.point(j)[k]).powi(2)).sum();
        }
    }
    for sigma in [0.3, 0.7, 1.5] {
        let opts = SinkhornOptions { tol: 1e-13, ..Default::default() };
        let sol = sinkhorn_discrete(&x, &y, sigma, &opts).unwrap();
        let want = two_point_oracle(c, sigma);
        assert!((sol.value - want).abs() < 1e-6, "{} vs {want}", sol.value);
    }
}

#[test]
fn balanced_marginals_and_moments() {
    let mut g = rng(11);
    let alpha = gaussian(random_vector(2, &mut g), wishart(2, &mut g));
    let beta = gaussian(random_vector(2, &mut g), wishart(2, &mut g));
    let x = sample(&alpha, 300, 12);
    let y = sample(&beta, 250, 13);
    let tol = 1e-10;
    let opts = SinkhornOptions { tol, ..Default::default() };
    let sol = sinkhorn_discrete(&x, &y, 0.5, &opts).unwrap();
    assert!(sol.marginal_error < 10.0 * tol);
    let p = plan_matrix(&sol.f, &sol.g, &x, &y, 0.5);
    for i in 0..x.len() {
        let row: f64 = p[i].iter().sum();
        assert!((row - x.weights()[i]).abs() < 10.0 * tol);
    }
    for j in 0..y.len() {
        let col: f64 = p.iter().map(|r| r[j]).sum();
        assert!((col - y.weights()[j]).abs() < 10.0 * tol);
    }

    let mom = plan_moments(&sol.f, &sol.g, &x, &y, 0.5).unwrap();
    let (mx, cx) = x.moments();
    let (my, cy) = y.moments();
    assert!((mom.mass - 1.0).abs() < 1e-8);
    assert!((mom.mean.rows(0, 2) - mx).amax() < 1e-8);
    assert!((mom.mean.rows(2, 2) - my).amax() < 1e-8);
    assert!((mom.cov.view((0, 0), (2, 2)) - cx).amax() < 1e-8);
    assert!((mom.cov.view((2, 2), (2, 2)) - cy).amax() < 1e-8);

    let short = SinkhornOptions { tol: 1e-300, max_iter: 2, value_rtol: 0.0 };
    assert!(matches!(sinkhorn_discrete(&x, &y, 0.05, &short), Err(Error::NotConverged { .. })));
    let heavy = DiscreteMeasure::uniform(2, vec![0.0; 4], 2.0).unwrap();
    assert!(sinkhorn_discrete(&heavy, &y, 0.5, &opts).is_err());
}

#[test]
fn value_rule_agrees_with_potential_rule() {
    let mut g = rng(14);
    let alpha = gaussian(Vector::zeros(5), wishart(5, &mut g));
    let beta = gaussian(Vector::zeros(5), wishart(5, &mut g));
    let x = sample(&alpha, 500, 15);
    let y = sample(&beta, 500, 16);
    let strict = sinkhorn_discrete(&x, &y, 0.5, &SinkhornOptions::default()).unwrap();
    let fast = SinkhornOptions { value_rtol: 1e-8, ..Default::default() };
    let quick = sinkhorn_discrete(&x, &y, 0.5, &fast).unwrap();
    assert!(quick.iterations <= strict.iterations);
    assert!((quick.value - strict.value).abs() < 1e-6 * strict.value.abs());
}

#[test]
fn balanced_estimate_approaches_closed_form() {
    let mut g = rng(17);
    let (a, b) = (wishart(3, &mut g), wishart(3, &mut g));
    let alpha = gaussian(Vector::zeros(3), a.clone());
    let beta = gaussian(Vector::zeros(3), b.clone());
    let opts = SinkhornOptions { value_rtol: 1e-8, ..Default::default() };
    let sol = sinkhorn_discrete(&sample(&alpha, 5000, 18), &sample(&beta, 5000, 19), 0.5, &opts).unwrap();
    let closed = bures_sigma_sq(&a, &b, 0.5).unwrap();
    assert!((sol.value - closed).abs() < 0.05 * closed.abs(), "{} vs {closed}", sol.value);
}

#[test]
fn unbalanced_limits() {
    let mut g = rng(20);
    let alpha = gaussian(random_vector(2, &mut g), wishart(2, &mut g));
    let beta = gaussian(random_vector(2, &mut g), wishart(2, &mut g));
    let x = sample(&alpha, 150, 21);
    let y = sample(&beta, 120, 22);
    let opts = SinkhornOptions { tol: 1e-11, ..Default::default() };
    let balanced = sinkhorn_discrete(&x, &y, 0.5, &opts).unwrap();
    // the constant shift (f + c, g - c) contracts only at τ² ≈ 1 - 1e-9 here, so
    // potential changes stall just under the default tolerance
    let loose = sinkhorn_discrete_unbalanced(&x, &y, 0.5, 1e9, &SinkhornOptions::default()).unwrap();
    assert!((loose.value - balanced.value).abs() < 1e-4, "{} vs {}", loose.value, balanced.value);

    let empty = DiscreteMeasure::new(2, vec![0.0, 0.0], vec![0.0]).unwrap();
    let sol = sinkhorn_discrete_unbalanced(&empty, &y, 0.5, 2.0, &opts).unwrap();
    assert!((sol.value - 2.0 * y.mass()).abs() < 1e-15);
    assert_eq!(sol.mass, 0.0);
    assert!(sinkhorn_discrete_unbalanced(&x, &y, 0.5, 0.0, &opts).is_err());
}

#[test]
fn unbalanced_estimate_approaches_closed_form() {
    let mut g = rng(23);
    let params = UnbalancedParams::new(0.5, 1.0).unwrap();
    for mb in [1.0, 2.0] {
        let alpha = Gaussian::with_mass(Vector::from_vec(vec![g.uniform(-0.5, 0.5)]), scalar(g.uniform(0.3, 1.5)), 1.0).unwrap();
        let beta = Gaussian::with_mass(Vector::from_vec(vec![g.uniform(-0.5, 0.5)]), scalar(g.uniform(0.3, 1.5)), mb).unwrap();
        let opts = SinkhornOptions { value_rtol: 1e-8, ..Default::default() };
        let sol = sinkhorn_discrete_unbalanced(&sample(&alpha, 2000, 24), &sample(&beta, 2000, 25), 0.5, 1.0, &opts).unwrap();
        let closed = uot(&alpha, &beta, &params).unwrap();
        assert!((sol.value - closed).abs() < 0.02 * closed.abs(), "{} vs {closed}", sol.value);
    }
}

#[test]
fn histogram_examples() {
    let x = DiscreteMeasure::new(1, vec![0.3], vec![1.0]).unwrap();
    let y = DiscreteMeasure::new(1, vec![-0.2], vec![1.0]).unwrap();
    let sol = sinkhorn_discrete(&x, &y, 0.5, &SinkhornOptions::default()).unwrap();
    let h = plan_histogram(&sol.f, &sol.g, &x, &y, 0.5, 4).unwrap();
    assert_eq!(h.weights.iter().filter(|w| **w != 0.0).count(), 1);
    assert!((h.total() - 1.0).abs() < 1e-9);

    let x2 = DiscreteMeasure::new(2, vec![0.0, 0.0], vec![1.0]).unwrap();
    let f = [0.0];
    assert!(matches!(plan_histogram(&f, &f, &x2, &x2, 0.5, 4), Err(Error::Unsupported(_))));
}

/// `N(mean, var)` on a midpoint grid over ±6 standard deviations.
fn grid(mean: f64, var: f64, n: usize) -> DiscreteMeasure {
    let half = 6.0 * var.sqrt();
    let h = 2.0 * half / n as f64;
    let pts: Vec<f64> = (0..n).map(|i| mean - half + (i as f64 + 0.5) * h).collect();
    let raw: Vec<f64> = pts.iter().map(|&p| normal_pdf(p, mean, var)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteMeasure::new(1, pts, raw.iter().map(|r| r / total).collect()).unwrap()
}

#[test]
fn histogram_mode_sits_at_the_plan_mean() {
    let alpha = gaussian(Vector::from_vec(vec![0.0]), scalar(0.04));
    let beta = gaussian(Vector::from_vec(vec![0.5]), scalar(0.09));
    let (x, y) = (grid(0.0, 0.04, 400), grid(0.5, 0.09, 400));
    for sigma in [0.1, 0.3] {
        let sol = sinkhorn_discrete(&x, &y, sigma, &SinkhornOptions::default()).unwrap();
        let bins = 41;
        let h = plan_histogram(&sol.f, &sol.g, &x, &y, sigma, bins).unwrap();
        let plan_mass: f64 = plan_matrix(&sol.f, &sol.g, &x, &y, sigma).iter().flatten().sum();
        assert!((h.total() - plan_mass).abs() < 1e-10);

        let (k, _) = h.weights.iter().enumerate().fold((0, 0.0), |best, (k, w)| if *w > best.1 { (k, *w) } else { best });
        let center = |e: &[f64], i: usize| 0.5 * (e[i] + e[i + 1]);
        let (cx, cy) = (center(&h.x_edges, k / bins), center(&h.y_edges, k % bins));
        let mean = plan_closed_form(&alpha, &beta, sigma).unwrap().mean;
        let (wx, wy) = (h.x_edges[1] - h.x_edges[0], h.y_edges[1] - h.y_edges[0]);
        assert!((cx - mean[0]).abs() <= wx && (cy - mean[1]).abs() <= wy, "mode ({cx}, {cy})");
    }
}
