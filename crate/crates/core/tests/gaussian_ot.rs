mod common;

use common::*;
use gauss_eot_core::gaussian_ot::*;
use gauss_eot_core::{Error, Gaussian, Matrix, PsdMatrix, Vector};

#[test]
fn bures_examples() {
    let mut g = rng(20);
    let a = random_pd(4, &mut g);
    assert!(bures(&a, &a).unwrap().abs() < 1e-12);
    assert!((bures(&scalar(4.0), &scalar(9.0)).unwrap() - 1.0).abs() < 1e-14);
    let c = diag(&[1.0, 4.0, 0.25]);
    let e = diag(&[9.0, 1.0, 1.0]);
    let commuting: f64 = [(1.0f64, 9.0f64), (4.0, 1.0), (0.25, 1.0)]
        .iter()
        .map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2))
        .sum();
    assert!((bures(&c, &e).unwrap() - commuting).abs() < 1e-13);
}

#[test]
fn bures_matches_monge_map_identity() {
    let mut g = rng(21);
    for d in [2, 5] {
        let a = random_pd(d, &mut g);
        let b = random_pd(d, &mut g);
        let t = monge_map(&a, &b).unwrap();
        let via_map = a.trace() + b.trace() - 2.0 * (t.as_matrix() * a.as_matrix()).trace();
        assert!((bures(&a, &b).unwrap() - via_map).abs() < 1e-10);
        assert!((bures(&a, &b).unwrap() - bures(&b, &a).unwrap()).abs() < 1e-10);
        assert!((bures(&a, &PsdMatrix::zeros(d)).unwrap() - a.trace()).abs() < 1e-12);
    }
}

#[test]
fn bures_accepts_singular_input() {
    let mut g = rng(22);
    let s = singular_psd(3, &mut g);
    let b = random_pd(3, &mut g);
    assert!(bures(&s, &b).unwrap() >= 0.0);
}

#[test]
fn w2_examples() {
    let mut g = rng(23);
    let al = gaussian(random_vector(3, &mut g), random_pd(3, &mut g));
    assert!(w2_gaussian(&al, &al).unwrap().abs() < 1e-12);
    let a = gaussian(Vector::from_vec(vec![0.0]), scalar(4.0));
    let b = gaussian(Vector::from_vec(vec![1.0]), scalar(9.0));
    assert!((w2_gaussian(&a, &b).unwrap() - 2.0).abs() < 1e-14);
    let heavy = Gaussian::with_mass(Vector::from_vec(vec![0.0]), scalar(1.0), 2.0).unwrap();
    assert!(matches!(
        w2_gaussian(&heavy, &a),
        Err(Error::InvalidInput(_))
    ));
}

/// Standard normal quantile by bisection on `Φ(x) = (1 + erf(x/√2))/2`.
fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * (1.0 + libm::erf(mid / std::f64::consts::SQRT_2)) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn w2_matches_quantile_coupling_in_1d() {
    // In 1-D the monotone rearrangement is optimal: couple matching quantiles
    // of the two laws on a fine midpoint grid.
    let n = 20_000;
    let z: Vec<f64> = (0..n)
        .map(|k| normal_quantile((k as f64 + 0.5) / n as f64))
        .collect();
    let mut g = rng(24);
    for _ in 0..3 {
        let (ma, mb) = (g.uniform(-2.0, 2.0), g.uniform(-2.0, 2.0));
        let (va, vb) = (g.uniform(0.1, 3.0), g.uniform(0.1, 3.0));
        let grid: f64 = z
            .iter()
            .map(|q| {
                let x = ma + va.sqrt() * q;
                let y = mb + vb.sqrt() * q;
                (x - y) * (x - y)
            })
            .sum::<f64>()
            / n as f64;
        let a = gaussian(Vector::from_vec(vec![ma]), scalar(va));
        let b = gaussian(Vector::from_vec(vec![mb]), scalar(vb));
        let w2 = w2_gaussian(&a, &b).unwrap();
        assert!((w2 - grid).abs() < 1e-3, "{w2} vs {grid}");
    }
}

#[test]
fn monge_map_examples() {
    let mut g = rng(25);
    let a = random_pd(4, &mut g);
    assert!((monge_map(&a, &a).unwrap().as_matrix() - Matrix::identity(4, 4)).norm() < 1e-10);
    assert!((monge_map(&scalar(4.0), &scalar(9.0)).unwrap()[(0, 0)] - 1.5).abs() < 1e-14);
    for d in [2, 6] {
        let a = random_pd(d, &mut g);
        let b = random_pd(d, &mut g);
        let t = monge_map(&a, &b).unwrap();
        let pushed = t.as_matrix() * a.as_matrix() * t.as_matrix();
        assert!((pushed - b.as_matrix()).norm() < 1e-8);
        let back = monge_map(&b, &a).unwrap();
        assert!((t.as_matrix() * back.as_matrix() - Matrix::identity(d, d)).norm() < 1e-8);
    }
    assert!(matches!(
        monge_map(&diag(&[1.0, 0.0]), &PsdMatrix::identity(2)),
        Err(Error::SingularMatrix)
    ));
}

#[test]
fn bures_grad_examples() {
    let mut g = rng(26);
    let a = random_pd(3, &mut g);
    assert!(bures_grad(&a, &a).unwrap().norm() < 1e-10);
    assert!((bures_grad(&scalar(4.0), &scalar(9.0)).unwrap()[(0, 0)] + 0.5).abs() < 1e-14);
}

#[test]
fn bures_grad_matches_finite_differences() {
    let mut g = rng(27);
    for d in [1, 3, 5] {
        let a = random_pd(d, &mut g);
        let b = random_pd(d, &mut g);
        let grad = bures_grad(&a, &b).unwrap();
        let fd = fd_grad(|x| bures(x, &b).unwrap(), &a, 1e-5);
        for (x, y) in grad.iter().zip(fd.iter()) {
            assert!((x - y).abs() <= 1e-5 * y.abs().max(1e-2), "{x} vs {y}");
        }
    }
}

#[test]
fn translated_keeps_covariance() {
    let mut g = rng(28);
    let al = gaussian(random_vector(2, &mut g), random_pd(2, &mut g));
    let t = random_vector(2, &mut g);
    let moved = al.translated(&t).unwrap();
    assert_eq!(moved.cov(), al.cov());
    assert!((moved.mean() - al.mean() - t).norm() < 1e-15);
    assert_eq!(
        Gaussian::standard(3).cov().as_matrix(),
        &Matrix::identity(3, 3)
    );
}
