//! Structural properties of the basis checked against independent oracles.

use strayfield::abbasis::{w_alpha, R3Point, Vec3, CLOSED_FORMS};
use strayfield::s3harm::{y_alpha, MultiIndex, S3Point};
use strayfield::validation::{self, reference_basis};

fn unit(v: [f64; 4]) -> [f64; 4] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Laplacian in R⁴ of the degree-zero extension `ξ ↦ Y(ξ/|ξ|)`, which equals
/// the Laplace–Beltrami operator on the unit sphere.
fn laplace_beltrami(alpha: MultiIndex, xi: [f64; 4], h: f64) -> f64 {
    let g = |p: [f64; 4]| y_alpha(alpha, &S3Point::from_cartesian(unit(p)));
    let f0 = g(xi);
    (0..4)
        .map(|d| {
            let at = |s: f64| {
                let mut p = xi;
                p[d] += s * h;
                g(p)
            };
            (-at(2.0) + 16.0 * at(1.0) - 30.0 * f0 + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * h * h)
        })
        .sum()
}

#[test]
fn s3_harmonics_are_laplace_beltrami_eigenfunctions() {
    let points: Vec<[f64; 4]> = validation::random_points(50, 1.0, 3)
        .iter()
        .zip(validation::random_points(50, 1.0, 5))
        .map(|(a, b)| unit([a[0], a[1], a[2], b[0]]))
        .collect();
    let mut worst = 0.0f64;
    for alpha in MultiIndex::up_to_degree(4) {
        let eig = -f64::from(alpha.k * (alpha.k + 2));
        for xi in &points {
            let y = y_alpha(alpha, &S3Point::from_cartesian(*xi));
            let lb = laplace_beltrami(alpha, *xi, 1e-3);
            worst = worst.max((lb - eig * y).abs() / y.abs().max(1e-3));
        }
    }
    assert!(worst < 1e-4, "worst relative deviation {worst:e}");
}

#[test]
fn orthogonality_to_degree_six() {
    assert!(validation::s3_orthonormality_deviation(6) < 1e-9);
    assert!(validation::weighted_orthogonality_deviation(6, &reference_basis) < 1e-8);
    assert!(validation::gradient_orthogonality_deviation(4) < 1e-6);
}

#[test]
fn orthogonality_is_sensitive_to_a_wrong_normalization() {
    let scaled = |a: MultiIndex, x: Vec3| if a == MultiIndex::new(3, 2, -1).unwrap() { 1.001 } else { 1.0 } * reference_basis(a, x);
    assert!(validation::weighted_orthogonality_deviation(4, &scaled) > 1e-4);
}

#[test]
fn eigen_relation_at_random_points() {
    let points = validation::random_points(30, 1.5, 21);
    assert!(validation::eigen_relation_deviation(4, &reference_basis, &points) < 1e-4);
}

#[test]
fn low_degree_functions_are_rational() {
    for cf in &CLOSED_FORMS {
        let k = cf.alpha.k as i32;
        let g = |x: Vec3| {
            let q = x.iter().map(|v| v * v).sum::<f64>() + 1.0;
            w_alpha(cf.alpha, R3Point(x)) * q.powf(f64::from(k) + 0.5)
        };
        let base = [0.3, -0.7, 0.2];
        let dir = [0.6, 0.48, -0.64];
        let samples: Vec<f64> = (0..=(2 * k + 1))
            .map(|j| {
                let t = 0.25 * f64::from(j);
                g([base[0] + t * dir[0], base[1] + t * dir[1], base[2] + t * dir[2]])
            })
            .collect();
        let mut diffs = samples.clone();
        for _ in 0..=(2 * k) {
            diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diffs[0].abs() < 1e-11 * scale.max(1.0), "{} {:e}", cf.alpha, diffs[0]);
    }
}

#[test]
fn sign_flip_in_odd_orders_is_flagged() {
    let flipped = |a: MultiIndex, x: Vec3| if a.m % 2 != 0 { -reference_basis(a, x) } else { reference_basis(a, x) };
    let report = validation::basis_check(&flipped, 2, 99);
    assert!(!report.pass);
    assert!(report.failing_labels.iter().any(|l| l == "(1, 1, 1)"));
    assert!(report.failing_labels.iter().all(|l| !l.ends_with(" 0)")));
    assert!(validation::basis_check(&reference_basis, 6, 99).pass);
}
