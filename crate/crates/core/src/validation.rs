//! Numerical checks of the basis: closed forms, orthogonality relations and
//! the eigen-relation. Used by the `basis-check` command and the test suites.
//!
//! Every check takes the basis through a plain function so that a deliberately
//! broken evaluator can be substituted.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abbasis::{grad_w_alpha, stereo_forward, w_alpha, BasisEvaluator, R3Point, Vec3, CLOSED_FORMS};
use crate::quadrature::gauss_legendre;
use crate::s3harm::{y_alpha, MultiIndex, S3Point};
use crate::solver::degree_denominator;

/// `W_α(x)` as seen by the checks.
pub type BasisFn<'a> = &'a (dyn Fn(MultiIndex, Vec3) -> f64 + Sync);

/// The library evaluator.
pub fn reference_basis(alpha: MultiIndex, x: Vec3) -> f64 {
    w_alpha(alpha, R3Point(x))
}

/// Points drawn uniformly from the cube `[-extent, extent]³`.
pub fn random_points(n: usize, extent: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [0; 3].map(|_| rng.random_range(-extent..extent))).collect()
}

/// Worst absolute deviation of one closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormResult {
    pub alpha: String,
    pub formula: String,
    pub max_deviation: f64,
}

pub fn closed_form_deviations(basis: BasisFn, points: &[Vec3]) -> Vec<ClosedFormResult> {
    CLOSED_FORMS
        .iter()
        .map(|cf| {
            let max_deviation =
                points.iter().map(|&x| (basis(cf.alpha, x) - (cf.eval)(x)).abs()).fold(0.0, f64::max);
            ClosedFormResult { alpha: cf.alpha.to_string(), formula: cf.formula.to_string(), max_deviation }
        })
        .collect()
}

/// Product rule on S³ (uniform in `χ` with `sin²χ` weights, Gauss–Legendre
/// in `cos θ`, trapezoid in `φ`), exact for products of harmonics of degree
/// at most `k_max`.
pub fn s3_product_rule(k_max: u32) -> Vec<(S3Point, f64)> {
    let n_chi = k_max as usize + 2;
    let n_theta = k_max as usize + 2;
    let n_phi = 2 * k_max as usize + 3;
    let (tn, tw) = gauss_legendre(n_theta);
    let mut out = Vec::with_capacity(n_chi * n_theta * n_phi);
    for j in 1..=n_chi {
        let chi = j as f64 * PI / (n_chi as f64 + 1.0);
        let wc = PI / (n_chi as f64 + 1.0) * chi.sin().powi(2);
        for (t, wt) in tn.iter().zip(&tw) {
            let theta = t.acos();
            for p in 0..n_phi {
                let phi = 2.0 * PI * p as f64 / n_phi as f64;
                out.push((S3Point::from_angles(phi, theta, chi), wc * wt * 2.0 * PI / n_phi as f64));
            }
        }
    }
    out
}

fn gram_deviation(k_max: u32, target: f64, nodes: impl Iterator<Item = (Vec<f64>, f64)>) -> f64 {
    let n = MultiIndex::count_up_to(k_max);
    let mut gram = vec![0.0; n * n];
    for (v, w) in nodes {
        for a in 0..n {
            let wa = w * v[a];
            for b in a..n {
                gram[a * n + b] += wa * v[b];
            }
        }
    }
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let expected = if a == b { target } else { 0.0 };
            worst = worst.max((gram[a * n + b] - expected).abs());
        }
    }
    worst
}

/// `max |∫_{S³} Y_α Y_β dσ - δ_{αβ}|` over `k ≤ k_max`.
pub fn s3_orthonormality_deviation(k_max: u32) -> f64 {
    let labels: Vec<MultiIndex> = MultiIndex::up_to_degree(k_max).collect();
    let rule = s3_product_rule(k_max);
    gram_deviation(k_max, 1.0, rule.iter().map(|(p, w)| (labels.iter().map(|a| y_alpha(*a, p)).collect(), *w)))
}

/// `max |∫_{R³} W_α W_β (|x|²+1)⁻² dx - δ_{αβ}/4|` over `k ≤ k_max`, with the
/// integral taken over the stereographic image of [`s3_product_rule`].
pub fn weighted_orthogonality_deviation(k_max: u32, basis: BasisFn) -> f64 {
    let labels: Vec<MultiIndex> = MultiIndex::up_to_degree(k_max).collect();
    let rule = s3_product_rule(k_max);
    gram_deviation(
        k_max,
        0.25,
        rule.iter().map(|(p, w)| {
            let x = stereo_forward(p).expect("rule avoids the north pole").0;
            let q = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 1.0;
            // dx = ((|x|²+1)/2)³ dσ, combined with the (|x|²+1)⁻² weight.
            let weight = w * q / 8.0;
            (labels.iter().map(|a| basis(*a, x)).collect(), weight)
        }),
    )
}

/// Largest relative deviation of `∫ ∇W_α·∇W_β dx` from
/// `δ_{αβ} (2k+1)(2k+3)/4`, computed in spherical coordinates with
/// `r = cot(χ/2)` and Gauss–Legendre in `χ ∈ (0, π)`.
pub fn gradient_orthogonality_deviation(k_max: u32) -> f64 {
    let ev = BasisEvaluator::new(k_max);
    let labels: Vec<MultiIndex> = MultiIndex::up_to_degree(k_max).collect();
    let n = labels.len();
    let n_chi = 4 * k_max as usize + 24;
    let n_theta = k_max as usize + 4;
    let n_phi = 2 * k_max as usize + 4;
    let (cn, cw) = gauss_legendre(n_chi);
    let (tn, tw) = gauss_legendre(n_theta);
    let mut gram = vec![0.0; n * n];
    let mut scratch = ev.scratch();
    let mut grads = vec![[0.0; 3]; n];
    for (c, wc) in cn.iter().zip(&cw) {
        let chi = 0.5 * PI * (1.0 + c);
        let half = 0.5 * chi;
        let r = half.cos() / half.sin();
        let dr = 1.0 / (2.0 * half.sin().powi(2));
        let w_r = 0.5 * PI * wc * r * r * dr;
        for (t, wt) in tn.iter().zip(&tw) {
            let st = (1.0 - t * t).sqrt();
            for p in 0..n_phi {
                let phi = 2.0 * PI * p as f64 / n_phi as f64;
                let x = [r * st * phi.cos(), r * st * phi.sin(), r * t];
                let w = w_r * wt * 2.0 * PI / n_phi as f64;
                ev.for_each(R3Point(x), &mut scratch, |i, _, g| grads[i] = g);
                for a in 0..n {
                    for b in a..n {
                        let d = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1] + grads[a][2] * grads[b][2];
                        gram[a * n + b] += w * d;
                    }
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for a in 0..n {
        let scale = degree_denominator(labels[a].k) / 4.0;
        for b in a..n {
            let expected = if a == b { scale } else { 0.0 };
            worst = worst.max((gram[a * n + b] - expected).abs() / scale);
        }
    }
    worst
}

/// Fourth-order central-difference Laplacian.
pub fn fd_laplacian(f: impl Fn(Vec3) -> f64, x: Vec3, h: f64) -> f64 {
    let mut lap = 0.0;
    let f0 = f(x);
    for d in 0..3 {
        let at = |s: f64| {
            let mut y = x;
            y[d] += s * h;
            f(y)
        };
        lap += (-at(2.0) + 16.0 * at(1.0) - 30.0 * f0 + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * h * h);
    }
    lap
}

/// Largest relative violation of `-ΔW_α = (2k+1)(2k+3) W_α / (|x|²+1)²` over
/// `k ≤ k_max` and the given points.
pub fn eigen_relation_deviation(k_max: u32, basis: BasisFn, points: &[Vec3]) -> f64 {
    let mut worst = 0.0f64;
    for alpha in MultiIndex::up_to_degree(k_max) {
        for &x in points {
            let q = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 1.0;
            let rhs = degree_denominator(alpha.k) / (q * q) * basis(alpha, x);
            let lhs = -fd_laplacian(|y| basis(alpha, y), x, 1e-3);
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-6));
        }
    }
    worst
}

/// Labels and points for the gradient oracle: random labels with `k <= k_max`,
/// a quarter of the points placed on the `z`-axis.
pub fn gradient_oracle_cases(count: usize, k_max: u32, seed: u64) -> Vec<(MultiIndex, Vec3)> {
    let labels: Vec<MultiIndex> = MultiIndex::up_to_degree(k_max).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let alpha = labels[rng.random_range(0..labels.len())];
            let x = if i % 4 == 0 {
                [0.0, 0.0, rng.random_range(-2.0..2.0)]
            } else {
                [0; 3].map(|_| rng.random_range(-2.0..2.0))
            };
            (alpha, x)
        })
        .collect()
}

/// Largest relative difference `|∇W - ∇_h W| / |∇W|` between the analytic
/// gradient and a fourth-order central difference of `W`.
pub fn gradient_oracle_deviation(cases: &[(MultiIndex, Vec3)]) -> f64 {
    let h = 1e-3;
    let mut worst = 0.0f64;
    for &(alpha, x) in cases {
        let exact = grad_w_alpha(alpha, R3Point(x)).grad;
        let mut diff = 0.0;
        for d in 0..3 {
            let at = |s: f64| {
                let mut y = x;
                y[d] += s * h;
                w_alpha(alpha, R3Point(y))
            };
            let fd = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
            diff += (fd - exact[d]).powi(2);
        }
        let norm = exact.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst = worst.max(diff.sqrt() / norm.max(1e-8));
    }
    worst
}

pub const CLOSED_FORM_TOLERANCE: f64 = 1e-10;
pub const S3_ORTHONORMALITY_TOLERANCE: f64 = 1e-9;
pub const WEIGHTED_ORTHOGONALITY_TOLERANCE: f64 = 1e-8;
pub const GRADIENT_ORTHOGONALITY_TOLERANCE: f64 = 1e-6;
pub const EIGEN_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_ORACLE_TOLERANCE: f64 = 1e-6;

/// Outcome of [`basis_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCheckReport {
    pub k_max: u32,
    pub seed: u64,
    pub closed_forms: Vec<ClosedFormResult>,
    pub failing_labels: Vec<String>,
    pub s3_orthonormality: f64,
    pub weighted_orthogonality: f64,
    pub gradient_orthogonality: f64,
    pub eigen_relation: f64,
    pub pass: bool,
}

/// Closed forms at 100 random points, orthogonality up to `k_max` (gradient
/// orthogonality up to `min(k_max, 4)`) and the eigen-relation at 30 points
/// for `k ≤ min(k_max, 4)`.
pub fn basis_check(basis: BasisFn, k_max: u32, seed: u64) -> BasisCheckReport {
    let points = random_points(100, 2.0, seed);
    let closed_forms = closed_form_deviations(basis, &points);
    let failing_labels: Vec<String> = closed_forms
        .iter()
        .filter(|r| r.max_deviation >= CLOSED_FORM_TOLERANCE || r.max_deviation.is_nan())
        .map(|r| r.alpha.clone())
        .collect();
    let s3 = s3_orthonormality_deviation(k_max);
    let weighted = weighted_orthogonality_deviation(k_max, basis);
    let gradient = gradient_orthogonality_deviation(k_max.min(4));
    let eigen = eigen_relation_deviation(k_max.min(4), basis, &random_points(30, 1.5, seed.wrapping_add(1)));
    let pass = failing_labels.is_empty()
        && s3 < S3_ORTHONORMALITY_TOLERANCE
        && weighted < WEIGHTED_ORTHOGONALITY_TOLERANCE
        && gradient < GRADIENT_ORTHOGONALITY_TOLERANCE
        && eigen < EIGEN_TOLERANCE;
    BasisCheckReport {
        k_max,
        seed,
        closed_forms,
        failing_labels,
        s3_orthonormality: s3,
        weighted_orthogonality: weighted,
        gradient_orthogonality: gradient,
        eigen_relation: eigen,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_points_are_reproducible() {
        assert_eq!(random_points(5, 1.0, 7), random_points(5, 1.0, 7));
        assert_ne!(random_points(5, 1.0, 7), random_points(5, 1.0, 8));
        assert!(random_points(50, 1.5, 1).iter().flatten().all(|v| v.abs() <= 1.5));
    }

    #[test]
    fn fd_laplacian_of_quadratic() {
        let lap = fd_laplacian(|x| x[0] * x[0] + 2.0 * x[1] * x[1] - x[2] * x[2], [0.3, 0.1, -0.2], 1e-2);
        assert!((lap - 4.0).abs() < 1e-9);
    }

    #[test]
    fn default_check_passes_and_sign_flip_is_caught() {
        let report = basis_check(&reference_basis, 2, 11);
        assert!(report.pass, "{report:?}");
        let flipped = |a: MultiIndex, x: Vec3| {
            let v = reference_basis(a, x);
            if a.m.rem_euclid(2) == 1 {
                -v
            } else {
                v
            }
        };
        let report = basis_check(&flipped, 2, 11);
        assert!(!report.pass);
        assert!(report.failing_labels.contains(&"(1, 1, 1)".to_string()));
    }
}
