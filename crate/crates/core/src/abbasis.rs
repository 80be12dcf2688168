//! Rational basis functions on R³ obtained from S³ harmonics by inverse
//! stereographic projection:
//!
//! `W_α(x) = (2/(|x|²+1))^{1/2} Y_α(π⁻¹(x))`,
//!
//! together with their exact gradients. Writing `ξ = π⁻¹(x)` and
//! `ξ̂ = (ξ₁, ξ₂, ξ₃)`,
//!
//! `∇W_α = (1-ξ₄)^{1/2} ((1-cos χ)(e_φ Dφ + e_θ Dθ - e_r Dχ) - ½ Y_α ξ̂)`
//!
//! where `(Dφ, Dθ, Dχ)` are the divided angular derivatives returned by
//! [`y_alpha_angular_derivatives`]. This form was checked against centered
//! finite differences of `W_α` (see the tests), which is the only arbiter used
//! for the constants in it.

use thiserror::Error;

use crate::s3harm::{y_alpha, y_alpha_angular_derivatives, MultiIndex, RadialNorms, RadialTable, S3Point};
use crate::specfun::{lm_index, S2HarmonicTable};

pub type Vec3 = [f64; 3];

/// Distance below which `1 - ξ₄` is treated as the excluded north pole.
pub const NORTH_POLE_GAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("point {0:?} is at (or within 1e-12 of) the north pole of S³")]
    NorthPole([f64; 4]),
}

/// A point of R³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R3Point(pub Vec3);

impl R3Point {
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl From<Vec3> for R3Point {
    fn from(v: Vec3) -> Self {
        R3Point(v)
    }
}

/// `W_α(x)` together with `∇W_α(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    pub w: f64,
    pub grad: Vec3,
}

/// `π⁻¹(x) = (2x, |x|² - 1) / (|x|² + 1)`.
pub fn stereo_inverse(x: R3Point) -> S3Point {
    let r2 = x.norm_sq();
    let d = r2 + 1.0;
    let xi = [2.0 * x.0[0] / d, 2.0 * x.0[1] / d, 2.0 * x.0[2] / d, (r2 - 1.0) / d];
    S3Point::from_cartesian(xi)
}

/// `π(ξ) = (ξ₁, ξ₂, ξ₃) / (1 - ξ₄)`.
pub fn stereo_forward(p: &S3Point) -> Result<R3Point, ProjectionError> {
    let gap = 1.0 - p.xi[3];
    if gap < NORTH_POLE_GAP {
        return Err(ProjectionError::NorthPole(p.xi));
    }
    Ok(R3Point([p.xi[0] / gap, p.xi[1] / gap, p.xi[2] / gap]))
}

/// Local spherical frame `(e_r, e_θ, e_φ)` for polar angle `θ` and azimuth `φ`.
#[inline]
pub fn spherical_frame(phi: f64, theta: f64) -> [Vec3; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
}

/// `W_α(x)`.
pub fn w_alpha(alpha: MultiIndex, x: R3Point) -> f64 {
    let scale = (2.0 / (x.norm_sq() + 1.0)).sqrt();
    scale * y_alpha(alpha, &stereo_inverse(x))
}

/// `W_α(x)` and its analytic gradient.
pub fn grad_w_alpha(alpha: MultiIndex, x: R3Point) -> GradientSample {
    let one_minus = 2.0 / (x.norm_sq() + 1.0);
    let p = stereo_inverse(x);
    let y = y_alpha(alpha, &p);
    let [d_phi, d_theta, d_chi] = y_alpha_angular_derivatives(alpha, &p);
    let [e_r, e_t, e_p] = spherical_frame(p.phi, p.theta);
    let root = one_minus.sqrt();
    let mut grad = [0.0; 3];
    for i in 0..3 {
        let v = one_minus * (e_p[i] * d_phi + e_t[i] * d_theta - e_r[i] * d_chi);
        grad[i] = root * (v - 0.5 * y * p.xi[i]);
    }
    GradientSample { w: root * y, grad }
}

/// Batched evaluation of every `W_α` and `∇W_α` with `k <= n_max` at a point.
#[derive(Debug, Clone)]
pub struct BasisEvaluator {
    n_max: u32,
    norms: RadialNorms,
}

/// Reusable buffers for [`BasisEvaluator`].
#[derive(Debug, Clone)]
pub struct BasisScratch {
    radial: RadialTable,
    angular: S2HarmonicTable,
}

impl BasisEvaluator {
    pub fn new(n_max: u32) -> Self {
        Self { n_max, norms: RadialNorms::new(n_max) }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn norms(&self) -> &RadialNorms {
        &self.norms
    }

    pub fn scratch(&self) -> BasisScratch {
        BasisScratch {
            radial: RadialTable::new(self.n_max),
            angular: S2HarmonicTable::new(self.n_max),
        }
    }

    /// Calls `f(linear_index, W_α, ∇W_α)` for every label in linear order.
    pub fn for_each(&self, x: R3Point, scratch: &mut BasisScratch, mut f: impl FnMut(usize, f64, Vec3)) {
        let r2 = x.norm_sq();
        let one_minus = 2.0 / (r2 + 1.0);
        let root = one_minus.sqrt();
        let p = stereo_inverse(x);
        let (s_chi, c_chi) = p.chi.sin_cos();
        let (s_th, c_th) = p.theta.sin_cos();
        scratch.radial.fill(&self.norms, c_chi, s_chi.abs());
        scratch.angular.fill_trig(p.phi, c_th, s_th.abs());
        let [e_r, e_t, e_p] = spherical_frame(p.phi, p.theta);
        let layout = self.norms.layout();
        let (rad, ang) = (&scratch.radial, &scratch.angular);
        let mut idx = 0;
        for k in 0..=self.n_max {
            for l in 0..=k {
                let ri = layout.index(k, l);
                let (rv, ro, rd) = (rad.value[ri], rad.over_sin[ri], rad.d_chi[ri]);
                for m in -(l as i32)..=(l as i32) {
                    let ai = lm_index(l, m);
                    let g = ang.value[ai];
                    let y = rv * g;
                    let d_phi = ro * ang.d_phi_sin[ai];
                    let d_theta = ro * ang.d_theta[ai];
                    let d_chi = rd * g;
                    let mut grad = [0.0; 3];
                    for i in 0..3 {
                        let v = one_minus * (e_p[i] * d_phi + e_t[i] * d_theta - e_r[i] * d_chi);
                        grad[i] = root * (v - 0.5 * y * p.xi[i]);
                    }
                    f(idx, root * y, grad);
                    idx += 1;
                }
            }
        }
    }

    /// All `W_α(x)` in linear order.
    pub fn values(&self, x: R3Point) -> Vec<f64> {
        let mut out = vec![0.0; MultiIndex::count_up_to(self.n_max)];
        let mut scratch = self.scratch();
        self.for_each(x, &mut scratch, |i, w, _| out[i] = w);
        out
    }

    /// All `(W_α(x), ∇W_α(x))` in linear order.
    pub fn samples(&self, x: R3Point) -> Vec<GradientSample> {
        let mut out = vec![GradientSample { w: 0.0, grad: [0.0; 3] }; MultiIndex::count_up_to(self.n_max)];
        let mut scratch = self.scratch();
        self.for_each(x, &mut scratch, |i, w, grad| out[i] = GradientSample { w, grad });
        out
    }
}

/// An explicit rational expression of one low-degree basis function.
#[derive(Debug, Clone, Copy)]
pub struct ClosedForm {
    pub alpha: MultiIndex,
    pub formula: &'static str,
    pub eval: fn(Vec3) -> f64,
}

const fn mi(k: u32, l: u32, m: i32) -> MultiIndex {
    MultiIndex { k, l, m }
}

fn q(x: Vec3) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 1.0
}

const INV_PI: f64 = std::f64::consts::FRAC_1_PI;
const SQRT_6: f64 = 2.449_489_742_783_178;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// The fourteen functions with `k <= 2` written out explicitly.
pub const CLOSED_FORMS: [ClosedForm; 14] = [
    ClosedForm { alpha: mi(0, 0, 0), formula: "1/(pi (|x|^2+1)^(1/2))", eval: |x| INV_PI / q(x).sqrt() },
    ClosedForm {
        alpha: mi(1, 0, 0),
        formula: "(2/pi) (|x|^2-1)/(|x|^2+1)^(3/2)",
        eval: |x| 2.0 * INV_PI * (q(x) - 2.0) / q(x).powf(1.5),
    },
    ClosedForm { alpha: mi(1, 1, 0), formula: "(4/pi) x3/(|x|^2+1)^(3/2)", eval: |x| 4.0 * INV_PI * x[2] / q(x).powf(1.5) },
    ClosedForm { alpha: mi(1, 1, 1), formula: "(4/pi) x1/(|x|^2+1)^(3/2)", eval: |x| 4.0 * INV_PI * x[0] / q(x).powf(1.5) },
    ClosedForm { alpha: mi(1, 1, -1), formula: "(4/pi) x2/(|x|^2+1)^(3/2)", eval: |x| 4.0 * INV_PI * x[1] / q(x).powf(1.5) },
    ClosedForm {
        alpha: mi(2, 0, 0),
        formula: "(1/pi) (3|x|^4-10|x|^2+3)/(|x|^2+1)^(5/2)",
        eval: |x| {
            let r2 = q(x) - 1.0;
            INV_PI * (3.0 * r2 * r2 - 10.0 * r2 + 3.0) / q(x).powf(2.5)
        },
    },
    ClosedForm {
        alpha: mi(2, 1, 0),
        formula: "(4 sqrt6/pi) x3 (|x|^2-1)/(|x|^2+1)^(5/2)",
        eval: |x| 4.0 * SQRT_6 * INV_PI * x[2] * (q(x) - 2.0) / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 1, 1),
        formula: "(4 sqrt6/pi) x1 (|x|^2-1)/(|x|^2+1)^(5/2)",
        eval: |x| 4.0 * SQRT_6 * INV_PI * x[0] * (q(x) - 2.0) / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 1, -1),
        formula: "(4 sqrt6/pi) x2 (|x|^2-1)/(|x|^2+1)^(5/2)",
        eval: |x| 4.0 * SQRT_6 * INV_PI * x[1] * (q(x) - 2.0) / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 2, 0),
        formula: "(4 sqrt2/pi) (3 x3^2 - |x|^2)/(|x|^2+1)^(5/2)",
        eval: |x| 4.0 * SQRT_2 * INV_PI * (3.0 * x[2] * x[2] - (q(x) - 1.0)) / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 2, 1),
        formula: "(8 sqrt6/pi) x1 x3/(|x|^2+1)^(5/2)",
        eval: |x| 8.0 * SQRT_6 * INV_PI * x[0] * x[2] / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 2, 2),
        formula: "(4 sqrt6/pi) (x1^2 - x2^2)/(|x|^2+1)^(5/2)",
        eval: |x| 4.0 * SQRT_6 * INV_PI * (x[0] * x[0] - x[1] * x[1]) / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 2, -1),
        formula: "(8 sqrt6/pi) x2 x3/(|x|^2+1)^(5/2)",
        eval: |x| 8.0 * SQRT_6 * INV_PI * x[1] * x[2] / q(x).powf(2.5),
    },
    ClosedForm {
        alpha: mi(2, 2, -2),
        formula: "(8 sqrt6/pi) x1 x2/(|x|^2+1)^(5/2)",
        eval: |x| 8.0 * SQRT_6 * INV_PI * x[0] * x[1] / q(x).powf(2.5),
    },
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn stereo_examples() {
        let p = stereo_inverse(R3Point([0.0, 0.0, 0.0]));
        assert_eq!(p.xi, [0.0, 0.0, 0.0, -1.0]);
        let p = stereo_inverse(R3Point([1.0, 0.0, 0.0]));
        assert_eq!(p.xi, [1.0, 0.0, 0.0, 0.0]);
        let p = stereo_inverse(R3Point([0.0, 0.0, 2.0]));
        assert_abs_diff_eq!(p.xi[2], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(p.xi[3], 0.6, epsilon = 1e-15);

        let back = |xi: [f64; 4]| stereo_forward(&S3Point::from_cartesian(xi));
        assert_eq!(back([0.0, 0.0, 0.0, -1.0]).unwrap().0, [0.0; 3]);
        assert_eq!(back([1.0, 0.0, 0.0, 0.0]).unwrap().0, [1.0, 0.0, 0.0]);
        assert!(matches!(back([0.0, 0.0, 0.0, 1.0 - 1e-15]), Err(ProjectionError::NorthPole(_))));
    }

    #[test]
    fn w_alpha_examples() {
        let w = w_alpha(mi(0, 0, 0), R3Point([0.0; 3]));
        assert_abs_diff_eq!(w, 1.0 / PI, epsilon = 1e-15);
        let w = w_alpha(mi(1, 1, 0), R3Point([0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(w, 4.0 / PI / 2f64.powf(1.5), epsilon = 1e-14);
        let w = w_alpha(mi(2, 2, -2), R3Point([1.0, 1.0, 0.0]));
        assert_abs_diff_eq!(w, 8.0 * 6f64.sqrt() / PI / 3f64.powf(2.5), epsilon = 1e-14);
    }

    #[test]
    fn closed_forms_match_on_a_grid() {
        for cf in CLOSED_FORMS.iter() {
            for i in 0..5 {
                for j in 0..5 {
                    let x = [-2.0 + i as f64, 0.3 * j as f64 - 0.6, 0.5 * (i + j) as f64 - 1.7];
                    let v = w_alpha(cf.alpha, R3Point(x));
                    assert_abs_diff_eq!(v, (cf.eval)(x), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let g = grad_w_alpha(mi(0, 0, 0), R3Point([0.0; 3]));
        assert_abs_diff_eq!(g.grad[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.grad[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.grad[2], 0.0, epsilon = 1e-15);
        let g = grad_w_alpha(mi(1, 1, 1), R3Point([0.0; 3]));
        assert_abs_diff_eq!(g.grad[0], 4.0 / PI, epsilon = 1e-14);
        assert_abs_diff_eq!(g.grad[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.grad[2], 0.0, epsilon = 1e-14);
    }

    fn fd_grad(alpha: MultiIndex, x: Vec3, h: f64) -> Vec3 {
        let mut g = [0.0; 3];
        for i in 0..3 {
            let (mut a, mut b) = (x, x);
            a[i] += h;
            b[i] -= h;
            g[i] = (w_alpha(alpha, R3Point(a)) - w_alpha(alpha, R3Point(b))) / (2.0 * h);
        }
        g
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts = [[0.4, -0.2, 0.7], [0.0, 0.0, 0.3], [0.0, 0.0, -1.4], [1.2, 0.5, -0.1], [0.05, -0.02, 0.01]];
        for alpha in MultiIndex::up_to_degree(6) {
            for x in pts {
                let g = grad_w_alpha(alpha, R3Point(x)).grad;
                let fd = fd_grad(alpha, x, 1e-5);
                let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
                for i in 0..3 {
                    assert!((g[i] - fd[i]).abs() <= 1e-6 * scale.max(1.0), "{alpha} at {x:?}: {g:?} vs {fd:?}");
                }
            }
        }
    }

    #[test]
    fn batched_evaluator_matches_pointwise() {
        let eval = BasisEvaluator::new(6);
        for x in [[0.3, -0.4, 0.2], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0], [-3.0, 1.0, 0.5]] {
            let samples = eval.samples(R3Point(x));
            for (i, alpha) in MultiIndex::up_to_degree(6).enumerate() {
                let single = grad_w_alpha(alpha, R3Point(x));
                assert_abs_diff_eq!(samples[i].w, single.w, epsilon = 1e-13);
                for c in 0..3 {
                    assert_abs_diff_eq!(samples[i].grad[c], single.grad[c], epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn decay_times_radius_levels_off() {
        let dirs = [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.48, 0.6, 0.64], [0.0, 0.0, 1.0], [-0.36, 0.48, 0.8]];
        let sup = |alpha: MultiIndex, r: f64| {
            dirs.iter()
                .map(|d| w_alpha(alpha, R3Point([r * d[0], r * d[1], r * d[2]])).abs() * r)
                .fold(0.0, f64::max)
        };
        // l = 0 functions tend to a nonzero multiple of 1/|x|.
        for alpha in [mi(0, 0, 0), mi(2, 0, 0), mi(5, 0, 0)] {
            let (b, c) = (sup(alpha, 100.0), sup(alpha, 1000.0));
            assert!(c > 0.0);
            assert!(((b - c) / c).abs() < 0.05, "{alpha}: {b} {c}");
        }
        // l >= 1 functions decay faster, so |x| W_α stays bounded and shrinks.
        for alpha in [mi(2, 1, 0), mi(3, 3, -2), mi(4, 2, 1)] {
            let (a, b, c) = (sup(alpha, 10.0), sup(alpha, 100.0), sup(alpha, 1000.0));
            assert!(c <= b && b <= a, "{alpha}: {a} {b} {c}");
        }
    }
}
