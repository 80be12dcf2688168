//! Sample domains, quadrature rules over them and the coefficient integrals
//! `c_α = ∫_Ω M·∇W_α dx`.

mod cloud;
mod coefficients;
mod field;

use std::f64::consts::PI;

use thiserror::Error;

use crate::abbasis::Vec3;

pub use cloud::{read_cloud_csv, read_cloud_from_reader, CloudError, CloudNode};
pub use coefficients::{coefficient, compute_coefficients, compute_coefficients_scattered, Execution};
pub use field::{ConstantField, FieldError, FnField, MagnetizationField, SampledField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("ball radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("box bounds must satisfy lo < hi componentwise, got lo={lo:?} hi={hi:?}")]
    DegenerateBox { lo: Vec3, hi: Vec3 },
    #[error("node cloud is empty")]
    EmptyCloud,
    #[error("cloud node {index} has negative or non-finite weight {weight}")]
    BadWeight { index: usize, weight: f64 },
    #[error("cloud node {index} has non-finite coordinates")]
    BadNode { index: usize },
    #[error("{what} needs at least {min} nodes, got {got}")]
    TooFewNodes { what: &'static str, min: usize, got: usize },
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Geometry of the magnetized sample.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleDomain {
    Ball { center: Vec3, radius: f64 },
    Box { lo: Vec3, hi: Vec3 },
    Cloud { nodes: Vec<CloudNode> },
}

impl SampleDomain {
    pub fn ball(center: Vec3, radius: f64) -> Result<Self, DomainError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(DomainError::BadRadius(radius));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn cuboid(lo: Vec3, hi: Vec3) -> Result<Self, DomainError> {
        if (0..3).any(|i| lo[i] >= hi[i] || !lo[i].is_finite() || !hi[i].is_finite()) {
            return Err(DomainError::DegenerateBox { lo, hi });
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn cloud(nodes: Vec<CloudNode>) -> Result<Self, DomainError> {
        if nodes.is_empty() {
            return Err(DomainError::EmptyCloud);
        }
        for (index, n) in nodes.iter().enumerate() {
            if !(n.weight >= 0.0 && n.weight.is_finite()) {
                return Err(DomainError::BadWeight { index, weight: n.weight });
            }
            if n.x.iter().any(|v| !v.is_finite()) {
                return Err(DomainError::BadNode { index });
            }
        }
        Ok(Self::Cloud { nodes })
    }

    /// Analytic volume for balls and boxes, weight sum for clouds.
    pub fn volume(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Self::Box { lo, hi } => (0..3).map(|i| hi[i] - lo[i]).product(),
            Self::Cloud { nodes } => nodes.iter().map(|n| n.weight).sum(),
        }
    }

    pub fn contains(&self, x: Vec3) -> bool {
        match self {
            Self::Ball { center, radius } => {
                (0..3).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>() < radius * radius
            }
            Self::Box { lo, hi } => (0..3).all(|i| lo[i] < x[i] && x[i] < hi[i]),
            Self::Cloud { .. } => false,
        }
    }
}

/// Product structure of a ball rule centered at the origin, used to factor
/// the coefficient sums by radius, polar angle and azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGrid {
    pub radius: f64,
    /// `(r, w)` with the `r²` Jacobian already folded into `w`.
    pub radial: Vec<(f64, f64)>,
    /// `(cos θ, w)`.
    pub polar: Vec<(f64, f64)>,
    pub n_phi: usize,
}

impl SphericalGrid {
    pub fn phi(&self, p: usize) -> f64 {
        2.0 * PI * p as f64 / self.n_phi as f64
    }

    pub fn phi_weight(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }
}

/// How the nodes of a rule are organized.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleLayout {
    Scattered,
    Spherical(SphericalGrid),
}

/// Nodes and positive weights over a sample domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Per-axis polynomial exactness (0 when unknown, as for clouds).
    pub order: usize,
    pub layout: RuleLayout,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().copied().collect::<crate::sum::CompensatedSum>().value()
    }

    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .collect::<crate::sum::CompensatedSum>()
            .value()
    }

    /// The same nodes with the product structure forgotten.
    pub fn scattered(&self) -> QuadratureRule {
        QuadratureRule { layout: RuleLayout::Scattered, ..self.clone() }
    }
}

/// Tensor-product Gauss–Legendre rule on an axis-aligned box.
pub fn build_box_rule(domain: &SampleDomain, n_per_axis: usize) -> Result<QuadratureRule, DomainError> {
    let SampleDomain::Box { lo, hi } = domain else {
        panic!("build_box_rule called with a non-box domain");
    };
    let domain = SampleDomain::cuboid(*lo, *hi)?;
    let SampleDomain::Box { lo, hi } = domain else { unreachable!() };
    if n_per_axis < 2 {
        return Err(DomainError::TooFewNodes { what: "box rule", min: 2, got: n_per_axis });
    }
    let (t, w) = gauss_legendre(n_per_axis);
    let axis = |i: usize| -> Vec<(f64, f64)> {
        let half = 0.5 * (hi[i] - lo[i]);
        let mid = 0.5 * (hi[i] + lo[i]);
        t.iter().zip(&w).map(|(t, w)| (mid + half * t, half * w)).collect()
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    let mut nodes = Vec::with_capacity(n_per_axis.pow(3));
    let mut weights = Vec::with_capacity(n_per_axis.pow(3));
    for (x, wx) in &ax {
        for (y, wy) in &ay {
            for (z, wz) in &az {
                nodes.push([*x, *y, *z]);
                weights.push(wx * wy * wz);
            }
        }
    }
    Ok(QuadratureRule { nodes, weights, order: 2 * n_per_axis - 1, layout: RuleLayout::Scattered })
}

/// Product rule on a ball: Gauss–Legendre in `r` (with `r²` weight), in
/// `cos θ`, and a uniform trapezoid in `φ`. No node sits at the center.
pub fn build_ball_rule(
    domain: &SampleDomain,
    n_radial: usize,
    n_theta: usize,
    n_phi: usize,
) -> Result<QuadratureRule, DomainError> {
    let SampleDomain::Ball { center, radius } = domain else {
        panic!("build_ball_rule called with a non-ball domain");
    };
    let (center, radius) = (*center, *radius);
    SampleDomain::ball(center, radius)?;
    for (what, n) in [("radial count", n_radial), ("polar count", n_theta), ("azimuthal count", n_phi)] {
        if n < 2 {
            return Err(DomainError::TooFewNodes { what, min: 2, got: n });
        }
    }
    let (rt, rw) = gauss_legendre(n_radial);
    let radial: Vec<(f64, f64)> = rt
        .iter()
        .zip(&rw)
        .map(|(t, w)| {
            let r = 0.5 * radius * (1.0 + t);
            (r, 0.5 * radius * w * r * r)
        })
        .collect();
    let (tt, tw) = gauss_legendre(n_theta);
    let polar: Vec<(f64, f64)> = tt.into_iter().zip(tw).collect();
    let grid = SphericalGrid { radius, radial, polar, n_phi };
    let mut nodes = Vec::with_capacity(n_radial * n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_radial * n_theta * n_phi);
    let wp = grid.phi_weight();
    for &(r, wr) in &grid.radial {
        for &(t, wt) in &grid.polar {
            let s = ((1.0 - t) * (1.0 + t)).sqrt();
            for p in 0..n_phi {
                let (sp, cp) = grid.phi(p).sin_cos();
                nodes.push([center[0] + r * s * cp, center[1] + r * s * sp, center[2] + r * t]);
                weights.push(wr * wt * wp);
            }
        }
    }
    let layout = if center == [0.0; 3] { RuleLayout::Spherical(grid) } else { RuleLayout::Scattered };
    let order = (2 * n_radial - 1).min(2 * n_theta - 1).min(n_phi - 1);
    Ok(QuadratureRule { nodes, weights, order, layout })
}

/// Rule made of the nodes and weights of a cloud.
pub fn build_cloud_rule(domain: &SampleDomain) -> Result<QuadratureRule, DomainError> {
    let SampleDomain::Cloud { nodes } = domain else {
        panic!("build_cloud_rule called with a non-cloud domain");
    };
    SampleDomain::cloud(nodes.clone())?;
    Ok(QuadratureRule {
        nodes: nodes.iter().map(|n| n.x).collect(),
        weights: nodes.iter().map(|n| n.weight).collect(),
        order: 0,
        layout: RuleLayout::Scattered,
    })
}

/// Node counts used for a degree-`n` run. Explicit overrides win.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ResolutionPolicy {
    pub radial: Option<usize>,
    pub theta: Option<usize>,
    pub phi: Option<usize>,
    pub axis: Option<usize>,
}

impl ResolutionPolicy {
    /// `max(2(n+1) + 8, 24)` nodes per direction.
    pub fn per_axis(n: u32) -> usize {
        (2 * (n as usize + 1) + 8).max(24)
    }

    /// Per-axis count for box rules, `max(⌈n/2⌉ + 20, 24)`.
    pub fn box_per_axis(n: u32) -> usize {
        (n.div_ceil(2) as usize + 20).max(24)
    }

    pub fn ball_counts(&self, n: u32) -> (usize, usize, usize) {
        let d = Self::per_axis(n);
        (self.radial.unwrap_or(d), self.theta.unwrap_or(d), self.phi.unwrap_or(d))
    }

    pub fn box_count(&self, n: u32) -> usize {
        self.axis.unwrap_or_else(|| Self::box_per_axis(n))
    }

    /// Builds the rule this policy prescribes for `domain` at degree `n`.
    pub fn rule_for(&self, domain: &SampleDomain, n: u32) -> Result<QuadratureRule, DomainError> {
        match domain {
            SampleDomain::Ball { .. } => {
                let (r, t, p) = self.ball_counts(n);
                build_ball_rule(domain, r, t, p)
            }
            SampleDomain::Box { .. } => build_box_rule(domain, self.box_count(n)),
            SampleDomain::Cloud { .. } => build_cloud_rule(domain),
        }
    }

    /// The same policy with every count doubled (used by refinement checks).
    pub fn doubled(&self, n: u32) -> Self {
        let (r, t, p) = self.ball_counts(n);
        Self { radial: Some(2 * r), theta: Some(2 * t), phi: Some(2 * p), axis: Some(2 * self.box_count(n)) }
    }
}
