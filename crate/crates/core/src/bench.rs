//! Benchmark problems with known solutions and convergence studies on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbasis::Vec3;
use crate::quadrature::{ConstantField, DomainError, Execution, FnField, MagnetizationField, QuadratureRule, ResolutionPolicy, SampleDomain};
use crate::solver::{error_split, CoefficientTable, EnergyBreakdown, SolverError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown example {0}; expected 1, 2 or 3")]
    UnknownExample(u32),
    #[error("degree list is empty")]
    EmptyDegreeList,
    #[error("degree list must be strictly increasing, got {0:?}")]
    UnsortedDegrees(Vec<u32>),
    #[error("slope fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("slope fit got {ns} degrees but {errs} errors")]
    LengthMismatch { ns: usize, errs: usize },
    #[error("slope fit needs positive values, got {value} at N = {n}")]
    NonPositive { n: u32, value: f64 },
    #[error("{what}: {got} nodes cannot resolve degree {n}; at least {min} are needed")]
    InsufficientResolution { what: &'static str, n: u32, got: usize, min: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type ScalarFn = fn(Vec3) -> f64;
pub type VectorFn = fn(Vec3) -> Vec3;

/// A magnetized sample with known energy and, when available, the exact
/// potential and stray field.
pub struct BenchmarkCase {
    pub id: u32,
    pub name: &'static str,
    pub domain: SampleDomain,
    pub field: Box<dyn MagnetizationField>,
    pub exact_energy: f64,
    pub exact_potential: Option<ScalarFn>,
    pub exact_strayfield: Option<VectorFn>,
}

impl std::fmt::Debug for BenchmarkCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkCase")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact_energy", &self.exact_energy)
            .finish_non_exhaustive()
    }
}

/// Ball radius of examples 1 and 2.
pub const BALL_RADIUS: f64 = 0.5;
/// Half edge of the cube of example 3.
pub const CUBE_HALF_EDGE: f64 = 0.5;

/// `M = cos θ e_φ + sin θ e_θ` with `e_θ = (cos θ cos φ, cos θ sin φ, -sin θ)`
/// and `e_φ = (-sin φ, cos φ, 0)`.
pub fn example1_magnetization(x: Vec3) -> Vec3 {
    let rho = x[0].hypot(x[1]);
    let r = rho.hypot(x[2]);
    if r == 0.0 {
        return [0.0, 1.0, 0.0];
    }
    let (ct, st) = (x[2] / r, rho / r);
    let (cp, sp) = if rho > 0.0 { (x[0] / rho, x[1] / rho) } else { (1.0, 0.0) };
    [-ct * sp + st * ct * cp, ct * cp + st * ct * sp, -st * st]
}

pub fn example1_potential(x: Vec3) -> f64 {
    let r = norm(x);
    let z = x[2];
    if r <= BALL_RADIUS {
        if r == 0.0 {
            return 0.0;
        }
        -2.0 * z / 9.0 + 2.0 * z / 3.0 * (r / BALL_RADIUS).ln()
    } else {
        -2.0 * BALL_RADIUS.powi(3) * z / (9.0 * r.powi(3))
    }
}

pub fn example1_strayfield(x: Vec3) -> Vec3 {
    let r = norm(x);
    let z = x[2];
    let grad = if r <= BALL_RADIUS {
        let a = -2.0 / 9.0 + 2.0 / 3.0 * (r / BALL_RADIUS).ln();
        let b = 2.0 * z / (3.0 * r * r);
        [b * x[0], b * x[1], a + b * x[2]]
    } else {
        let c = -2.0 * BALL_RADIUS.powi(3) / 9.0;
        let r3 = r.powi(3);
        let r5 = r3 * r * r;
        [-3.0 * c * z * x[0] / r5, -3.0 * c * z * x[1] / r5, c / r3 - 3.0 * c * z * z / r5]
    };
    grad.map(|g| -g)
}

const EXAMPLE2_M: Vec3 = [0.0, 0.0, 1.0];

pub fn example2_potential(x: Vec3) -> f64 {
    let r = norm(x);
    let mx = dot(EXAMPLE2_M, x);
    if r < BALL_RADIUS {
        mx / 3.0
    } else {
        BALL_RADIUS.powi(3) / 3.0 * mx / r.powi(3)
    }
}

pub fn example2_strayfield(x: Vec3) -> Vec3 {
    let r = norm(x);
    if r < BALL_RADIUS {
        EXAMPLE2_M.map(|m| -m / 3.0)
    } else {
        let c = BALL_RADIUS.powi(3) / 3.0;
        let mx = dot(EXAMPLE2_M, x);
        let (r3, r5) = (r.powi(3), r.powi(5));
        let mut h = [0.0; 3];
        for i in 0..3 {
            h[i] = -c * (EXAMPLE2_M[i] / r3 - 3.0 * mx * x[i] / r5);
        }
        h
    }
}

/// Closed-form demagnetizing field of the cube `(-γ, γ)³` magnetized along
/// `e_y`, as a signed sum over the eight corners.
pub fn example3_strayfield(x: Vec3) -> Vec3 {
    let g = CUBE_HALF_EDGE;
    let mut h = [0.0; 3];
    for k in 1..=2 {
        for l in 1..=2 {
            for m in 1..=2 {
                let sign = if (k + l + m) % 2 == 0 { 1.0 } else { -1.0 };
                let a = x[0] + if k % 2 == 0 { g } else { -g };
                let b = x[1] + if l % 2 == 0 { g } else { -g };
                let c = x[2] + if m % 2 == 0 { g } else { -g };
                let rho = (a * a + b * b + c * c).sqrt();
                h[0] += sign * (c + rho).ln();
                h[1] -= sign * (a * c / (b * rho)).atan();
                h[2] += sign * (a + rho).ln();
            }
        }
    }
    h.map(|v| v / (4.0 * PI))
}

fn norm(x: Vec3) -> f64 {
    dot(x, x).sqrt()
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Ball of radius 1/2 with the tangential unit field
/// [`example1_magnetization`]; exact energy `(16/81) π r₀³ = 2π/81`.
pub fn case_example1() -> BenchmarkCase {
    BenchmarkCase {
        id: 1,
        name: "non-uniformly magnetized ball",
        domain: SampleDomain::ball([0.0; 3], BALL_RADIUS).expect("valid ball"),
        field: Box::new(FnField::new(example1_magnetization).with_unit_magnitude(true)),
        exact_energy: 16.0 / 81.0 * PI * BALL_RADIUS.powi(3),
        exact_potential: Some(example1_potential),
        exact_strayfield: Some(example1_strayfield),
    }
}

/// Ball of radius 1/2 with `M = (0, 0, 1)`; exact energy `2π r₀³/9 = π/36`.
pub fn case_example2() -> BenchmarkCase {
    BenchmarkCase {
        id: 2,
        name: "uniformly magnetized ball",
        domain: SampleDomain::ball([0.0; 3], BALL_RADIUS).expect("valid ball"),
        field: Box::new(ConstantField(EXAMPLE2_M)),
        exact_energy: 2.0 * PI * BALL_RADIUS.powi(3) / 9.0,
        exact_potential: Some(example2_potential),
        exact_strayfield: Some(example2_strayfield),
    }
}

/// Cube `(-1/2, 1/2)³` with `M = (0, 1, 0)`; exact energy `1/6`.
pub fn case_example3() -> BenchmarkCase {
    let g = CUBE_HALF_EDGE;
    BenchmarkCase {
        id: 3,
        name: "uniformly magnetized cube",
        domain: SampleDomain::cuboid([-g; 3], [g; 3]).expect("valid cube"),
        field: Box::new(ConstantField([0.0, 1.0, 0.0])),
        exact_energy: 1.0 / 6.0,
        exact_potential: None,
        exact_strayfield: Some(example3_strayfield),
    }
}

pub fn case(id: u32) -> Result<BenchmarkCase, BenchError> {
    match id {
        1 => Ok(case_example1()),
        2 => Ok(case_example2()),
        3 => Ok(case_example3()),
        other => Err(BenchError::UnknownExample(other)),
    }
}

/// One line of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub energy: f64,
    pub rel_energy_err: f64,
    pub e0: f64,
}

/// Result of [`run_convergence`]: the rows plus the coefficient table they
/// were computed from.
#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub rows: Vec<ConvergenceRow>,
    pub table: CoefficientTable,
    pub rule_size: usize,
}

/// Rejects rules that cannot integrate degree-`n` integrands at all.
pub fn check_resolution(domain: &SampleDomain, policy: &ResolutionPolicy, n: u32) -> Result<(), BenchError> {
    match domain {
        SampleDomain::Ball { .. } => {
            let (_, _, p) = policy.ball_counts(n);
            let min = 2 * n as usize + 2;
            if p < min {
                return Err(BenchError::InsufficientResolution { what: "azimuthal rule", n, got: p, min });
            }
        }
        SampleDomain::Box { .. } => {
            let a = policy.box_count(n);
            let min = n as usize / 2 + 1;
            if a < min {
                return Err(BenchError::InsufficientResolution { what: "box rule", n, got: a, min });
            }
        }
        SampleDomain::Cloud { .. } => {}
    }
    Ok(())
}

/// Computes one coefficient table at `max(ns)` and reads off `E_N` and its
/// errors for each requested `N`.
pub fn run_convergence(
    case: &BenchmarkCase,
    ns: &[u32],
    policy: &ResolutionPolicy,
    mu0: f64,
    exec: Execution,
) -> Result<ConvergenceRun, BenchError> {
    let n_max = check_degrees(ns)?;
    check_resolution(&case.domain, policy, n_max)?;
    let rule = policy.rule_for(&case.domain, n_max)?;
    let table = CoefficientTable::from_field(n_max, mu0, case.field.as_ref(), &rule, exec)?;
    let exact = case.exact_energy * mu0;
    let rows = rows_from_table(&table, exact, ns)?;
    Ok(ConvergenceRun { rows, table, rule_size: rule.len() })
}

fn check_degrees(ns: &[u32]) -> Result<u32, BenchError> {
    let last = *ns.last().ok_or(BenchError::EmptyDegreeList)?;
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::UnsortedDegrees(ns.to_vec()));
    }
    Ok(last)
}

/// Rows for each `N` in `ns` against an exact energy.
pub fn rows_from_table(table: &CoefficientTable, exact_energy: f64, ns: &[u32]) -> Result<Vec<ConvergenceRow>, BenchError> {
    let breakdown = EnergyBreakdown::new(table);
    ns.iter()
        .map(|&n| {
            let e = *breakdown
                .cumulative
                .get(n as usize)
                .ok_or(SolverError::DegreeOutOfRange { n, n_max: table.n_max() })?;
            let s = error_split(exact_energy, e)?;
            Ok(ConvergenceRow { n, energy: e, rel_energy_err: s.rel_err, e0: s.e0 })
        })
        .collect()
}

/// `(μ₀/2) ‖M‖²_{L²(Ω)}` by the given rule.
pub fn energy_upper_bound(field: &dyn MagnetizationField, rule: &QuadratureRule, mu0: f64) -> Result<f64, BenchError> {
    let mut acc = crate::sum::CompensatedSum::new();
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let m = field.at(*x).map_err(SolverError::from)?;
        acc.add(w * dot(m, m));
    }
    Ok(0.5 * mu0 * acc.value())
}

/// Least-squares slope of `log(err)` against `log(N)`.
pub fn fit_log_slope(ns: &[u32], errs: &[f64]) -> Result<f64, BenchError> {
    if ns.len() != errs.len() {
        return Err(BenchError::LengthMismatch { ns: ns.len(), errs: errs.len() });
    }
    if ns.len() < 3 {
        return Err(BenchError::TooFewPoints(ns.len()));
    }
    for (&n, &value) in ns.iter().zip(errs) {
        if !(value > 0.0 && value.is_finite()) || n == 0 {
            return Err(BenchError::NonPositive { n, value });
        }
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Published reference values for a benchmark: `(N, E_N, relative energy
/// error, e₀)` rows and the fitted slopes of the last two columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceTable {
    pub rows: &'static [(u32, f64, f64, f64)],
    pub energy_slope: f64,
    pub e0_slope: f64,
    /// Whether the `e₀` column is compared row by row.
    pub check_e0: bool,
}

pub const REFERENCE_DEGREES: [u32; 6] = [10, 20, 30, 40, 50, 60];

pub fn reference_table(id: u32) -> Result<ReferenceTable, BenchError> {
    match id {
        1 => Ok(ReferenceTable {
            rows: &[
                (10, 0.07696625, 7.78e-3, 8.82e-2),
                (20, 0.07750001, 9.03e-4, 3.00e-2),
                (30, 0.07754315, 3.48e-4, 1.86e-2),
                (40, 0.07756016, 1.29e-4, 1.13e-2),
                (50, 0.07756414, 7.79e-5, 8.82e-3),
                (60, 0.07756708, 4.00e-5, 6.32e-3),
            ],
            energy_slope: -2.90,
            e0_slope: -1.45,
            check_e0: true,
        }),
        2 => Ok(ReferenceTable {
            rows: &[
                (10, 0.07845252, 10.10e-2, 0.3153),
                (20, 0.08252939, 5.42e-2, 0.2322),
                (30, 0.08402011, 3.72e-2, 0.1924),
                (40, 0.08479348, 2.83e-2, 0.1680),
                (50, 0.08526692, 2.29e-2, 0.1511),
                (60, 0.08558669, 1.92e-2, 0.1385),
            ],
            energy_slope: -0.93,
            e0_slope: -0.46,
            check_e0: false,
        }),
        3 => Ok(ReferenceTable {
            rows: &[
                (10, 0.14711046, 0.1173, 0.3397),
                (20, 0.15617466, 6.3e-2, 0.2499),
                (30, 0.15951131, 4.2e-2, 0.2066),
                (40, 0.16123614, 3.2e-2, 0.180),
                (50, 0.16229007, 2.62e-2, 0.1618),
                (60, 0.16300181, 2.19e-2, 0.1481),
            ],
            energy_slope: -0.94,
            e0_slope: -0.47,
            check_e0: false,
        }),
        other => Err(BenchError::UnknownExample(other)),
    }
}

pub const ENERGY_TOLERANCE: f64 = 2e-5;
pub const E0_TOLERANCE: f64 = 2e-3;
pub const SLOPE_TOLERANCE: f64 = 0.15;

/// One comparison of a computed quantity with its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceCheck {
    pub quantity: String,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ToleranceCheck {
    fn new(quantity: String, computed: f64, reference: f64, tolerance: f64) -> Self {
        let pass = (computed - reference).abs() <= tolerance;
        Self { quantity, computed, reference, tolerance, pass }
    }
}

/// Slopes of the relative energy error and of `e₀` over the given rows.
pub fn convergence_slopes(rows: &[ConvergenceRow]) -> Result<(f64, f64), BenchError> {
    let ns: Vec<u32> = rows.iter().map(|r| r.n).collect();
    let rel: Vec<f64> = rows.iter().map(|r| r.rel_energy_err).collect();
    let e0: Vec<f64> = rows.iter().map(|r| r.e0).collect();
    Ok((fit_log_slope(&ns, &rel)?, fit_log_slope(&ns, &e0)?))
}

/// Compares rows against the reference values of example `id`. Rows at
/// degrees without a reference value are ignored; slopes are compared only
/// when every reference degree is present.
pub fn compare_with_reference(id: u32, rows: &[ConvergenceRow]) -> Result<Vec<ToleranceCheck>, BenchError> {
    let reference = reference_table(id)?;
    let mut checks = Vec::new();
    for &(n, e, _, e0) in reference.rows {
        if let Some(row) = rows.iter().find(|r| r.n == n) {
            checks.push(ToleranceCheck::new(format!("E_{n}"), row.energy, e, ENERGY_TOLERANCE));
            if reference.check_e0 {
                checks.push(ToleranceCheck::new(format!("e0_{n}"), row.e0, e0, E0_TOLERANCE));
            }
        }
    }
    let selected: Vec<ConvergenceRow> =
        REFERENCE_DEGREES.iter().filter_map(|n| rows.iter().find(|r| r.n == *n).copied()).collect();
    if selected.len() == REFERENCE_DEGREES.len() {
        let (s_rel, s_e0) = convergence_slopes(&selected)?;
        checks.push(ToleranceCheck::new("energy_slope".into(), s_rel, reference.energy_slope, SLOPE_TOLERANCE));
        checks.push(ToleranceCheck::new("e0_slope".into(), s_e0, reference.e0_slope, SLOPE_TOLERANCE));
    }
    Ok(checks)
}
