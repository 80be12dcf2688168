//! Truncated energy, potential and stray field from the coefficients
//! `c_α = ∫_Ω M·∇W_α dx`.
//!
//! The Galerkin system in the basis `W_α` is diagonal, `D X = B`, with
//! `B_α = c_α` and `D = diag(((2k+1)(2k+3))/4)`. So `U_N = Σ X_α W_α` and
//! `E_N = (μ₀/2) Σ |X_α|² (2k+1)(2k+3)/4 = Σ 2μ₀ c_α² / ((2k+1)(2k+3))`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abbasis::{BasisEvaluator, R3Point, Vec3};
use crate::quadrature::{compute_coefficients, Execution, FieldError, MagnetizationField, QuadratureRule};
use crate::s3harm::MultiIndex;
use crate::sum::CompensatedSum;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("degree {n} exceeds the table degree {n_max}")]
    DegreeOutOfRange { n: u32, n_max: u32 },
    #[error("table of degree {n_max} needs {expected} coefficients, got {got}")]
    CountMismatch { n_max: u32, expected: usize, got: usize },
    #[error("mu0 must be positive and finite, got {0}")]
    BadMu0(f64),
    #[error("exact energy must be positive, got {0}")]
    NonPositiveExactEnergy(f64),
    #[error("coefficient {0} is not a valid label for this table")]
    InvalidEntry(String),
    #[error("coefficient {0} appears more than once")]
    DuplicateEntry(MultiIndex),
    #[error("coefficient {0} is not finite")]
    NonFinite(MultiIndex),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("malformed coefficient JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// `(2k+1)(2k+3)`, which also equals `4(k+1)² - 1`.
#[inline]
pub fn degree_denominator(k: u32) -> f64 {
    let k = k as f64;
    (2.0 * k + 1.0) * (2.0 * k + 3.0)
}

/// All coefficients `c_α` for `α ∈ Λ*_{n_max}`, in linear order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    n_max: u32,
    mu0: f64,
    coeffs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    k: u32,
    l: u32,
    m: i32,
    c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableFile {
    n_max: u32,
    mu0: f64,
    coeffs: Vec<Entry>,
}

impl CoefficientTable {
    pub fn new(n_max: u32, mu0: f64, coeffs: Vec<f64>) -> Result<Self, SolverError> {
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(SolverError::BadMu0(mu0));
        }
        let expected = MultiIndex::count_up_to(n_max);
        if coeffs.len() != expected {
            return Err(SolverError::CountMismatch { n_max, expected, got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SolverError::NonFinite(MultiIndex::from_linear_index(i)));
        }
        Ok(Self { n_max, mu0, coeffs })
    }

    pub fn zeros(n_max: u32, mu0: f64) -> Result<Self, SolverError> {
        Self::new(n_max, mu0, vec![0.0; MultiIndex::count_up_to(n_max)])
    }

    /// Integrates `M·∇W_α` with `rule` for every label up to `n_max`.
    pub fn from_field(
        n_max: u32,
        mu0: f64,
        field: &dyn MagnetizationField,
        rule: &QuadratureRule,
        exec: Execution,
    ) -> Result<Self, SolverError> {
        let coeffs = compute_coefficients(n_max, field, rule, exec)?;
        Self::new(n_max, mu0, coeffs)
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, alpha: MultiIndex) -> Option<f64> {
        (alpha.k <= self.n_max).then(|| self.coeffs[alpha.linear_index()])
    }

    /// The same coefficients truncated to degree `n`.
    pub fn truncated(&self, n: u32) -> Result<Self, SolverError> {
        self.check_degree(n)?;
        Ok(Self { n_max: n, mu0: self.mu0, coeffs: self.coeffs[..MultiIndex::count_up_to(n)].to_vec() })
    }

    fn check_degree(&self, n: u32) -> Result<(), SolverError> {
        if n > self.n_max {
            Err(SolverError::DegreeOutOfRange { n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            n_max: self.n_max,
            mu0: self.mu0,
            coeffs: MultiIndex::up_to_degree(self.n_max)
                .zip(&self.coeffs)
                .map(|(a, c)| Entry { k: a.k, l: a.l, m: a.m, c: *c })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("coefficient tables always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        let file: TableFile = serde_json::from_str(text)?;
        let n = MultiIndex::count_up_to(file.n_max);
        let mut coeffs = vec![None; n];
        for e in &file.coeffs {
            let alpha = MultiIndex::new(e.k, e.l, e.m)
                .ok()
                .filter(|a| a.k <= file.n_max)
                .ok_or_else(|| SolverError::InvalidEntry(format!("({}, {}, {})", e.k, e.l, e.m)))?;
            let slot = &mut coeffs[alpha.linear_index()];
            if slot.is_some() {
                return Err(SolverError::DuplicateEntry(alpha));
            }
            *slot = Some(e.c);
        }
        let got = coeffs.iter().filter(|c| c.is_some()).count();
        if got != n {
            return Err(SolverError::CountMismatch { n_max: file.n_max, expected: n, got });
        }
        Self::new(file.n_max, file.mu0, coeffs.into_iter().map(|c| c.unwrap_or_default()).collect())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), SolverError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| SolverError::Io { path: path.display().to_string(), source })
    }

    pub fn read_json(path: &Path) -> Result<Self, SolverError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SolverError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}

/// Per-degree energy contributions and their running sums `E_0, …, E_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub per_degree: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl EnergyBreakdown {
    pub fn new(table: &CoefficientTable) -> Self {
        Self::up_to(table, table.n_max)
    }

    fn up_to(table: &CoefficientTable, n: u32) -> Self {
        let mut per_degree = Vec::with_capacity(n as usize + 1);
        let mut cumulative = Vec::with_capacity(n as usize + 1);
        let mut running = CompensatedSum::new();
        for k in 0..=n {
            let start = MultiIndex::degree_offset(k);
            let end = MultiIndex::degree_offset(k + 1);
            let sq: CompensatedSum = table.coeffs[start..end].iter().map(|c| c * c).collect();
            let e = 2.0 * table.mu0 / degree_denominator(k) * sq.value();
            per_degree.push(e);
            running.add(e);
            cumulative.push(running.value());
        }
        Self { per_degree, cumulative }
    }
}

/// `E_N = Σ_{k ≤ N} 2μ₀/((2k+1)(2k+3)) Σ_{α ∈ Λ_k} c_α²`.
pub fn energy(table: &CoefficientTable, n: u32) -> Result<f64, SolverError> {
    table.check_degree(n)?;
    Ok(EnergyBreakdown::up_to(table, n).cumulative[n as usize])
}

/// `E - E_N`, `(E - E_N)/E` and the relative stray-field error
/// `e₀ = sqrt(max(E - E_N, 0)/E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    pub abs_err: f64,
    pub rel_err: f64,
    pub e0: f64,
}

pub fn energy_error_split(table: &CoefficientTable, exact_energy: f64, n: u32) -> Result<ErrorSplit, SolverError> {
    let e_n = energy(table, n)?;
    error_split(exact_energy, e_n)
}

/// [`energy_error_split`] for an already computed `E_N`.
pub fn error_split(exact_energy: f64, e_n: f64) -> Result<ErrorSplit, SolverError> {
    if !(exact_energy > 0.0 && exact_energy.is_finite()) {
        return Err(SolverError::NonPositiveExactEnergy(exact_energy));
    }
    let abs_err = exact_energy - e_n;
    let rel_err = abs_err / exact_energy;
    Ok(ErrorSplit { abs_err, rel_err, e0: (abs_err.max(0.0) / exact_energy).sqrt() })
}

/// The Galerkin system `D X = B` with diagonal `D`, stored as the inverse
/// diagonal so that `X = D⁻¹ B` is one multiplication per label.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSystem {
    /// `4/((2k+1)(2k+3))` per label.
    pub inverse_diagonal: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl DiagonalSystem {
    pub fn assemble(table: &CoefficientTable, n: u32) -> Result<Self, SolverError> {
        table.check_degree(n)?;
        let len = MultiIndex::count_up_to(n);
        let mut inverse_diagonal = Vec::with_capacity(len);
        for k in 0..=n {
            let d = 4.0 / degree_denominator(k);
            inverse_diagonal.extend(std::iter::repeat_n(d, ((k + 1) * (k + 1)) as usize));
        }
        Ok(Self { inverse_diagonal, rhs: table.coeffs[..len].to_vec() })
    }

    /// The diagonal entries `(2k+1)(2k+3)/4 = ∫|∇W_α|²`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.inverse_diagonal.iter().map(|d| 1.0 / d).collect()
    }

    pub fn solve(&self) -> Vec<f64> {
        self.inverse_diagonal.iter().zip(&self.rhs).map(|(d, b)| d * b).collect()
    }
}

/// Evaluates `U_N` and `H_N = -∇U_N` at arbitrary points.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    basis: BasisEvaluator,
    x: Vec<f64>,
}

impl SeriesEvaluator {
    pub fn new(table: &CoefficientTable, n: u32) -> Result<Self, SolverError> {
        let x = DiagonalSystem::assemble(table, n)?.solve();
        Ok(Self { basis: BasisEvaluator::new(n), x })
    }

    pub fn potential(&self, x: Vec3) -> f64 {
        let mut scratch = self.basis.scratch();
        let mut acc = CompensatedSum::new();
        self.basis.for_each(R3Point(x), &mut scratch, |i, w, _| acc.add(self.x[i] * w));
        acc.value()
    }

    pub fn strayfield(&self, x: Vec3) -> Vec3 {
        let mut scratch = self.basis.scratch();
        let mut acc = [CompensatedSum::new(); 3];
        self.basis.for_each(R3Point(x), &mut scratch, |i, _, g| {
            for d in 0..3 {
                acc[d].add(-self.x[i] * g[d]);
            }
        });
        acc.map(|a| a.value())
    }
}

/// `U_N(x) = Σ_{k ≤ N} 4/((2k+1)(2k+3)) Σ_{α ∈ Λ_k} c_α W_α(x)`.
pub fn potential_eval(table: &CoefficientTable, n: u32, x: Vec3) -> Result<f64, SolverError> {
    Ok(SeriesEvaluator::new(table, n)?.potential(x))
}

/// `H_N(x) = -∇U_N(x)`.
pub fn strayfield_eval(table: &CoefficientTable, n: u32, x: Vec3) -> Result<Vec3, SolverError> {
    Ok(SeriesEvaluator::new(table, n)?.strayfield(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_at(n_max: u32, alpha: MultiIndex) -> CoefficientTable {
        let mut c = vec![0.0; MultiIndex::count_up_to(n_max)];
        c[alpha.linear_index()] = 1.0;
        CoefficientTable::new(n_max, 1.0, c).unwrap()
    }

    #[test]
    fn denominator_forms_agree() {
        for k in 0..=100u64 {
            assert_eq!(4 * (k + 1) * (k + 1) - 1, (2 * k + 1) * (2 * k + 3));
            assert_eq!(degree_denominator(k as u32), (4 * (k + 1) * (k + 1) - 1) as f64);
        }
    }

    #[test]
    fn energy_examples() {
        let zero = CoefficientTable::zeros(5, 1.0).unwrap();
        assert_eq!(energy(&zero, 5).unwrap(), 0.0);
        let t = unit_at(3, MultiIndex::new(0, 0, 0).unwrap());
        assert_abs_diff_eq!(energy(&t, 0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(energy(&t, 4), Err(SolverError::DegreeOutOfRange { n: 4, n_max: 3 })));
        let t2 = CoefficientTable::new(3, 2.5, t.coeffs().to_vec()).unwrap();
        assert_abs_diff_eq!(energy(&t2, 3).unwrap(), 2.5 * 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn breakdown_matches_energy_bitwise() {
        let c: Vec<f64> = (0..MultiIndex::count_up_to(6)).map(|i| ((i as f64) * 0.37).sin()).collect();
        let t = CoefficientTable::new(6, 1.0, c).unwrap();
        let b = EnergyBreakdown::new(&t);
        assert!(b.per_degree.iter().all(|e| *e >= 0.0));
        assert!(b.cumulative.windows(2).all(|w| w[0] <= w[1]));
        for n in 0..=6 {
            assert_eq!(b.cumulative[n as usize].to_bits(), energy(&t, n).unwrap().to_bits());
        }
    }

    #[test]
    fn error_split_examples() {
        let s = error_split(0.5, 0.5).unwrap();
        assert_eq!((s.abs_err, s.rel_err, s.e0), (0.0, 0.0, 0.0));
        let s = error_split(0.07757018, 0.07696625).unwrap();
        assert!((s.rel_err - 7.78e-3).abs() < 1e-5);
        assert!((s.e0 - 8.82e-2).abs() < 5e-5);
        let s = error_split(1.0 / 6.0, 0.15617466).unwrap();
        assert!((s.rel_err - 6.3e-2).abs() < 5e-4);
        assert!((s.e0 - 0.2499).abs() < 2e-3);
        assert!(matches!(error_split(0.0, 0.1), Err(SolverError::NonPositiveExactEnergy(_))));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let c: Vec<f64> = (0..MultiIndex::count_up_to(4)).map(|i| 1.0 / (3.0 + i as f64) - 1e-300 * i as f64).collect();
        let t = CoefficientTable::new(4, 0.7, c).unwrap();
        let back = CoefficientTable::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        assert!(t.coeffs().iter().zip(back.coeffs()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let bad = r#"{"n_max": 0, "mu0": 1.0, "coeffs": [{"k":0,"l":0,"m":0,"c":1.0},{"k":0,"l":0,"m":0,"c":1.0}]}"#;
        assert!(matches!(CoefficientTable::from_json(bad), Err(SolverError::DuplicateEntry(_))));
        let bad = r#"{"n_max": 1, "mu0": 1.0, "coeffs": [{"k":0,"l":0,"m":0,"c":1.0}]}"#;
        assert!(matches!(CoefficientTable::from_json(bad), Err(SolverError::CountMismatch { .. })));
        let bad = r#"{"n_max": 1, "mu0": 1.0, "coeffs": [{"k":1,"l":2,"m":0,"c":1.0}]}"#;
        assert!(matches!(CoefficientTable::from_json(bad), Err(SolverError::InvalidEntry(_))));
    }

    #[test]
    fn diagonal_system_matches_series_scaling() {
        let c: Vec<f64> = (0..MultiIndex::count_up_to(3)).map(|i| i as f64 - 4.0).collect();
        let t = CoefficientTable::new(3, 1.0, c).unwrap();
        let sys = DiagonalSystem::assemble(&t, 3).unwrap();
        let x = sys.solve();
        let d = sys.diagonal();
        for (i, a) in MultiIndex::up_to_degree(3).enumerate() {
            assert_eq!(x[i], 4.0 / degree_denominator(a.k) * t.coeffs()[i]);
            assert_abs_diff_eq!(d[i] * x[i], t.coeffs()[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_table_evaluates_to_zero() {
        let t = CoefficientTable::zeros(4, 1.0).unwrap();
        assert_eq!(potential_eval(&t, 4, [0.3, -0.2, 1.0]).unwrap(), 0.0);
        assert_eq!(strayfield_eval(&t, 4, [0.3, -0.2, 1.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn field_is_minus_gradient_of_potential() {
        let c: Vec<f64> = (0..MultiIndex::count_up_to(5)).map(|i| ((i as f64) * 1.3).cos()).collect();
        let t = CoefficientTable::new(5, 1.0, c).unwrap();
        let ev = SeriesEvaluator::new(&t, 5).unwrap();
        let h = 1e-5;
        for x in [[0.3, -0.2, 0.9], [0.0, 0.0, 0.4], [-1.5, 2.0, 0.1]] {
            let f = ev.strayfield(x);
            for d in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[d] += h;
                xm[d] -= h;
                let fd = -(ev.potential(xp) - ev.potential(xm)) / (2.0 * h);
                assert!((f[d] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{x:?} {d}: {} vs {fd}", f[d]);
            }
        }
    }
}
