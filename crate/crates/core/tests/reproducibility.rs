//! Execution-mode independence and quadrature refinement.

use strayfield::bench::{self, BenchmarkCase};
use strayfield::quadrature::{compute_coefficients, ConstantField, Execution, ResolutionPolicy, SampleDomain};
use strayfield::solver::{energy, CoefficientTable};

fn energy_with(case: &BenchmarkCase, n: u32, policy: &ResolutionPolicy) -> f64 {
    let rule = policy.rule_for(&case.domain, n).unwrap();
    let table = CoefficientTable::from_field(n, 1.0, case.field.as_ref(), &rule, Execution::default()).unwrap();
    energy(&table, n).unwrap()
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let off_center = BenchmarkCase {
        id: 0,
        name: "shifted ball",
        domain: SampleDomain::ball([0.1, -0.2, 0.05], 0.4).unwrap(),
        field: Box::new(ConstantField([0.3, 0.0, 0.9])),
        exact_energy: 1.0,
        exact_potential: None,
        exact_strayfield: None,
    };
    for case in [bench::case_example1(), bench::case_example3(), off_center] {
        let rule = ResolutionPolicy::default().rule_for(&case.domain, 20).unwrap();
        let seq = compute_coefficients(20, case.field.as_ref(), &rule, Execution::Sequential).unwrap();
        let par = compute_coefficients(20, case.field.as_ref(), &rule, Execution::Parallel).unwrap();
        let same = seq.iter().zip(&par).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "{}", case.name);
    }
}

#[test]
fn doubling_the_rule_leaves_energies_unchanged() {
    for (case, tol) in [(bench::case_example1(), 1e-10), (bench::case_example2(), 1e-10), (bench::case_example3(), 1e-8)] {
        let policy = ResolutionPolicy::default();
        let base = energy_with(&case, 20, &policy);
        let fine = energy_with(&case, 20, &policy.doubled(20));
        assert!((base - fine).abs() < tol, "{}: {base} vs {fine}", case.name);
    }
}

#[test]
fn shifted_ball_stays_close_to_centered_ball() {
    let field = ConstantField([0.0, 0.0, 1.0]);
    let policy = ResolutionPolicy { radial: Some(60), theta: Some(60), phi: Some(60), axis: None };
    let centered = SampleDomain::ball([0.0; 3], 0.5).unwrap();
    let shifted = SampleDomain::ball([0.05, 0.0, -0.05], 0.5).unwrap();
    let e = |d: &SampleDomain| {
        let rule = policy.rule_for(d, 10).unwrap();
        energy(&CoefficientTable::from_field(10, 1.0, &field, &rule, Execution::default()).unwrap(), 10).unwrap()
    };
    let (a, b) = (e(&centered), e(&shifted));
    assert!((a - 0.07845252).abs() < 2e-5);
    assert!(b < bench::case_example2().exact_energy && (a - b).abs() < 5e-3, "{a} vs {b}");
}
