//! Evaluation of `c_α = ∫_Ω M·∇W_α dx` for every `α ∈ Λ*_N`.
//!
//! At a node with spherical angles `(φ, θ)` and `χ` the `χ`-coordinate on S³,
//! `M·∇W_α` splits as `P_{k,l} St_{l,m} + Q_{k,l} Sr_{l,m}` with
//!
//! * `P = (1-cos χ)^{3/2} R_{k,l} / sin χ`,
//! * `Q = -(1-cos χ)^{1/2} ((1-cos χ) ∂_χ R_{k,l} + ½ sin χ R_{k,l})`,
//! * `St = M_φ ∂_φ Y_{l,m} / sin θ + M_θ ∂_θ Y_{l,m}`, `Sr = M_r Y_{l,m}`.
//!
//! Scattered rules turn each block of nodes into one small matrix product per
//! `l`. Rules with product structure around the origin are reduced shell by
//! shell: Fourier moments in `φ` first, then Gauss sums in `θ`, then the
//! radial factors.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayViewMut2, Axis};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FieldError, MagnetizationField, QuadratureRule, RuleLayout, SphericalGrid};
use crate::abbasis::{grad_w_alpha, R3Point, Vec3};
use crate::s3harm::{MultiIndex, RadialLayout, RadialNorms, RadialTable};
use crate::specfun::{azimuthal, lm_index, tri_index, PolarTable, S2HarmonicTable};
use crate::sum::{CompensatedSum, CompensatedVec};

/// Nodes per matrix-product block.
const BLOCK: usize = 128;
/// Upper bound on the number of independent work chunks.
const MAX_CHUNKS: usize = 64;
const MIN_CHUNK: usize = 32 * BLOCK;

/// How the node loop is scheduled. Both choices give bit-identical results:
/// the node partition and the reduction order depend only on the rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Self::Parallel
        } else {
            Self::Sequential
        }
    }
}

fn run_indexed<T, F>(n: usize, exec: Execution, f: F) -> Result<Vec<T>, FieldError>
where
    T: Send,
    F: Fn(usize) -> Result<T, FieldError> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Every coefficient `c_α`, `α ∈ Λ*_{n_max}`, in linear order.
pub fn compute_coefficients(
    n_max: u32,
    field: &dyn MagnetizationField,
    rule: &QuadratureRule,
    exec: Execution,
) -> Result<Vec<f64>, FieldError> {
    match &rule.layout {
        RuleLayout::Spherical(grid) => spherical(n_max, field, grid, exec),
        RuleLayout::Scattered => scattered(n_max, field, rule, exec),
    }
}

/// Same as [`compute_coefficients`] but ignoring any product structure.
pub fn compute_coefficients_scattered(
    n_max: u32,
    field: &dyn MagnetizationField,
    rule: &QuadratureRule,
    exec: Execution,
) -> Result<Vec<f64>, FieldError> {
    scattered(n_max, field, rule, exec)
}

/// A single coefficient, evaluated node by node from [`grad_w_alpha`].
pub fn coefficient(alpha: MultiIndex, field: &dyn MagnetizationField, rule: &QuadratureRule) -> Result<f64, FieldError> {
    let mut acc = CompensatedSum::new();
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let m = field.at(*x)?;
        let g = grad_w_alpha(alpha, R3Point(*x)).grad;
        acc.add(w * (m[0] * g[0] + m[1] * g[1] + m[2] * g[2]));
    }
    Ok(acc.value())
}

/// Stereographic and spherical data of one point of R³.
struct NodeGeometry {
    one_minus: f64,
    cos_chi: f64,
    sin_chi: f64,
    cos_theta: f64,
    sin_theta: f64,
    phi: f64,
}

impl NodeGeometry {
    fn new(x: Vec3) -> Self {
        let rho2 = x[0] * x[0] + x[1] * x[1];
        let r2 = rho2 + x[2] * x[2];
        let r = r2.sqrt();
        let d = r2 + 1.0;
        let (cos_theta, sin_theta, phi) =
            if r > 0.0 { (x[2] / r, rho2.sqrt() / r, x[1].atan2(x[0])) } else { (1.0, 0.0, 0.0) };
        Self { one_minus: 2.0 / d, cos_chi: (r2 - 1.0) / d, sin_chi: 2.0 * r / d, cos_theta, sin_theta, phi }
    }
}

/// Spherical components `(M_r, M_θ, M_φ)`.
#[inline]
fn spherical_components(m: Vec3, cos_theta: f64, sin_theta: f64, cos_phi: f64, sin_phi: f64) -> Vec3 {
    let e_r = [sin_theta * cos_phi, sin_theta * sin_phi, cos_theta];
    let e_t = [cos_theta * cos_phi, cos_theta * sin_phi, -sin_theta];
    let e_p = [-sin_phi, cos_phi, 0.0];
    let dot = |e: Vec3| m[0] * e[0] + m[1] * e[1] + m[2] * e[2];
    [dot(e_r), dot(e_t), dot(e_p)]
}

/// Writes `P_{k,l}` into `p` and `Q_{k,l}` into `q`, both in radial-layout order.
#[inline]
fn radial_factors(table: &RadialTable, one_minus: f64, sin_chi: f64, p: &mut [f64], q: &mut [f64]) {
    let root = one_minus.sqrt();
    let a = root * one_minus;
    for i in 0..p.len() {
        p[i] = a * table.over_sin[i];
        q[i] = -root * (one_minus * table.d_chi[i] + 0.5 * sin_chi * table.value[i]);
    }
}

/// Offsets and sizes shared by both evaluation paths. Results are produced
/// `l`-major (`k` rows, `m` columns) and permuted to linear order at the end.
struct Plan {
    n_max: u32,
    norms: RadialNorms,
    layout: RadialLayout,
    lm_len: usize,
    out_offsets: Vec<usize>,
}

impl Plan {
    fn new(n_max: u32) -> Self {
        let norms = RadialNorms::new(n_max);
        let layout = norms.layout().clone();
        let mut out_offsets = Vec::with_capacity(n_max as usize + 2);
        let mut o = 0;
        for l in 0..=n_max {
            out_offsets.push(o);
            o += (n_max - l + 1) as usize * (2 * l as usize + 1);
        }
        out_offsets.push(o);
        let lm_len = ((n_max + 1) * (n_max + 1)) as usize;
        Self { n_max, norms, layout, lm_len, out_offsets }
    }

    fn total(&self) -> usize {
        self.out_offsets[self.n_max as usize + 1]
    }

    fn out_index(&self, k: u32, l: u32, m: i32) -> usize {
        self.out_offsets[l as usize] + (k - l) as usize * (2 * l as usize + 1) + (m + l as i32) as usize
    }

    fn to_linear(&self, values: &[f64]) -> Vec<f64> {
        MultiIndex::up_to_degree(self.n_max).map(|a| values[self.out_index(a.k, a.l, a.m)]).collect()
    }
}

fn scattered(
    n_max: u32,
    field: &dyn MagnetizationField,
    rule: &QuadratureRule,
    exec: Execution,
) -> Result<Vec<f64>, FieldError> {
    let plan = Plan::new(n_max);
    let n = rule.len();
    let chunk = n.div_ceil(MAX_CHUNKS).div_ceil(BLOCK).max(1) * BLOCK;
    let chunk = chunk.max(MIN_CHUNK);
    let n_chunks = n.div_ceil(chunk);
    let partials = run_indexed(n_chunks, exec, |c| {
        let range = c * chunk..((c + 1) * chunk).min(n);
        scattered_chunk(&plan, field, rule, range)
    })?;
    let mut acc = CompensatedVec::zeros(plan.total());
    for p in &partials {
        acc.merge(p);
    }
    Ok(plan.to_linear(&acc.into_values()))
}

fn scattered_chunk(
    plan: &Plan,
    field: &dyn MagnetizationField,
    rule: &QuadratureRule,
    range: std::ops::Range<usize>,
) -> Result<CompensatedVec, FieldError> {
    let rad_len = plan.layout.len();
    let lm_len = plan.lm_len;
    // Row b holds P of node b, row BLOCK + b holds Q.
    let mut pq = Array2::<f64>::zeros((2 * BLOCK, rad_len));
    // Row b holds w St of node b, row BLOCK + b holds w Sr.
    let mut st = Array2::<f64>::zeros((2 * BLOCK, lm_len));
    let mut out = vec![0.0; plan.total()];
    let mut acc = CompensatedVec::zeros(plan.total());
    let mut radial = RadialTable::new(plan.n_max);
    let mut angular = S2HarmonicTable::new(plan.n_max);
    let mut start = range.start;
    while start < range.end {
        let nb = BLOCK.min(range.end - start);
        for b in 0..nb {
            let x = rule.nodes[start + b];
            let w = rule.weights[start + b];
            let m = field.at(x)?;
            let g = NodeGeometry::new(x);
            radial.fill(&plan.norms, g.cos_chi, g.sin_chi);
            angular.fill_trig(g.phi, g.cos_theta, g.sin_theta);
            let (sp, cp) = g.phi.sin_cos();
            let [m_r, m_t, m_p] = spherical_components(m, g.cos_theta, g.sin_theta, cp, sp);
            {
                let (mut p_rows, mut q_rows) = pq.view_mut().split_at(Axis(0), BLOCK);
                let p = p_rows.row_mut(b).into_slice().expect("row-major");
                let q = q_rows.row_mut(b).into_slice().expect("row-major");
                radial_factors(&radial, g.one_minus, g.sin_chi, p, q);
            }
            let (mut t_rows, mut r_rows) = st.view_mut().split_at(Axis(0), BLOCK);
            let t_row = t_rows.row_mut(b).into_slice().expect("row-major");
            let r_row = r_rows.row_mut(b).into_slice().expect("row-major");
            let (wp, wt, wr) = (w * m_p, w * m_t, w * m_r);
            for i in 0..lm_len {
                t_row[i] = wp * angular.d_phi_sin[i] + wt * angular.d_theta[i];
                r_row[i] = wr * angular.value[i];
            }
        }
        for b in nb..BLOCK {
            st.row_mut(b).fill(0.0);
            st.row_mut(BLOCK + b).fill(0.0);
        }
        for l in 0..=plan.n_max {
            let a = pq.slice(s![.., plan.layout.range(l)]).reversed_axes();
            let lo = (l * l) as usize;
            let bm = st.slice(s![.., lo..lo + 2 * l as usize + 1]);
            let (o0, o1) = (plan.out_offsets[l as usize], plan.out_offsets[l as usize + 1]);
            let mut c = ArrayViewMut2::from_shape((a.nrows(), bm.ncols()), &mut out[o0..o1]).expect("shape");
            general_mat_mul(1.0, &a, &bm, 0.0, &mut c);
        }
        acc.add_slice(0, &out);
        start += nb;
    }
    Ok(acc)
}

/// Per-shell angular sums `ST_{l,m}` and `Sr_{l,m}` in `lm` order.
struct ShellSums {
    st: Vec<f64>,
    sr: Vec<f64>,
}

fn spherical(
    n_max: u32,
    field: &dyn MagnetizationField,
    grid: &SphericalGrid,
    exec: Execution,
) -> Result<Vec<f64>, FieldError> {
    let plan = Plan::new(n_max);
    let nm = n_max as i32;
    let width = 2 * n_max as usize + 1;
    let n_phi = grid.n_phi;
    let wp = grid.phi_weight();
    let mut y_table = vec![0.0; n_phi * width];
    let mut trig = Vec::with_capacity(n_phi);
    for p in 0..n_phi {
        let phi = grid.phi(p);
        trig.push(phi.sin_cos());
        for m in -nm..=nm {
            y_table[p * width + (m + nm) as usize] = wp * azimuthal(m, phi);
        }
    }
    let polar: Vec<(f64, f64, f64, PolarTable)> = grid
        .polar
        .iter()
        .map(|&(t, w)| {
            let s = ((1.0 - t) * (1.0 + t)).sqrt();
            let mut table = PolarTable::new(n_max);
            table.fill(t, s);
            (t, s, w, table)
        })
        .collect();

    let shells = run_indexed(grid.radial.len(), exec, |i| {
        let r = grid.radial[i].0;
        let mut st = CompensatedVec::zeros(plan.lm_len);
        let mut sr = CompensatedVec::zeros(plan.lm_len);
        let mut moments = vec![[0.0f64; 3]; width];
        for (t, s, wt, table) in &polar {
            moments.iter_mut().for_each(|v| *v = [0.0; 3]);
            for (p, &(sp, cp)) in trig.iter().enumerate() {
                let x = [r * s * cp, r * s * sp, r * t];
                let mc = spherical_components(field.at(x)?, *t, *s, cp, sp);
                let ys = &y_table[p * width..(p + 1) * width];
                for (mom, y) in moments.iter_mut().zip(ys) {
                    mom[0] += mc[0] * y;
                    mom[1] += mc[1] * y;
                    mom[2] += mc[2] * y;
                }
            }
            for l in 0..=n_max {
                let li = l as i32;
                for m in -li..=li {
                    let ti = tri_index(l, m.unsigned_abs());
                    let a = moments[(m + nm) as usize];
                    let a_neg = moments[(nm - m) as usize];
                    let idx = lm_index(l, m);
                    let tang = -(m as f64) * table.over_sin[ti] * a_neg[2] + table.d_theta[ti] * a[1];
                    st.add_at(idx, wt * tang);
                    sr.add_at(idx, wt * table.value[ti] * a[0]);
                }
            }
        }
        Ok(ShellSums { st: st.into_values(), sr: sr.into_values() })
    })?;

    let rad_len = plan.layout.len();
    let mut radial = RadialTable::new(n_max);
    let mut p = vec![0.0; rad_len];
    let mut q = vec![0.0; rad_len];
    let mut acc = CompensatedVec::zeros(plan.total());
    for (&(r, wr), sums) in grid.radial.iter().zip(&shells) {
        let g = NodeGeometry::new([0.0, 0.0, r]);
        radial.fill(&plan.norms, g.cos_chi, g.sin_chi);
        radial_factors(&radial, g.one_minus, g.sin_chi, &mut p, &mut q);
        for l in 0..=n_max {
            let li = l as i32;
            for k in l..=n_max {
                let ri = plan.layout.index(k, l);
                let (pk, qk) = (wr * p[ri], wr * q[ri]);
                for m in -li..=li {
                    let idx = lm_index(l, m);
                    acc.add_at(plan.out_index(k, l, m), pk * sums.st[idx] + qk * sums.sr[idx]);
                }
            }
        }
    }
    Ok(plan.to_linear(&acc.into_values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{build_ball_rule, build_box_rule, ConstantField, FnField, SampleDomain};

    fn rotating(x: Vec3) -> Vec3 {
        [x[1] - 0.3 * x[2], 0.5 + x[0] * x[2], x[0] - x[1] * x[1]]
    }

    #[test]
    fn batched_paths_match_single_coefficient() {
        let n_max = 4;
        let field = FnField::new(rotating);
        let ball = SampleDomain::ball([0.0; 3], 0.5).unwrap();
        let rule = build_ball_rule(&ball, 6, 7, 9).unwrap();
        let fast = compute_coefficients(n_max, &field, &rule, Execution::Sequential).unwrap();
        let slow = compute_coefficients_scattered(n_max, &field, &rule, Execution::Sequential).unwrap();
        for (i, a) in MultiIndex::up_to_degree(n_max).enumerate() {
            let single = coefficient(a, &field, &rule).unwrap();
            assert!((fast[i] - single).abs() < 1e-13, "{a}: {} vs {single}", fast[i]);
            assert!((slow[i] - single).abs() < 1e-13, "{a}: {} vs {single}", slow[i]);
        }
    }

    #[test]
    fn partial_blocks_and_many_chunks() {
        let n_max = 3;
        let field = FnField::new(rotating);
        let cube = SampleDomain::cuboid([-0.5, -0.3, 0.0], [0.4, 0.6, 0.8]).unwrap();
        let rule = build_box_rule(&cube, 17).unwrap();
        assert!(rule.len() > MIN_CHUNK && !rule.len().is_multiple_of(BLOCK));
        let all = compute_coefficients(n_max, &field, &rule, Execution::Sequential).unwrap();
        for (i, a) in MultiIndex::up_to_degree(n_max).enumerate() {
            let single = coefficient(a, &field, &rule).unwrap();
            assert!((all[i] - single).abs() < 1e-13 * (1.0 + single.abs()), "{a}");
        }
    }

    #[test]
    fn execution_modes_are_bit_identical() {
        let field = ConstantField([0.0, 1.0, 0.0]);
        let cube = SampleDomain::cuboid([-0.5; 3], [0.5; 3]).unwrap();
        let rule = build_box_rule(&cube, 18).unwrap();
        let a = compute_coefficients(5, &field, &rule, Execution::Sequential).unwrap();
        let b = compute_coefficients(5, &field, &rule, Execution::Parallel).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let ball = SampleDomain::ball([0.0; 3], 0.5).unwrap();
        let rule = build_ball_rule(&ball, 12, 12, 12).unwrap();
        let a = compute_coefficients(5, &field, &rule, Execution::Sequential).unwrap();
        let b = compute_coefficients(5, &field, &rule, Execution::Parallel).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn zero_field_gives_zero_coefficients() {
        let ball = SampleDomain::ball([0.0; 3], 0.5).unwrap();
        let rule = build_ball_rule(&ball, 8, 8, 8).unwrap();
        let c = compute_coefficients(6, &ConstantField([0.0; 3]), &rule, Execution::default()).unwrap();
        assert!(c.iter().all(|v| *v == 0.0));
    }
}
