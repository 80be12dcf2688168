//! Real spherical harmonics on the unit sphere S³ ⊂ R⁴.
//!
//! `Y_α(ξ) = a_{k,l}^{-1/2} (sin χ)^l T_{k+1}^{(l+1)}(cos χ) Y_{l,m}(φ, θ)` for
//! `α = (k, l, m)`, with hyperspherical angles
//! `ξ = (sin θ cos φ sin χ, sin θ sin φ sin χ, cos θ sin χ, cos χ)`.
//!
//! The Chebyshev derivative is evaluated through its Gegenbauer form
//! `T_{k+1}^{(l+1)} = 2^l l! (k+1) C_{k-l}^{(l+1)}`; the constant
//! `2^l l! (k+1) / sqrt(a_{k,l})` is formed in log space so that no factorial
//! is ever materialized.

use std::f64::consts::PI;

use thiserror::Error;

use crate::specfun::{self, gegenbauer_sequence, lm_index, S2HarmonicTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("({k}, {l}, {m}) is not a valid basis label (need 0 <= l <= k, |m| <= l)")]
    OutsideIndexSet { k: u32, l: u32, m: i32 },
}

/// A basis label `(k, l, m)` with `0 <= l <= k` and `-l <= m <= l`.
///
/// Labels are ordered lexicographically in `(k, l, m)`; [`linear_index`](Self::linear_index)
/// is the position of a label in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub k: u32,
    pub l: u32,
    pub m: i32,
}

impl MultiIndex {
    pub fn new(k: u32, l: u32, m: i32) -> Result<Self, IndexError> {
        if l > k || m.unsigned_abs() > l {
            return Err(IndexError::OutsideIndexSet { k, l, m });
        }
        Ok(Self { k, l, m })
    }

    /// Number of labels of degree below `k`, i.e. `sum_{i<k} (i+1)^2`.
    pub fn degree_offset(k: u32) -> usize {
        let k = k as usize;
        k * (k + 1) * (2 * k + 1) / 6
    }

    pub fn linear_index(&self) -> usize {
        Self::degree_offset(self.k) + lm_index(self.l, self.m)
    }

    pub fn from_linear_index(idx: usize) -> Self {
        let mut k = 0u32;
        while Self::degree_offset(k + 1) <= idx {
            k += 1;
        }
        let rest = idx - Self::degree_offset(k);
        let l = (rest as f64).sqrt() as u32;
        let l = if (l as usize + 1) * (l as usize + 1) <= rest { l + 1 } else { l };
        let m = rest as i64 - (l as i64 * l as i64 + l as i64);
        Self { k, l, m: m as i32 }
    }

    /// The `(k+1)^2` labels of degree exactly `k`.
    pub fn degree_slice(k: u32) -> impl Iterator<Item = MultiIndex> {
        (0..=k).flat_map(move |l| (-(l as i32)..=(l as i32)).map(move |m| MultiIndex { k, l, m }))
    }

    /// All labels of degree at most `n`, in linear-index order.
    pub fn up_to_degree(n: u32) -> impl Iterator<Item = MultiIndex> {
        (0..=n).flat_map(Self::degree_slice)
    }

    /// `|Λ*_n| = (n+1)(n+2)(2n+3)/6`.
    pub fn count_up_to(n: u32) -> usize {
        Self::degree_offset(n + 1)
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.k, self.l, self.m)
    }
}

/// A point of S³ held both as a unit 4-vector and as angles `(φ, θ, χ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S3Point {
    pub xi: [f64; 4],
    pub phi: f64,
    pub theta: f64,
    pub chi: f64,
}

impl S3Point {
    pub fn from_angles(phi: f64, theta: f64, chi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let (sc, cc) = chi.sin_cos();
        Self {
            xi: [st * cp * sc, st * sp * sc, ct * sc, cc],
            phi,
            theta,
            chi,
        }
    }

    /// Builds the angles from a unit 4-vector. On coordinate singularities the
    /// undetermined angles are set to zero.
    pub fn from_cartesian(xi: [f64; 4]) -> Self {
        let rho3 = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
        let chi = rho3.atan2(xi[3]);
        let rho2 = xi[0].hypot(xi[1]);
        let theta = rho2.atan2(xi[2]);
        let mut phi = xi[1].atan2(xi[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self { xi, phi, theta, chi }
    }
}

/// `ln a_{k,l}` with `a_{k,l} = (k+1)π/2 · (k+l+1)!/(k-l)!`.
fn ln_a_norm(k: u32, l: u32) -> f64 {
    let mut s = ((k as f64 + 1.0) * PI / 2.0).ln();
    for j in (k - l + 1)..=(k + l + 1) {
        s += (j as f64).ln();
    }
    s
}

/// `a_{k,l} = (k+1)π/2 · (k+l+1)!/(k-l)!`, as a running product.
pub fn a_norm(k: u32, l: u32) -> Result<f64, IndexError> {
    if l > k {
        return Err(IndexError::OutsideIndexSet { k, l, m: 0 });
    }
    let mut p = (k as f64 + 1.0) * PI / 2.0;
    for j in (k - l + 1)..=(k + l + 1) {
        p *= j as f64;
    }
    Ok(p)
}

/// `ln(2^l l! (k+1) / sqrt(a_{k,l}))`.
fn ln_radial_norm(k: u32, l: u32) -> f64 {
    let mut s = l as f64 * std::f64::consts::LN_2 + (k as f64 + 1.0).ln();
    for j in 2..=l {
        s += (j as f64).ln();
    }
    s - 0.5 * ln_a_norm(k, l)
}

/// `norm · s^p`, switching to log magnitude when `s^p` would be subnormal.
#[inline]
fn scaled_power(norm: f64, ln_norm: f64, s: f64, p: u32) -> f64 {
    if p == 0 {
        return norm;
    }
    if s == 0.0 {
        return 0.0;
    }
    let direct = s.powi(p as i32);
    if direct >= 1e-290 {
        norm * direct
    } else {
        (ln_norm + p as f64 * s.ln()).exp()
    }
}

/// Layout of per-`(k, l)` radial quantities: `l`-major, `k = l..=n_max` inside.
#[derive(Debug, Clone)]
pub struct RadialLayout {
    n_max: u32,
    offsets: Vec<usize>,
}

impl RadialLayout {
    pub fn new(n_max: u32) -> Self {
        let mut offsets = Vec::with_capacity(n_max as usize + 2);
        let mut o = 0;
        for l in 0..=n_max {
            offsets.push(o);
            o += (n_max - l + 1) as usize;
        }
        offsets.push(o);
        Self { n_max, offsets }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    #[inline]
    pub fn index(&self, k: u32, l: u32) -> usize {
        self.offsets[l as usize] + (k - l) as usize
    }

    /// Index range of `k = l..=n_max` for fixed `l`.
    #[inline]
    pub fn range(&self, l: u32) -> std::ops::Range<usize> {
        self.offsets[l as usize]..self.offsets[l as usize + 1]
    }

    pub fn len(&self) -> usize {
        self.offsets[self.n_max as usize + 1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Precomputed `2^l l! (k+1) / sqrt(a_{k,l})` for all `l <= k <= n_max`,
/// plus the Gegenbauer recurrence coefficients used by [`RadialTable`].
#[derive(Debug, Clone)]
pub struct RadialNorms {
    layout: RadialLayout,
    norm: Vec<f64>,
    ln_norm: Vec<f64>,
    /// `C_j^{(λ)}` for `λ = 1..=n_max+1`, `j = 0..=n_max+1-λ`, packed by `λ`.
    gegen_offsets: Vec<usize>,
    /// `(2(j+λ-1)/j, (j+2λ-2)/j)` per packed `(λ, j)`.
    gegen_coef: Vec<(f64, f64)>,
}

impl RadialNorms {
    pub fn new(n_max: u32) -> Self {
        let layout = RadialLayout::new(n_max);
        let mut norm = vec![0.0; layout.len()];
        let mut ln_norm = vec![0.0; layout.len()];
        for l in 0..=n_max {
            for k in l..=n_max {
                let i = layout.index(k, l);
                ln_norm[i] = ln_radial_norm(k, l);
                norm[i] = ln_norm[i].exp();
            }
        }
        let mut gegen_offsets = Vec::with_capacity(n_max as usize + 3);
        let mut gegen_coef = Vec::new();
        for lambda in 1..=(n_max + 1) {
            gegen_offsets.push(gegen_coef.len());
            let lf = lambda as f64;
            for j in 0..=(n_max + 1 - lambda) {
                let jf = j as f64;
                gegen_coef.push(if j < 2 { (0.0, 0.0) } else { (2.0 * (jf + lf - 1.0) / jf, (jf + 2.0 * lf - 2.0) / jf) });
            }
        }
        gegen_offsets.push(gegen_coef.len());
        Self { layout, norm, ln_norm, gegen_offsets, gegen_coef }
    }

    pub fn layout(&self) -> &RadialLayout {
        &self.layout
    }
}

/// The χ-dependent factors of every `Y_α` with `k <= n_max` at one `χ`.
///
/// Writing `Y_α = R_{k,l}(χ) Y_{l,m}(φ, θ)`:
/// * `value = R_{k,l}`,
/// * `over_sin = R_{k,l} / sin χ` (set to zero for `l = 0`, where it only ever
///   multiplies vanishing angular derivatives),
/// * `d_chi = ∂R_{k,l}/∂χ`.
#[derive(Debug, Clone)]
pub struct RadialTable {
    pub value: Vec<f64>,
    pub over_sin: Vec<f64>,
    pub d_chi: Vec<f64>,
    gegen: Vec<f64>,
    powers: Vec<f64>,
}

impl RadialTable {
    pub fn new(n_max: u32) -> Self {
        let norms_len = {
            let n = n_max as usize + 1;
            n * (n + 1) / 2
        };
        let len = RadialLayout::new(n_max).len();
        Self {
            value: vec![0.0; len],
            over_sin: vec![0.0; len],
            d_chi: vec![0.0; len],
            gegen: vec![0.0; norms_len],
            powers: vec![0.0; n_max as usize + 2],
        }
    }

    /// Fills the table for `cos χ = c`, `sin χ = s >= 0`.
    pub fn fill(&mut self, norms: &RadialNorms, c: f64, s: f64) {
        let layout = &norms.layout;
        let n_max = layout.n_max;
        for lambda in 1..=(n_max + 1) as usize {
            let range = norms.gegen_offsets[lambda - 1]..norms.gegen_offsets[lambda];
            let g = &mut self.gegen[range.clone()];
            let coef = &norms.gegen_coef[range];
            g[0] = 1.0;
            if g.len() > 1 {
                g[1] = 2.0 * lambda as f64 * c;
            }
            for j in 2..g.len() {
                let (a, b) = coef[j];
                g[j] = a * c * g[j - 1] - b * g[j - 2];
            }
        }
        self.powers[0] = 1.0;
        for p in 1..self.powers.len() {
            self.powers[p] = self.powers[p - 1] * s;
        }
        let powers = &self.powers;
        let scaled = |nm: f64, ln: f64, p: u32| -> f64 {
            let direct = powers[p as usize];
            if p == 0 || direct >= 1e-290 {
                nm * direct
            } else {
                scaled_power(nm, ln, s, p)
            }
        };
        for l in 0..=n_max {
            let g1 = &self.gegen[norms.gegen_offsets[l as usize]..norms.gegen_offsets[l as usize + 1]];
            let g2 = if l < n_max {
                &self.gegen[norms.gegen_offsets[l as usize + 1]..norms.gegen_offsets[l as usize + 2]]
            } else {
                &[][..]
            };
            let lf = l as f64;
            for k in l..=n_max {
                let i = layout.index(k, l);
                let j = (k - l) as usize;
                let (nm, ln) = (norms.norm[i], norms.ln_norm[i]);
                let c1 = g1[j];
                let c2 = if j == 0 { 0.0 } else { g2[j - 1] };
                self.value[i] = scaled(nm, ln, l) * c1;
                let lower = if l == 0 { 0.0 } else { scaled(nm, ln, l - 1) };
                self.over_sin[i] = lower * c1;
                self.d_chi[i] = lf * c * lower * c1 - 2.0 * (lf + 1.0) * scaled(nm, ln, l + 1) * c2;
            }
        }
    }
}

/// `R_{k,l}(χ)`, `R_{k,l}/sin χ` and `∂R_{k,l}/∂χ` for a single `(k, l)`.
fn radial_single(k: u32, l: u32, chi: f64) -> (f64, f64, f64) {
    let (s, c) = chi.sin_cos();
    let s = s.abs();
    let len = (k - l + 1) as usize;
    let mut c1 = vec![0.0; len];
    let mut c2 = vec![0.0; len];
    gegenbauer_sequence(l as f64 + 1.0, c, &mut c1);
    gegenbauer_sequence(l as f64 + 2.0, c, &mut c2);
    let ln = ln_radial_norm(k, l);
    let nm = ln.exp();
    let j = len - 1;
    let c1 = c1[j];
    let c2 = if j == 0 { 0.0 } else { c2[j - 1] };
    let value = scaled_power(nm, ln, s, l) * c1;
    let lower = if l == 0 { 0.0 } else { scaled_power(nm, ln, s, l - 1) };
    let lf = l as f64;
    let d_chi = lf * c * lower * c1 - 2.0 * (lf + 1.0) * scaled_power(nm, ln, s, l + 1) * c2;
    (value, lower * c1, d_chi)
}

/// `Y_α(ξ)`.
pub fn y_alpha(alpha: MultiIndex, p: &S3Point) -> f64 {
    let (r, _, _) = radial_single(alpha.k, alpha.l, p.chi);
    let lm = specfun::DegreeOrder::new(alpha.l, alpha.m).expect("validated label");
    r * specfun::real_y2(lm, p.phi, p.theta)
}

/// The three angular quantities consumed by the gradient assembly:
/// `[(1/(sin θ sin χ)) ∂Y_α/∂φ, (1/sin χ) ∂Y_α/∂θ, ∂Y_α/∂χ]`.
///
/// Every entry is finite on the coordinate singularities `sin θ = 0` and
/// `sin χ = 0`: the `1/sin θ` is absorbed by the `tau` ladder relation and the
/// `1/sin χ` by the `(sin χ)^l` factor.
pub fn y_alpha_angular_derivatives(alpha: MultiIndex, p: &S3Point) -> [f64; 3] {
    let (_, r_over_sin, r_dchi) = radial_single(alpha.k, alpha.l, p.chi);
    let mut table = S2HarmonicTable::new(alpha.l);
    table.fill(p.phi, p.theta);
    let idx = lm_index(alpha.l, alpha.m);
    [
        r_over_sin * table.d_phi_sin[idx],
        r_over_sin * table.d_theta[idx],
        r_dchi * table.value[idx],
    ]
}
