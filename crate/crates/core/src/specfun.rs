//! Chebyshev derivatives, normalized associated Legendre functions and real
//! spherical harmonics on S².
//!
//! Conventions: `K_l^m(t) = (-1)^m sqrt((l-m)!/(l+m)!) P_l^m(t)` where `P_l^m`
//! carries the Condon–Shortley phase, so the two signs cancel and `K_l^m` is
//! non-negative near `t = 1` for `m >= 0`. Negative orders follow
//! `K_l^{-m} = (-1)^m K_l^m` and `K_l^m = 0` whenever `|m| > l`.

use std::f64::consts::PI;

use thiserror::Error;

/// Slack allowed on `|x| <= 1` before an argument is rejected.
pub const UNIT_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument {0} lies outside [-1, 1]")]
    OutOfUnitInterval(f64),
    #[error("order m = {m} exceeds degree l = {l}")]
    OrderExceedsDegree { l: u32, m: i32 },
}

/// Clamps rounding excursions just outside `[-1, 1]` back onto the interval.
pub fn clamp_unit(x: f64) -> Result<f64, SpecFunError> {
    if x.is_nan() || x.abs() > 1.0 + UNIT_SLACK {
        return Err(SpecFunError::OutOfUnitInterval(x));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// A validated (degree, order) pair with `|m| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DegreeOrder {
    l: u32,
    m: i32,
}

impl DegreeOrder {
    pub fn new(l: u32, m: i32) -> Result<Self, SpecFunError> {
        if m.unsigned_abs() > l {
            return Err(SpecFunError::OrderExceedsDegree { l, m });
        }
        Ok(Self { l, m })
    }

    pub fn degree(&self) -> u32 {
        self.l
    }

    pub fn order(&self) -> i32 {
        self.m
    }
}

/// Fills `out[j] = C_j^{(lambda)}(x)` for `j = 0..out.len()`.
pub fn gegenbauer_sequence(lambda: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = 2.0 * lambda * x;
    for j in 2..out.len() {
        let jf = j as f64;
        out[j] = (2.0 * x * (jf + lambda - 1.0) * out[j - 1] - (jf + 2.0 * lambda - 2.0) * out[j - 2]) / jf;
    }
}

/// `2^(d-1) (d-1)! n`, the factor linking `T_n^{(d)}` to `C_{n-d}^{(d)}`.
pub(crate) fn chebyshev_gegenbauer_factor(n: u32, d: u32) -> f64 {
    debug_assert!(d >= 1);
    let mut f = n as f64;
    for i in 1..d {
        f *= 2.0 * i as f64;
    }
    f
}

/// `T_n^{(d)}(x)`, the `d`-th derivative of the Chebyshev polynomial `T_n`.
pub fn chebyshev_derivative(n: u32, d: u32, x: f64) -> Result<f64, SpecFunError> {
    let x = clamp_unit(x)?;
    if d > n {
        return Ok(0.0);
    }
    if d == 0 {
        let (mut prev, mut cur) = (1.0, x);
        if n == 0 {
            return Ok(1.0);
        }
        for _ in 1..n {
            let next = 2.0 * x * cur - prev;
            prev = cur;
            cur = next;
        }
        return Ok(cur);
    }
    let mut c = vec![0.0; (n - d + 1) as usize];
    gegenbauer_sequence(d as f64, x, &mut c);
    Ok(chebyshev_gegenbauer_factor(n, d) * c[(n - d) as usize])
}

/// `c_{l,m} = sqrt((l-m)(l+m+1)) / 2`, zero outside `-l-1 <= m <= l`.
pub fn ladder_c(l: u32, m: i32) -> f64 {
    let l = l as i64;
    let m = m as i64;
    let p = (l - m) * (l + m + 1);
    if p <= 0 {
        0.0
    } else {
        0.5 * (p as f64).sqrt()
    }
}

/// `tau_{l,m} = sqrt((l+m+2)(l+m+1))`.
pub fn ladder_tau(l: u32, m: i32) -> f64 {
    let s = l as i64 + m as i64;
    let p = (s + 2) * (s + 1);
    if p <= 0 {
        0.0
    } else {
        (p as f64).sqrt()
    }
}

/// `K_m^m` and the column `K_l^m` for `l = m..=lmax`, given `t = cos θ`, `s = sin θ`.
fn legendre_column(m: u32, lmax: u32, t: f64, s: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut diag = 1.0;
    for i in 1..=m {
        let fi = i as f64;
        diag *= ((2.0 * fi - 1.0) / (2.0 * fi)).sqrt() * s;
    }
    out.push(diag);
    if lmax == m {
        return;
    }
    let mf = m as f64;
    out.push((2.0 * mf + 1.0).sqrt() * t * diag);
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let a = (2.0 * lf - 1.0) * t * out[out.len() - 1];
        let b = ((lf - 1.0 - mf) * (lf - 1.0 + mf)).sqrt() * out[out.len() - 2];
        out.push((a - b) / ((lf - mf) * (lf + mf)).sqrt());
    }
}

fn parity(m: i32) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `K_l^m(t)`; exactly `0.0` when `|m| > l`.
pub fn assoc_legendre_k(l: u32, m: i32, t: f64) -> Result<f64, SpecFunError> {
    let t = clamp_unit(t)?;
    let am = m.unsigned_abs();
    if am > l {
        return Ok(0.0);
    }
    let s = ((1.0 - t) * (1.0 + t)).sqrt();
    let mut col = Vec::with_capacity((l - am + 1) as usize);
    legendre_column(am, l, t, s, &mut col);
    let v = col[(l - am) as usize];
    Ok(if m < 0 { parity(m) * v } else { v })
}

fn k_at_angle(l: u32, m: i32, theta: f64) -> f64 {
    let am = m.unsigned_abs();
    if am > l {
        return 0.0;
    }
    let (s, t) = theta.sin_cos();
    let mut col = Vec::with_capacity((l - am + 1) as usize);
    legendre_column(am, l, t, s.abs(), &mut col);
    let v = col[(l - am) as usize];
    if m < 0 {
        parity(m) * v
    } else {
        v
    }
}

/// `sin θ · (K_l^m)'(cos θ) = c_{l,m} K_l^{m+1} - c_{l,-m} K_l^{m-1}`, free of divisions.
pub fn assoc_legendre_k_theta_derivative(p: DegreeOrder, theta: f64) -> f64 {
    let (l, m) = (p.l, p.m);
    ladder_c(l, m) * k_at_angle(l, m + 1, theta) - ladder_c(l, -m) * k_at_angle(l, m - 1, theta)
}

/// `eta_l = sqrt((2l+1) / (2 pi))`.
pub fn eta(l: u32) -> f64 {
    ((2.0 * l as f64 + 1.0) / (2.0 * PI)).sqrt()
}

/// Azimuthal factor: `cos(mφ)` for `m >= 1`, `1/sqrt(2)` for `m = 0`, `sin(|m|φ)` for `m <= -1`.
pub fn azimuthal(m: i32, phi: f64) -> f64 {
    match m.cmp(&0) {
        std::cmp::Ordering::Greater => (m as f64 * phi).cos(),
        std::cmp::Ordering::Equal => std::f64::consts::FRAC_1_SQRT_2,
        std::cmp::Ordering::Less => (m.unsigned_abs() as f64 * phi).sin(),
    }
}

/// Fills `out[m + L] = azimuthal(m, φ)` for `-L <= m <= L`, where
/// `out.len() = 2L + 1`, using the angle-addition recurrence.
pub fn fill_azimuthal(phi: f64, out: &mut [f64]) {
    let lmax = out.len() / 2;
    out[lmax] = std::f64::consts::FRAC_1_SQRT_2;
    let (s1, c1) = phi.sin_cos();
    let (mut s, mut c) = (0.0, 1.0);
    for m in 1..=lmax {
        let (sn, cn) = (s * c1 + c * s1, c * c1 - s * s1);
        s = sn;
        c = cn;
        out[lmax + m] = c;
        out[lmax - m] = s;
    }
}

/// Real spherical harmonic `Y_{l,m}(φ, θ) = eta_l K_l^{|m|}(cos θ) y_m(φ)`.
pub fn real_y2(p: DegreeOrder, phi: f64, theta: f64) -> f64 {
    eta(p.l) * k_at_angle(p.l, p.m.abs(), theta) * azimuthal(p.m, phi)
}

/// Offset of `(l, m)` with `0 <= m <= l` in a lower-triangular layout.
#[inline]
pub fn tri_index(l: u32, m: u32) -> usize {
    (l as usize * (l as usize + 1)) / 2 + m as usize
}

/// Offset of `(l, m)` with `-l <= m <= l` in the full `(L+1)^2` layout.
#[inline]
pub fn lm_index(l: u32, m: i32) -> usize {
    (l as i64 * l as i64 + l as i64 + m as i64) as usize
}

/// All `K_l^m(cos θ)`, `0 <= m <= l <= lmax`, at one polar angle.
///
/// The recurrence coefficients are computed once at construction so that
/// refilling costs a few multiply-adds per entry.
#[derive(Debug, Clone, Default)]
pub struct LegendreTable {
    lmax: u32,
    values: Vec<f64>,
    diag: Vec<f64>,
    first: Vec<f64>,
    rec_a: Vec<f64>,
    rec_b: Vec<f64>,
}

impl LegendreTable {
    pub fn new(lmax: u32) -> Self {
        let len = tri_index(lmax, lmax) + 1;
        let mut rec_a = vec![0.0; len];
        let mut rec_b = vec![0.0; len];
        for m in 0..=lmax {
            let mf = m as f64;
            for l in (m + 2)..=lmax {
                let lf = l as f64;
                let d = ((lf - mf) * (lf + mf)).sqrt();
                rec_a[tri_index(l, m)] = (2.0 * lf - 1.0) / d;
                rec_b[tri_index(l, m)] = ((lf - 1.0 - mf) * (lf - 1.0 + mf)).sqrt() / d;
            }
        }
        Self {
            lmax,
            values: vec![0.0; len],
            diag: (0..=lmax).map(|m| if m == 0 { 1.0 } else { ((2.0 * m as f64 - 1.0) / (2.0 * m as f64)).sqrt() }).collect(),
            first: (0..=lmax).map(|m| (2.0 * m as f64 + 1.0).sqrt()).collect(),
            rec_a,
            rec_b,
        }
    }

    pub fn lmax(&self) -> u32 {
        self.lmax
    }

    /// Refills the table for `t = cos θ`, `s = sin θ >= 0`.
    pub fn fill(&mut self, t: f64, s: f64) {
        let mut diag = 1.0;
        for m in 0..=self.lmax {
            if m > 0 {
                diag *= self.diag[m as usize] * s;
            }
            let i0 = tri_index(m, m);
            self.values[i0] = diag;
            if m == self.lmax {
                break;
            }
            let i1 = tri_index(m + 1, m);
            self.values[i1] = self.first[m as usize] * t * diag;
            let (mut prev, mut cur) = (diag, self.values[i1]);
            for l in (m + 2)..=self.lmax {
                let i = tri_index(l, m);
                let next = self.rec_a[i] * t * cur - self.rec_b[i] * prev;
                self.values[i] = next;
                prev = cur;
                cur = next;
            }
        }
    }

    /// `K_l^m` with the sign and zero conventions applied for any integer `m`.
    #[inline]
    pub fn get(&self, l: u32, m: i32) -> f64 {
        let am = m.unsigned_abs();
        if am > l || l > self.lmax {
            return 0.0;
        }
        let v = self.values[tri_index(l, am)];
        if m < 0 {
            parity(m) * v
        } else {
            v
        }
    }
}

/// The `θ`-dependent factors of `Y_ℓ^m` for `0 ≤ m ≤ ℓ ≤ lmax` at one polar
/// angle, indexed by [`tri_index`]: `η_ℓ K_ℓ^m`, its `θ`-derivative and
/// `η_ℓ K_ℓ^m / sin θ` (zero for `m = 0`), the last computed without division.
#[derive(Debug, Clone)]
pub struct PolarTable {
    lmax: u32,
    legendre: LegendreTable,
    /// Per `(l, m)`: `η_l`, `η_l c_{l,-m}`, `η_l c_{l,m}`,
    /// `η_l τ_{l,m} / 2m` and `η_l τ_{l,-m} / 2m`.
    consts: Vec<[f64; 5]>,
    pub value: Vec<f64>,
    pub d_theta: Vec<f64>,
    pub over_sin: Vec<f64>,
}

impl PolarTable {
    pub fn new(lmax: u32) -> Self {
        let n = tri_index(lmax + 1, 0);
        let mut consts = vec![[0.0; 5]; n];
        for l in 0..=lmax {
            let e = eta(l);
            for am in 0..=(l as i32) {
                let half = if am == 0 { 0.0 } else { 0.5 / am as f64 };
                consts[tri_index(l, am as u32)] = [
                    e,
                    e * ladder_c(l, -am),
                    e * ladder_c(l, am),
                    e * ladder_tau(l, am) * half,
                    e * ladder_tau(l, -am) * half,
                ];
            }
        }
        Self {
            lmax,
            legendre: LegendreTable::new(lmax + 1),
            consts,
            value: vec![0.0; n],
            d_theta: vec![0.0; n],
            over_sin: vec![0.0; n],
        }
    }

    pub fn lmax(&self) -> u32 {
        self.lmax
    }

    pub fn fill(&mut self, cos_theta: f64, sin_theta: f64) {
        self.legendre.fill(cos_theta, sin_theta);
        let k = &self.legendre.values;
        for l in 0..=self.lmax {
            let row = tri_index(l, 0);
            let next = tri_index(l + 1, 0);
            for am in 0..=l as usize {
                let idx = row + am;
                let [e, cm, cp, tp, tn] = self.consts[idx];
                // K_l^{-1} = -K_l^1 and K_l^{l+1} = 0.
                let below = if am == 0 { if l > 0 { -k[row + 1] } else { 0.0 } } else { k[idx - 1] };
                let above = if am < l as usize { k[idx + 1] } else { 0.0 };
                self.value[idx] = e * k[idx];
                self.d_theta[idx] = cm * below - cp * above;
                self.over_sin[idx] = if am == 0 { 0.0 } else { tp * k[next + am + 1] + tn * k[next + am - 1] };
            }
        }
    }
}

/// Real harmonics `Y_ℓ^m(φ, θ)` for all `ℓ ≤ lmax` at one point, with
/// `∂_θ Y` and `∂_φ Y / sin θ`, indexed by [`lm_index`].
#[derive(Debug, Clone)]
pub struct S2HarmonicTable {
    polar: PolarTable,
    azimuth: Vec<f64>,
    pub value: Vec<f64>,
    pub d_theta: Vec<f64>,
    pub d_phi_sin: Vec<f64>,
}

impl S2HarmonicTable {
    pub fn new(lmax: u32) -> Self {
        let n = ((lmax + 1) * (lmax + 1)) as usize;
        Self {
            polar: PolarTable::new(lmax),
            azimuth: vec![0.0; 2 * lmax as usize + 1],
            value: vec![0.0; n],
            d_theta: vec![0.0; n],
            d_phi_sin: vec![0.0; n],
        }
    }

    pub fn lmax(&self) -> u32 {
        self.polar.lmax
    }

    #[inline]
    fn y(&self, m: i32) -> f64 {
        self.azimuth[(m + self.polar.lmax as i32) as usize]
    }

    pub fn fill(&mut self, phi: f64, theta: f64) {
        let (s, t) = theta.sin_cos();
        self.fill_trig(phi, t, s.abs());
    }

    /// Same as [`fill`](Self::fill) with `cos θ`, `sin θ` supplied directly.
    pub fn fill_trig(&mut self, phi: f64, cos_theta: f64, sin_theta: f64) {
        fill_azimuthal(phi, &mut self.azimuth);
        self.polar.fill(cos_theta, sin_theta);
        for l in 0..=self.polar.lmax {
            for m in -(l as i32)..=(l as i32) {
                let t = tri_index(l, m.unsigned_abs());
                let idx = lm_index(l, m);
                let ym = self.y(m);
                self.value[idx] = self.polar.value[t] * ym;
                self.d_theta[idx] = self.polar.d_theta[t] * ym;
                self.d_phi_sin[idx] = -(m as f64) * self.y(-m) * self.polar.over_sin[t];
            }
        }
    }
}
