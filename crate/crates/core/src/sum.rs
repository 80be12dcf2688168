//! Compensated (Neumaier) summation.
//!
//! Every reduction in the crate goes through these types with a fixed operand
//! order, so repeated runs give bit-identical results regardless of how work
//! was split across threads.

/// Scalar Kahan–Babuška–Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator in, keeping both compensation terms.
    #[inline]
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        s.extend(iter);
        s
    }
}

/// Element-wise compensated accumulator over a fixed-length vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedVec {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedVec {
    pub fn zeros(len: usize) -> Self {
        Self { sum: vec![0.0; len], comp: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, x: f64) {
        let s = self.sum[i];
        let t = s + x;
        if s.abs() >= x.abs() {
            self.comp[i] += (s - t) + x;
        } else {
            self.comp[i] += (x - t) + s;
        }
        self.sum[i] = t;
    }

    /// Adds `xs[j]` into slot `offset + j`.
    pub fn add_slice(&mut self, offset: usize, xs: &[f64]) {
        for (j, x) in xs.iter().enumerate() {
            self.add_at(offset + j, *x);
        }
    }

    pub fn merge(&mut self, other: &CompensatedVec) {
        assert_eq!(self.len(), other.len());
        for i in 0..self.len() {
            self.add_at(i, other.sum[i]);
            self.comp[i] += other.comp[i];
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}
