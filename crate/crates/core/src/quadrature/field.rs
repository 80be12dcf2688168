use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::abbasis::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("magnetization is only known at the cloud nodes; {0:?} is not one of them")]
    NotSampled(Vec3),
    #[error("magnetization evaluation failed at {at:?}: {reason}")]
    Evaluation { at: Vec3, reason: String },
    #[error("magnetization at {0:?} is not finite")]
    NonFinite(Vec3),
}

/// A magnetization `M: Ω → R³`.
pub trait MagnetizationField: Send + Sync {
    fn at(&self, x: Vec3) -> Result<Vec3, FieldError>;

    fn is_constant(&self) -> bool {
        false
    }

    /// Whether `|M| = 1` holds everywhere on the sample.
    fn unit_magnitude(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField(pub Vec3);

impl MagnetizationField for ConstantField {
    fn at(&self, _x: Vec3) -> Result<Vec3, FieldError> {
        Ok(self.0)
    }

    fn is_constant(&self) -> bool {
        true
    }

    fn unit_magnitude(&self) -> bool {
        (self.0.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12
    }
}

/// Field given by a plain function pointer or closure.
pub struct FnField<F> {
    f: F,
    unit: bool,
}

impl<F: Fn(Vec3) -> Vec3 + Send + Sync> FnField<F> {
    pub fn new(f: F) -> Self {
        Self { f, unit: false }
    }

    pub fn with_unit_magnitude(mut self, unit: bool) -> Self {
        self.unit = unit;
        self
    }
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("unit", &self.unit).finish_non_exhaustive()
    }
}

impl<F: Fn(Vec3) -> Vec3 + Send + Sync> MagnetizationField for FnField<F> {
    fn at(&self, x: Vec3) -> Result<Vec3, FieldError> {
        let m = (self.f)(x);
        if m.iter().all(|v| v.is_finite()) {
            Ok(m)
        } else {
            Err(FieldError::NonFinite(x))
        }
    }

    fn unit_magnitude(&self) -> bool {
        self.unit
    }
}

/// Magnetization known only at the nodes of a cloud, looked up by exact
/// coordinates.
#[derive(Debug, Clone)]
pub struct SampledField {
    values: HashMap<[u64; 3], Vec3>,
}

impl SampledField {
    pub fn new(samples: impl IntoIterator<Item = (Vec3, Vec3)>) -> Self {
        let values = samples.into_iter().map(|(x, m)| (key(x), m)).collect();
        Self { values }
    }
}

fn key(x: Vec3) -> [u64; 3] {
    // Normalizes -0.0 so it matches 0.0.
    x.map(|v| (v + 0.0).to_bits())
}

impl MagnetizationField for SampledField {
    fn at(&self, x: Vec3) -> Result<Vec3, FieldError> {
        self.values.get(&key(x)).copied().ok_or(FieldError::NotSampled(x))
    }
}
