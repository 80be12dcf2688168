//! Stray-field energy and magnetic scalar potential of a magnetized body,
//! computed by expanding in a rational orthogonal basis of `R³` obtained from
//! hyperspherical harmonics through stereographic projection.

pub mod abbasis;
pub mod quadrature;
pub mod s3harm;
pub mod specfun;
pub mod sum;
pub mod bench;
pub mod solver;
pub mod validation;
pub mod cli;
