//! Random polynomial zero distribution laboratory.
//!
//! The crate builds random polynomials `P_n(z) = Σ A_k B_k(z)` from configurable
//! coefficient ensembles and polynomial bases, computes all of their zeros and
//! measures how far the normalized zero counting measure is from the
//! equilibrium measure of a canonical compact set.
//!
//! Module map:
//!
//! - [`ensembles`]: coefficient distributions, sampling, moment estimators.
//! - [`bases`]: basis families, coefficient triangles, Stieltjes orthonormalization.
//! - [`polyroots`]: Ehrlich–Aberth simultaneous root finding with residual certificates.
//! - [`potential`]: canonical domains, Green functions, exterior maps, sectors.
//! - [`discrepancy`]: zero counting measures, sector discrepancies, bound evaluators.
//! - [`experiments`]: declarative Monte Carlo harness with persistence.
//! - [`cli`]: command-line dispatch.

pub mod bases;
pub mod cli;
pub mod config;
pub mod discrepancy;
pub mod ensembles;
pub mod experiments;
pub mod polyroots;
pub mod potential;
pub mod quadrature;
pub mod seed;

pub use num_complex::Complex64;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
