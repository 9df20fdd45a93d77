//! Simulation and tomography toolkit for a displacement-based photon
//! counting receiver discriminating the single-photon superposition states
//! `(|0> +- |1>)/sqrt(2)`.
//!
//! The crate provides truncated Fock-space linear algebra, closed-form and
//! operator-level error rates for the displaced photon-counting receiver, a
//! Gaussian (homodyne-style) benchmark, a stochastic click-statistics
//! simulator with dark counts and finite interference visibility, and an
//! iterative maximum-likelihood detector-tomography reconstruction.

pub mod detector;
pub mod error;
pub mod fock;
pub mod metrics;
pub mod quad;
pub mod receivers;
pub mod tomography;

pub use error::{Error, Result};
