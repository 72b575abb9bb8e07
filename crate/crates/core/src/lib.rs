//! Numerical engine for continuous-variable teleportation with
//! photon-varying non-Gaussian operations.
//!
//! The engine works in the characteristic-function picture: Gaussian resource
//! states are K-mode covariance matrices, photon-varying operations act on
//! their characteristic functions through generalized multi-index Hermite
//! functions, and the teleportation channel multiplies the input CF by the
//! resource response function. Response-ratio functions measure, pointwise in
//! phase space, whether an operation reduces channel distortion; fidelities
//! follow from a two-dimensional overlap integral.
//!
//! Everything analytic is cross-validated against a truncated Fock-space
//! oracle ([`fock_oracle`]) that rebuilds the same states and operations by
//! direct matrix algebra.

pub mod error;
pub mod fock_oracle;
pub mod gaussian_states;
pub mod hermite;
pub mod numerics;
pub mod optimize;
pub mod pv_ops;
pub mod teleport;

pub use error::{Error, Result};
