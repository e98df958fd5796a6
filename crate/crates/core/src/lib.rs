//! Robust transmit covariance design for MIMO radar angle estimation when the
//! prior angle distribution is only approximately known.
//!
//! The pipeline is: [`array_model`] (steering and reflection matrices) →
//! [`prior_pdf`] (gridded priors and perturbations) → [`fisher_pcrb`]
//! (posterior Fisher information) → [`quad_model`] (quadratic surrogate in the
//! prior error) → [`robust_opt`] (SDP solve and worst-case oracle) →
//! [`experiments`] (sweeps, patterns, persistence).

pub mod array_model;
pub mod error;
pub mod experiments;
pub mod fisher_pcrb;
pub mod prior_pdf;
pub mod quad_model;
pub mod robust_opt;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
