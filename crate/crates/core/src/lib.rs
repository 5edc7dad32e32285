//! Electron space-charge simulation above field-emitting cathodes.
//!
//! The crate couples a P1 finite-element solver on unstructured tetrahedral
//! meshes (vacuum electrostatics, metal current continuity and heat
//! conduction) with a superparticle engine for the emitted electrons.
//!
//! Everything is in SI units internally. The configuration layer
//! ([`config`]) accepts nanometres, femtoseconds, GV/m and eV and converts
//! on load.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod driver;
pub mod emission;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod oracle;
pub mod pic;
pub mod rng;
pub mod surface;
pub mod thermal;

pub use error::{Error, Result};

/// Cartesian vector used for positions, velocities and fields.
pub type Vec3 = nalgebra::Vector3<f64>;
