//! Fluid–rigid-body numerics in a periodic box: spectral fields, stream
//! functions, moving cut-offs, a penalized Navier–Stokes solver coupled to a
//! rigid body, and the vanishing-body limit harness.

pub mod biot_savart;
pub mod error;
pub mod cutoff;
pub mod fields;
pub mod fit;
pub mod limit;
pub mod modes;
pub mod rigid_body;
pub mod solver;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
