//! Darboux-transformed pseudospin-1 Dirac Hamiltonians with flat-band seeds,
//! and the Lieb-lattice tight-binding model they approximate.

pub mod algebra;
pub mod cases;
pub mod cli;
pub mod darboux;
pub mod error;
pub mod expoly;
pub mod free_model;
pub mod grid;
pub mod lattice;
pub mod ode;
pub mod scattering;
pub mod spectral;

pub type C64 = num_complex::Complex64;

pub use error::{Error, Result};
