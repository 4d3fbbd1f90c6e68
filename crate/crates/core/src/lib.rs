//! Distorted-wave multiple scattering for one-electron multicenter potentials.
//!
//! Energies are in Rydberg and lengths in bohr, so the Schrödinger equation
//! reads `(∇² + E − V) ψ = 0`.

pub mod angular;
pub mod error;
pub mod green;
pub mod linalg;
pub mod msw;
pub mod potential;
pub mod quadrature;
pub mod radial;
pub mod run;
pub mod scatter;
pub mod specfun;
pub mod translate;

pub use error::{DwmsError, Result};
