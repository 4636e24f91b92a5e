//! Numerical spectral calculus on the Heisenberg group H^d.
//!
//! The crate implements the radial group Fourier transform and its inverse,
//! the functional calculus of the sub-Laplacian (heat semigroup, fractional
//! powers), the explicit heat-kernel series, dyadic Littlewood-Paley blocks
//! with Besov/Sobolev norms, and a suite of numerical certification checks
//! (frequency-localized heat decay, heat characterization of Besov norms,
//! Bernstein ratios, refined Sobolev, maximal function) at desk scale.
//!
//! Physical-space grids are restricted to d = 1 (three dimensions); the
//! spectral side works for any d.

pub mod error;
pub mod families;
pub mod group;
pub mod heat;
pub mod io;
pub mod laguerre;
pub mod littlewood_paley;
pub mod quad;
pub mod report;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
