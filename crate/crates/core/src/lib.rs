//! Energetic space-time Galerkin boundary elements for 2D elastodynamics.
//!
//! The single-layer (Dirichlet) and hypersingular (Neumann) formulations are
//! discretized with piecewise polynomials in space and piecewise constants in
//! time and marched in time. The `singular` module computes the singular
//! exponents that motivate graded meshes.

pub mod assembly;
pub mod basis;
pub mod error;
pub mod geom;
pub mod kernels;
pub mod model;
pub mod quadrature;
pub mod singular;
pub mod solver;

pub use error::{Error, Result};
