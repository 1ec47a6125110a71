//! Numerical workbench for Fabry-Perot scattering resonances of high-contrast
//! resonators beyond the subwavelength regime.
//!
//! The crate is organized around a boundary-integral discretization of
//! collections of spherical resonators:
//!
//! - [`specfun`]: spherical Bessel/Hankel functions, ball Neumann spectra,
//!   real spherical harmonics, sphere quadrature.
//! - [`bie3d`]: Galerkin layer-potential matrices and the block operator of
//!   the transmission problem, plus field evaluation.
//! - [`nep`]: determinant scans, Muller iteration and resonance clusters.
//! - [`capmat`]: the frequency-dependent capacitance matrix, leading-order
//!   resonance/eigenmode predictions and diagnostics.
//! - [`oned`]: the one-dimensional DtN/ODE formulation with an exact
//!   transfer-matrix oracle.
//! - [`periodic`]: quasiperiodic Green functions (Ewald), Bloch bands,
//!   bandgap reports and honeycomb Dirac-cone analysis.

pub mod bie3d;
pub mod capmat;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod nep;
pub mod oned;
pub mod periodic;
pub mod specfun;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
