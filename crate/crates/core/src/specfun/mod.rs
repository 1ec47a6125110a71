//! Special functions and quadrature shared by every solver: spherical
//! Bessel/Hankel functions, Neumann spectra of balls, real spherical
//! harmonics, and product quadrature on the sphere.

pub mod bessel;
pub mod harmonics;
pub mod quadrature;

pub use bessel::{jprime_zeros, sph_bessel, BesselKind};
pub use harmonics::{sph_harmonic, sph_harmonics_upto, HarmonicIndex};
pub use quadrature::{gauss_legendre, sphere_quadrature, SphereQuadrature};

use crate::error::{Error, Result};

/// One Neumann eigenfrequency branch of a ball: omega = beta_{l,n} / radius,
/// carried with its angular multiplicity 2l+1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannEigenvalue {
    pub ell: usize,
    pub n: usize,
    /// beta_{l,n}, the n-th positive zero of j_l'.
    pub beta: f64,
    /// beta / radius; multiply by the interior wave speed for a frequency.
    pub omega: f64,
    pub multiplicity: usize,
}

/// Sorted Neumann eigenfrequencies of a ball of the given radius, covering
/// degrees l <= ell_max and radial indices n <= n_max. Only positive zeros
/// enter; the trivial zero of j_0' at the origin is excluded.
pub fn neumann_ball_spectrum(
    radius: f64,
    ell_max: usize,
    n_max: usize,
) -> Result<Vec<NeumannEigenvalue>> {
    if radius <= 0.0 {
        return Err(Error::Domain("radius must be positive".into()));
    }
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let mut out = Vec::new();
    for ell in 0..=ell_max {
        for (i, beta) in jprime_zeros(ell, n_max).into_iter().enumerate() {
            out.push(NeumannEigenvalue {
                ell,
                n: i + 1,
                beta,
                omega: beta / radius,
                multiplicity: 2 * ell + 1,
            });
        }
    }
    out.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
    Ok(out)
}
