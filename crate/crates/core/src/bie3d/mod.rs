//! Galerkin discretization of the single-layer potential, the
//! Neumann-Poincare operator and the transmission block operator for finite
//! collections of spherical resonators.
//!
//! Convention: the outgoing Green function carries a negative sign,
//! G(x) = -exp(ik|x|)/(4pi|x|), and all complex-frequency continuations use
//! the outgoing Hankel branch h_l^(1).

mod assemble;
mod field;

pub use assemble::{
    assemble_a, assemble_layer_blocks, green_and_radial_derivative, AssemblyOptions,
    Discretization, LayerBlocks,
};
pub use field::{evaluate_field, single_layer_at};

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// One spherical resonator: geometry plus material parameters.
#[derive(Debug, Clone)]
pub struct Resonator {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Interior wave speed v_j.
    pub speed: f64,
    /// Relative contrast weight; the effective contrast is
    /// `delta_scale * contrast` when assembling the block operator.
    pub contrast: Complex64,
}

impl Resonator {
    pub fn new(center: [f64; 3], radius: f64, speed: f64, contrast: Complex64) -> Self {
        Self {
            center: Vector3::from(center),
            radius,
            speed,
            contrast,
        }
    }
}

/// Finite collection of pairwise disjoint spheres in a homogeneous background.
#[derive(Debug, Clone)]
pub struct SphereScene {
    pub background_speed: f64,
    pub resonators: Vec<Resonator>,
}

impl SphereScene {
    pub fn new(background_speed: f64, resonators: Vec<Resonator>) -> Result<Self> {
        if background_speed <= 0.0 {
            return Err(Error::Domain("background speed must be positive".into()));
        }
        if resonators.is_empty() {
            return Err(Error::Domain("scene needs at least one resonator".into()));
        }
        for (i, r) in resonators.iter().enumerate() {
            if r.radius <= 0.0 || r.speed <= 0.0 {
                return Err(Error::Domain(format!(
                    "resonator {i}: radius and speed must be positive"
                )));
            }
            for (j, s) in resonators.iter().enumerate().take(i) {
                let dist = (r.center - s.center).norm();
                if dist <= r.radius + s.radius {
                    return Err(Error::Domain(format!(
                        "resonators {j} and {i} are not disjoint (distance {dist})"
                    )));
                }
            }
        }
        Ok(Self {
            background_speed,
            resonators,
        })
    }

    /// Convenience constructor: one unit-contrast sphere at the origin.
    pub fn single(radius: f64, speed: f64, background_speed: f64) -> Self {
        Self::new(
            background_speed,
            vec![Resonator::new([0.0; 3], radius, speed, Complex64::new(1.0, 0.0))],
        )
        .expect("single sphere is always valid")
    }

    pub fn len(&self) -> usize {
        self.resonators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resonators.is_empty()
    }

    /// Exterior wavenumber k = omega / v.
    pub fn exterior_wavenumber(&self, omega: Complex64) -> Complex64 {
        omega / self.background_speed
    }

    /// Interior wavenumber k_j = omega / v_j.
    pub fn interior_wavenumber(&self, j: usize, omega: Complex64) -> Complex64 {
        omega / self.resonators[j].speed
    }
}

/// Dense Galerkin matrix of the block operator
/// [[S-tilde, -S], [-I/2 + K-tilde*, -delta (I/2 + K*)]]
/// in the real spherical-harmonic basis truncated at degree < `trunc`.
#[derive(Debug, Clone)]
pub struct BlockOperatorMatrix {
    pub omega: Complex64,
    pub delta_scale: Complex64,
    pub trunc: usize,
    pub entries: CMatrix,
}

impl BlockOperatorMatrix {
    /// Number of basis functions per density component (N * trunc^2).
    pub fn density_dim(&self) -> usize {
        self.entries.nrows() / 2
    }
}

/// Interior/exterior density coefficient pair (psi, phi).
#[derive(Debug, Clone)]
pub struct DensityPair {
    pub psi: CVector,
    pub phi: CVector,
}

impl DensityPair {
    pub fn from_stacked(x: &CVector) -> Self {
        let n = x.len() / 2;
        Self {
            psi: x.rows(0, n).into_owned(),
            phi: x.rows(n, n).into_owned(),
        }
    }
}
