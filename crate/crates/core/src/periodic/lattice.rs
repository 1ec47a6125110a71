//! Bravais lattices, dual lattices and high-symmetry points.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// A 3D Bravais lattice with its dual (alpha_i . l_j = 2 pi delta_ij).
#[derive(Debug, Clone)]
pub struct Lattice3D {
    pub generators: [Vector3<f64>; 3],
    pub dual: [Vector3<f64>; 3],
    pub cell_volume: f64,
}

impl Lattice3D {
    pub fn new(generators: [Vector3<f64>; 3]) -> Result<Self> {
        let m = Matrix3::from_columns(&generators);
        let det = m.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::Domain("lattice generators must be linearly independent".into()));
        }
        let inv = m.try_inverse().expect("nonzero determinant");
        // rows of 2 pi M^-1 are the dual generators
        let dual = [
            2.0 * std::f64::consts::PI * Vector3::new(inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]),
            2.0 * std::f64::consts::PI * Vector3::new(inv[(1, 0)], inv[(1, 1)], inv[(1, 2)]),
            2.0 * std::f64::consts::PI * Vector3::new(inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]),
        ];
        for (i, d) in dual.iter().enumerate() {
            for (j, g) in generators.iter().enumerate() {
                let want = if i == j { 2.0 * std::f64::consts::PI } else { 0.0 };
                if (d.dot(g) - want).abs() > 1e-14 * (1.0 + d.norm() * g.norm()) {
                    return Err(Error::Domain("dual relation failed to verify".into()));
                }
            }
        }
        Ok(Self {
            generators,
            dual,
            cell_volume: det.abs(),
        })
    }

    pub fn cubic(a: f64) -> Self {
        Self::new([
            Vector3::new(a, 0.0, 0.0),
            Vector3::new(0.0, a, 0.0),
            Vector3::new(0.0, 0.0, a),
        ])
        .expect("cubic generators are independent")
    }

    /// Hexagonal in plane, one straight period out of plane.
    pub fn hexagonal_prism(a: f64, height: f64) -> Self {
        let s3 = 3.0f64.sqrt();
        Self::new([
            Vector3::new(s3 / 2.0 * a, a / 2.0, 0.0),
            Vector3::new(s3 / 2.0 * a, -a / 2.0, 0.0),
            Vector3::new(0.0, 0.0, height),
        ])
        .expect("hexagonal generators are independent")
    }

    pub fn lattice_point(&self, n: [i64; 3]) -> Vector3<f64> {
        self.generators[0] * n[0] as f64
            + self.generators[1] * n[1] as f64
            + self.generators[2] * n[2] as f64
    }

    pub fn dual_point(&self, n: [i64; 3]) -> Vector3<f64> {
        self.dual[0] * n[0] as f64 + self.dual[1] * n[1] as f64 + self.dual[2] * n[2] as f64
    }

    /// Cell center (l1 + l2 + l3) / 2.
    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.generators[0] + self.generators[1] + self.generators[2])
    }

    /// In-plane K corner of the hexagonal Brillouin zone, (alpha1 - alpha2)/3.
    pub fn hexagonal_k_point(&self) -> Vector3<f64> {
        (self.dual[0] - self.dual[1]) / 3.0
    }
}
