//! Real orthonormal spherical harmonics.
//!
//! The basis is real-valued: Y_{l,0} is zonal, Y_{l,m>0} carries cos(m phi)
//! and Y_{l,-m} carries sin(m phi), all normalized to unit L^2 norm on the
//! unit sphere. A bilinear (unconjugated) pairing of two expansions is then
//! the plain dot product of their coefficient vectors.

use serde::{Deserialize, Serialize};

/// Degree/order pair (l, m) with |m| <= l.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub ell: usize,
    pub m: i64,
}

impl HarmonicIndex {
    pub fn new(ell: usize, m: i64) -> Self {
        assert!(m.unsigned_abs() as usize <= ell, "|m| <= l required");
        Self { ell, m }
    }

    /// Flat position within a truncation `l < L`; enumerates exactly L^2 pairs.
    pub fn flat(&self) -> usize {
        self.ell * self.ell + (self.m + self.ell as i64) as usize
    }

    /// Inverse of [`flat`](Self::flat).
    pub fn from_flat(idx: usize) -> Self {
        let ell = (idx as f64).sqrt() as usize;
        let m = idx as i64 - (ell * ell + ell) as i64;
        Self { ell, m }
    }

    /// All indices with `ell < trunc`, in flat order.
    pub fn enumerate(trunc: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..trunc * trunc).map(Self::from_flat)
    }
}

/// Orthonormalized associated Legendre values P̄_{l,m}(cos theta) for all
/// l < trunc at fixed m-agnostic normalization: Y_{l0} = P̄_{l0}.
/// Returned row-major as table[l][m] for 0 <= m <= l.
fn normalized_legendre_table(trunc: usize, cos_theta: f64, sin_theta: f64) -> Vec<Vec<f64>> {
    let mut p = vec![Vec::new(); trunc];
    if trunc == 0 {
        return p;
    }
    let inv_sqrt4pi = 0.5 / std::f64::consts::PI.sqrt();
    let mut pmm = inv_sqrt4pi;
    for (m, _) in (0..trunc).enumerate() {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
        }
        // fill column m upward in l
        let mut col = vec![0.0; trunc - m];
        col[0] = pmm;
        if m + 1 < trunc {
            col[1] = ((2 * m + 3) as f64).sqrt() * cos_theta * pmm;
        }
        for ell in (m + 2)..trunc {
            let a = ((4 * ell * ell - 1) as f64 / (ell * ell - m * m) as f64).sqrt();
            let b = (((ell - 1) * (ell - 1) - m * m) as f64
                / (4 * (ell - 1) * (ell - 1) - 1) as f64)
                .sqrt();
            col[ell - m] = a * (cos_theta * col[ell - m - 1] - b * col[ell - m - 2]);
        }
        for (i, v) in col.into_iter().enumerate() {
            let ell = m + i;
            if p[ell].is_empty() {
                p[ell] = vec![0.0; ell + 1];
            }
            p[ell][m] = v;
        }
    }
    p
}

/// Real orthonormal spherical harmonic at spherical angles (theta, phi).
pub fn sph_harmonic(idx: HarmonicIndex, theta: f64, phi: f64) -> f64 {
    assert!((0.0..=std::f64::consts::PI).contains(&theta), "0 <= theta <= pi");
    let table = normalized_legendre_table(idx.ell + 1, theta.cos(), theta.sin());
    let mabs = idx.m.unsigned_abs() as usize;
    let pbar = table[idx.ell][mabs];
    let sqrt2 = std::f64::consts::SQRT_2;
    match idx.m {
        0 => pbar,
        m if m > 0 => sqrt2 * pbar * (m as f64 * phi).cos(),
        m => sqrt2 * pbar * ((-m) as f64 * phi).sin(),
    }
}

/// All harmonics with l < trunc at one point, in flat order. Shares one
/// Legendre sweep, which is what the assembly loops want.
pub fn sph_harmonics_upto(trunc: usize, theta: f64, phi: f64) -> Vec<f64> {
    let table = normalized_legendre_table(trunc, theta.cos(), theta.sin());
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(trunc * trunc);
    for idx in HarmonicIndex::enumerate(trunc) {
        let mabs = idx.m.unsigned_abs() as usize;
        let pbar = table[idx.ell][mabs];
        out.push(match idx.m {
            0 => pbar,
            m if m > 0 => sqrt2 * pbar * (m as f64 * phi).cos(),
            m => sqrt2 * pbar * ((-m) as f64 * phi).sin(),
        });
    }
    out
}
