//! Matrix assembly: analytic self-blocks, quadrature cross-blocks, and the
//! transmission block operator.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use super::{BlockOperatorMatrix, SphereScene};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::specfun::{sph_bessel, sph_harmonics_upto, sphere_quadrature, BesselKind, SphereQuadrature};

/// Galerkin matrices of the single layer and the Neumann-Poincare operator
/// at one wavenumber, over the whole boundary.
#[derive(Debug, Clone)]
pub struct LayerBlocks {
    pub single_layer: CMatrix,
    pub neumann_poincare: CMatrix,
}

#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    /// Quadrature exactness degree for cross-sphere blocks; default 2L+4.
    pub quad_exactness: Option<usize>,
    /// When set, cross blocks are re-assembled at a refined order and the
    /// relative change must stay below this tolerance.
    pub refinement_check: Option<f64>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            quad_exactness: None,
            refinement_check: None,
        }
    }
}

/// Precomputed quadrature/basis data for one scene at one truncation. All
/// wavenumber-dependent matrices are assembled from this cache, so repeated
/// evaluations (determinant scans, Muller iterations) stay cheap.
pub struct Discretization {
    pub scene: SphereScene,
    pub trunc: usize,
    pub quad: SphereQuadrature,
    /// Harmonic values at quadrature nodes, (nodes x trunc^2).
    basis: DMatrix<f64>,
    /// Per sphere: weighted basis U_j = diag(w * R_j) * basis.
    weighted_basis: Vec<DMatrix<f64>>,
    /// Per sphere: node positions on the boundary.
    node_positions: Vec<Vec<Vector3<f64>>>,
    /// Unit outward normals per node (shared by all spheres).
    normals: Vec<Vector3<f64>>,
}

impl Discretization {
    pub fn new(scene: &SphereScene, trunc: usize) -> Self {
        // cross-sphere kernels are smooth but not polynomial; the extra
        // margin keeps their Galerkin entries converged to ~1e-9 at
        // separations down to 1.5x the radius sum
        Self::with_exactness(scene, trunc, 2 * trunc + 18)
    }

    pub fn with_exactness(scene: &SphereScene, trunc: usize, exactness: usize) -> Self {
        assert!(trunc >= 1, "truncation degree must be at least 1");
        let quad = sphere_quadrature(exactness);
        let n_nodes = quad.len();
        let nb = trunc * trunc;
        let mut basis = DMatrix::zeros(n_nodes, nb);
        let mut normals = Vec::with_capacity(n_nodes);
        for p in 0..n_nodes {
            let (theta, phi) = quad.nodes[p];
            let ys = sph_harmonics_upto(trunc, theta, phi);
            for (b, y) in ys.into_iter().enumerate() {
                basis[(p, b)] = y;
            }
            normals.push(Vector3::from(quad.unit_vector(p)));
        }
        let mut weighted_basis = Vec::new();
        let mut node_positions = Vec::new();
        for res in &scene.resonators {
            let mut wb = basis.clone();
            for p in 0..n_nodes {
                let w = quad.weights[p] * res.radius;
                for b in 0..nb {
                    wb[(p, b)] *= w;
                }
            }
            weighted_basis.push(wb);
            node_positions.push(
                normals
                    .iter()
                    .map(|u| res.center + res.radius * u)
                    .collect(),
            );
        }
        Self {
            scene: scene.clone(),
            trunc,
            quad,
            basis,
            weighted_basis,
            node_positions,
            normals,
        }
    }

    pub fn density_dim(&self) -> usize {
        self.scene.len() * self.trunc * self.trunc
    }

    /// Harmonic values at the quadrature nodes (shared across spheres).
    pub fn basis_at_nodes(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn boundary_nodes(&self, sphere: usize) -> &[Vector3<f64>] {
        &self.node_positions[sphere]
    }

    /// Surface-measure quadrature weight of node `p` on `sphere`.
    pub fn surface_weight(&self, sphere: usize, p: usize) -> f64 {
        self.quad.weights[p] * self.scene.resonators[sphere].radius.powi(2)
    }

    /// Outward unit normal at node `p` (shared across spheres).
    pub fn normal(&self, p: usize) -> Vector3<f64> {
        self.normals[p]
    }

    /// Weighted basis U_j = diag(w R_j) B of sphere `j`.
    pub fn weighted_basis(&self, sphere: usize) -> &DMatrix<f64> {
        &self.weighted_basis[sphere]
    }

    /// Full single-layer Galerkin matrix S^k over the boundary.
    pub fn single_layer(&self, k: Complex64) -> CMatrix {
        self.layer_blocks(k).single_layer
    }

    /// Both layer operators at one wavenumber.
    pub fn layer_blocks(&self, k: Complex64) -> LayerBlocks {
        let n = self.scene.len();
        let nb = self.trunc * self.trunc;
        let dim = n * nb;
        let mut s = CMatrix::zeros(dim, dim);
        let mut kk = CMatrix::zeros(dim, dim);
        for i in 0..n {
            let (s_diag, k_diag) = self.self_block(k, i);
            for b in 0..nb {
                s[(i * nb + b, i * nb + b)] = s_diag[b];
                kk[(i * nb + b, i * nb + b)] = k_diag[b];
            }
            for j in 0..i {
                let (s_ij, s_ji, k_ij, k_ji) = self.cross_blocks(k, i, j);
                insert_block(&mut s, i * nb, j * nb, &s_ij);
                insert_block(&mut s, j * nb, i * nb, &s_ji);
                insert_block(&mut kk, i * nb, j * nb, &k_ij);
                insert_block(&mut kk, j * nb, i * nb, &k_ji);
            }
        }
        LayerBlocks {
            single_layer: s,
            neumann_poincare: kk,
        }
    }

    /// Analytic diagonal of the self-block: the single layer acts on the
    /// orthonormal harmonic b_{lm} = Y_{lm}/R with eigenvalue
    /// -i k R^2 j_l(kR) h_l(kR), and the Neumann-Poincare operator with
    /// 1/2 - i k^2 R^2 h_l(kR) j_l'(kR).
    fn self_block(&self, k: Complex64, sphere: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let radius = self.scene.resonators[sphere].radius;
        let z = k * radius;
        let r2 = radius * radius;
        let mut s = Vec::with_capacity(self.trunc * self.trunc);
        let mut kappa = Vec::with_capacity(self.trunc * self.trunc);
        for ell in 0..self.trunc {
            let (sv, kv) = if z.norm() < 1e-14 {
                // static limit of the negative-sign Green function
                (
                    Complex64::new(-radius / (2 * ell + 1) as f64, 0.0),
                    Complex64::new(0.5 - (ell as f64 + 1.0) / (2 * ell + 1) as f64, 0.0),
                )
            } else {
                let (j, jp) = sph_bessel(BesselKind::J, ell, z).expect("regular kind");
                let (h, _) = sph_bessel(BesselKind::H1, ell, z).expect("z != 0");
                let sv = -Complex64::I * k * r2 * j * h;
                let kv = Complex64::new(0.5, 0.0) - Complex64::I * k * k * r2 * h * jp;
                (sv, kv)
            };
            for _ in 0..(2 * ell + 1) {
                s.push(sv);
                kappa.push(kv);
            }
        }
        (s, kappa)
    }

    /// Quadrature cross-blocks between two distinct spheres, both directions
    /// at once so the kernel distances are evaluated a single time.
    fn cross_blocks(
        &self,
        k: Complex64,
        i: usize,
        j: usize,
    ) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
        let np = self.quad.len();
        let mut g = CMatrix::zeros(np, np);
        let mut dg_i = CMatrix::zeros(np, np); // d/dnu_x on sphere i
        let mut dg_j = CMatrix::zeros(np, np); // d/dnu_x on sphere j (transposed layout)
        for p in 0..np {
            let x = self.node_positions[i][p];
            let nu_x = self.normals[p];
            for q in 0..np {
                let y = self.node_positions[j][q];
                let d = x - y;
                let r = d.norm();
                let (gv, gp) = green_and_radial_derivative(k, r);
                g[(p, q)] = gv;
                dg_i[(p, q)] = gp * (nu_x.dot(&d) / r);
                dg_j[(p, q)] = gp * (self.normals[q].dot(&(-d)) / r);
            }
        }
        let ui = complexify(&self.weighted_basis[i]);
        let uj = complexify(&self.weighted_basis[j]);
        let s_ij = ui.transpose() * &g * &uj;
        let s_ji = s_ij.transpose();
        let k_ij = ui.transpose() * &dg_i * &uj;
        let k_ji = uj.transpose() * dg_j.transpose() * &ui;
        (s_ij, s_ji, k_ij, k_ji)
    }

    /// Interior piecewise operators: row-block j evaluates at wavenumber
    /// k_j = omega / v_j over the whole boundary.
    pub fn interior_layer_blocks(&self, omega: Complex64) -> LayerBlocks {
        self.interior_layer_blocks_reusing(omega, None)
    }

    /// Same, reusing already-assembled exterior blocks for any resonator
    /// whose interior wavenumber coincides with the exterior one.
    fn interior_layer_blocks_reusing(
        &self,
        omega: Complex64,
        exterior: Option<(Complex64, &LayerBlocks)>,
    ) -> LayerBlocks {
        let n = self.scene.len();
        let nb = self.trunc * self.trunc;
        let dim = n * nb;
        let mut s = CMatrix::zeros(dim, dim);
        let mut kk = CMatrix::zeros(dim, dim);
        for i in 0..n {
            let k_i = self.scene.interior_wavenumber(i, omega);
            if let Some((k_ext, blocks)) = exterior {
                if k_i == k_ext {
                    for c in 0..dim {
                        for b in 0..nb {
                            s[(i * nb + b, c)] = blocks.single_layer[(i * nb + b, c)];
                            kk[(i * nb + b, c)] = blocks.neumann_poincare[(i * nb + b, c)];
                        }
                    }
                    continue;
                }
            }
            let (s_diag, k_diag) = self.self_block(k_i, i);
            for b in 0..nb {
                s[(i * nb + b, i * nb + b)] = s_diag[b];
                kk[(i * nb + b, i * nb + b)] = k_diag[b];
            }
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (s_ij, _, k_ij, _) = self.cross_blocks(k_i, i, j);
                insert_block(&mut s, i * nb, j * nb, &s_ij);
                insert_block(&mut kk, i * nb, j * nb, &k_ij);
            }
        }
        LayerBlocks {
            single_layer: s,
            neumann_poincare: kk,
        }
    }

    /// Block operator A(omega, delta) of the transmission problem.
    pub fn assemble_a(&self, omega: Complex64, delta_scale: Complex64) -> BlockOperatorMatrix {
        let nb = self.trunc * self.trunc;
        let dim = self.density_dim();
        let k = self.scene.exterior_wavenumber(omega);
        let exterior = self.layer_blocks(k);
        let interior = self.interior_layer_blocks_reusing(omega, Some((k, &exterior)));
        let mut entries = CMatrix::zeros(2 * dim, 2 * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries[(r, c)] = interior.single_layer[(r, c)];
                entries[(r, dim + c)] = -exterior.single_layer[(r, c)];
                let mut lower_left = interior.neumann_poincare[(r, c)];
                if r == c {
                    lower_left -= 0.5;
                }
                entries[(dim + r, c)] = lower_left;
                // row block of sphere i carries delta_i
                let delta_i = delta_scale * self.scene.resonators[r / nb].contrast;
                let mut lower_right = exterior.neumann_poincare[(r, c)];
                if r == c {
                    lower_right += 0.5;
                }
                entries[(dim + r, dim + c)] = -delta_i * lower_right;
            }
        }
        BlockOperatorMatrix {
            omega,
            delta_scale,
            trunc: self.trunc,
            entries,
        }
    }
}

/// One-call assembly of the layer operators with optional refinement check.
pub fn assemble_layer_blocks(
    k: Complex64,
    scene: &SphereScene,
    trunc: usize,
    options: &AssemblyOptions,
) -> Result<LayerBlocks> {
    let exactness = options.quad_exactness.unwrap_or(2 * trunc + 18);
    let disc = Discretization::with_exactness(scene, trunc, exactness);
    let blocks = disc.layer_blocks(k);
    if let Some(tol) = options.refinement_check {
        let refined = Discretization::with_exactness(scene, trunc, exactness + 6).layer_blocks(k);
        let change = rel_change(&blocks.single_layer, &refined.single_layer)
            .max(rel_change(&blocks.neumann_poincare, &refined.neumann_poincare));
        if change > tol {
            return Err(Error::QuadratureNonConvergence { change, tol });
        }
    }
    Ok(blocks)
}

/// Block operator assembly through a fresh discretization; callers doing
/// sweeps should hold a [`Discretization`] instead.
pub fn assemble_a(
    omega: Complex64,
    scene: &SphereScene,
    trunc: usize,
    delta_scale: Complex64,
) -> BlockOperatorMatrix {
    Discretization::new(scene, trunc).assemble_a(omega, delta_scale)
}

fn rel_change(a: &CMatrix, b: &CMatrix) -> f64 {
    let denom = b.norm().max(1e-300);
    (a - b).norm() / denom
}

fn insert_block(m: &mut CMatrix, row: usize, col: usize, block: &CMatrix) {
    for r in 0..block.nrows() {
        for c in 0..block.ncols() {
            m[(row + r, col + c)] = block[(r, c)];
        }
    }
}

fn complexify(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Value and radial derivative of G(r) = -exp(ikr)/(4 pi r).
pub fn green_and_radial_derivative(k: Complex64, r: f64) -> (Complex64, Complex64) {
    let ikr = Complex64::I * k * r;
    let e = ikr.exp();
    let four_pi = 4.0 * std::f64::consts::PI;
    let value = -e / (four_pi * r);
    let derivative = e * (1.0 - ikr) / (four_pi * r * r);
    (value, derivative)
}
