//! Quasiperiodic layer operators on the cell boundary, the exterior
//! quasiperiodic DtN map, the direct Bloch resonance solver, and Bloch mode
//! evaluation.

use nalgebra::Vector3;
use num_complex::Complex64;

use super::ewald::QuasiPeriodicContext;
use crate::bie3d::Discretization;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::nep::{ClusterConfig, ResonanceSet};
use crate::specfun::{sph_bessel, BesselKind};

/// Galerkin matrices of the quasiperiodic single layer and its normal
/// derivative operator (the K^{alpha,k,*} of the jump relations).
#[derive(Debug, Clone)]
pub struct QpOperators {
    pub single_layer: CMatrix,
    pub neumann_poincare: CMatrix,
}

/// Reject cells whose resonators collide with their own lattice images.
pub fn validate_cell_scene(ctx: &QuasiPeriodicContext, disc: &Discretization) -> Result<()> {
    let scene = &disc.scene;
    for s in 0..=1i64 {
        for n0 in -s..=s {
            for n1 in -s..=s {
                for n2 in -s..=s {
                    let shift = ctx.lattice.lattice_point([n0, n1, n2]);
                    for (i, a) in scene.resonators.iter().enumerate() {
                        for (j, b) in scene.resonators.iter().enumerate() {
                            if [n0, n1, n2] == [0, 0, 0] && i == j {
                                continue;
                            }
                            let dist = (a.center - (b.center + shift)).norm();
                            if dist <= a.radius + b.radius {
                                return Err(Error::Precondition(format!(
                                    "resonator {i} intersects image {:?} of resonator {j}",
                                    [n0, n1, n2]
                                )));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Assemble S^{alpha,k} and the quasiperiodic Neumann-Poincare operator:
/// free-space analytic parts plus smooth lattice corrections by quadrature.
pub fn assemble_qp_operators(
    ctx: &QuasiPeriodicContext,
    k: Complex64,
    disc: &Discretization,
) -> Result<QpOperators> {
    validate_cell_scene(ctx, disc)?;
    ctx.threshold_check(k)?;
    let free = disc.layer_blocks(k);
    let mut s = free.single_layer;
    let mut kk = free.neumann_poincare;
    let scene = &disc.scene;
    let nb = disc.trunc * disc.trunc;
    let np = disc.basis_at_nodes().nrows();
    for i in 0..scene.len() {
        for j in 0..scene.len() {
            // smooth correction kernel over the node pairs
            let mut corr_s = CMatrix::zeros(np, np);
            let mut corr_k = CMatrix::zeros(np, np);
            for p in 0..np {
                let x = disc.boundary_nodes(i)[p];
                let nu = disc.normal(p);
                for q in 0..np {
                    let y = disc.boundary_nodes(j)[q];
                    let d = x - y;
                    let (val, grad) = ctx.green_correction_with_gradient(&d, k)?;
                    corr_s[(p, q)] = val;
                    corr_k[(p, q)] =
                        grad[0] * nu[0] + grad[1] * nu[1] + grad[2] * nu[2];
                }
            }
            let ui = disc.weighted_basis(i).map(|v| Complex64::new(v, 0.0));
            let uj = disc.weighted_basis(j).map(|v| Complex64::new(v, 0.0));
            let block_s = ui.transpose() * &corr_s * &uj;
            let block_k = ui.transpose() * &corr_k * &uj;
            for r in 0..nb {
                for c in 0..nb {
                    s[(i * nb + r, j * nb + c)] += block_s[(r, c)];
                    kk[(i * nb + r, j * nb + c)] += block_k[(r, c)];
                }
            }
        }
    }
    Ok(QpOperators {
        single_layer: s,
        neumann_poincare: kk,
    })
}

/// Exterior quasiperiodic DtN as a Galerkin matrix,
/// (I/2 + K^{alpha,k,*}) (S^{alpha,k})^{-1}, with its condition estimate.
pub fn exterior_qp_dtn(
    ctx: &QuasiPeriodicContext,
    omega: Complex64,
    disc: &Discretization,
) -> Result<(CMatrix, f64)> {
    let k = disc.scene.exterior_wavenumber(omega);
    let ops = assemble_qp_operators(ctx, k, disc)?;
    let dim = ops.single_layer.nrows();
    let condition = crate::linalg::condition_estimate(&ops.single_layer);
    let lu = ops.single_layer.lu();
    let inv = lu
        .solve(&CMatrix::identity(dim, dim))
        .ok_or(Error::NearSingular {
            cond: condition,
            context: "quasiperiodic single layer".into(),
        })?;
    let mut half_plus_k = ops.neumann_poincare;
    for i in 0..dim {
        half_plus_k[(i, i)] += 0.5;
    }
    Ok((half_plus_k * inv, condition))
}

/// Apply the exterior quasiperiodic DtN to boundary trace coefficients.
pub fn exterior_qp_flux(
    ctx: &QuasiPeriodicContext,
    omega: Complex64,
    disc: &Discretization,
    traces: &[CVector],
) -> Result<Vec<CVector>> {
    let (dtn, cond) = exterior_qp_dtn(ctx, omega, disc)?;
    if cond > 1e12 {
        return Err(Error::NearSingular {
            cond,
            context: "quasiperiodic single layer (exterior Dirichlet pole?)".into(),
        });
    }
    Ok(traces.iter().map(|g| &dtn * g).collect())
}

/// Interior DtN of the cell resonators on the Galerkin space: diagonal with
/// ball symbols k_b j_l'(k_b R) / j_l(k_b R) per channel.
pub fn interior_dtn_matrix(disc: &Discretization, omega: Complex64) -> CMatrix {
    let scene = &disc.scene;
    let nb = disc.trunc * disc.trunc;
    let dim = disc.density_dim();
    let mut m = CMatrix::zeros(dim, dim);
    for (j, res) in scene.resonators.iter().enumerate() {
        let kb = omega / res.speed;
        for ell in 0..disc.trunc {
            let (jv, jp) = sph_bessel(BesselKind::J, ell, kb * res.radius).expect("regular kind");
            let symbol = kb * jp / jv;
            for mm in 0..(2 * ell + 1) {
                let idx = j * nb + ell * ell + mm;
                m[(idx, idx)] = symbol;
            }
        }
    }
    m
}

/// Real Bloch eigenfrequencies near omega0 from roots of
/// det(Lambda_in(omega) - delta Lambda_ext(alpha, omega)) by scan + Muller.
pub fn bloch_direct(
    ctx: &QuasiPeriodicContext,
    delta: f64,
    omega0: f64,
    disc: &Discretization,
    cfg: &ClusterConfig,
) -> Result<ResonanceSet> {
    let builder = |omega: Complex64| -> CMatrix {
        let interior = interior_dtn_matrix(disc, omega);
        match exterior_qp_dtn(ctx, omega, disc) {
            Ok((ext, _)) => interior - ext.map(|v| v * delta),
            // poison the determinant so scan points at thresholds are skipped
            Err(_) => CMatrix::zeros(disc.density_dim(), disc.density_dim()),
        }
    };
    let set = crate::nep::find_resonance_cluster(&builder, omega0, delta, cfg);
    for root in &set.values {
        if root.im.abs() > 1e-8 * omega0.max(1.0) {
            return Err(Error::NonConvergence(format!(
                "Bloch root {root} has a non-real part beyond tolerance"
            )));
        }
    }
    Ok(set)
}

/// Leading-order Bloch eigenmode: interior free-space single layer at
/// omega/v_b, exterior quasiperiodic single layer at omega/v, both applied to
/// the solves of the mixed trace.
pub fn evaluate_bloch_mode(
    ctx: &QuasiPeriodicContext,
    disc: &Discretization,
    modes: &crate::capmat::NeumannModeSet,
    coefficients: &CVector,
    omega: Complex64,
    points: &[Vector3<f64>],
) -> Result<Vec<Complex64>> {
    let scene = &disc.scene;
    let nb = disc.trunc * disc.trunc;
    let mut g = CVector::zeros(disc.density_dim());
    for q in 0..modes.len() {
        g += modes.trace_vector(q, scene, disc.trunc) * coefficients[q];
    }
    let kb = omega / scene.resonators[0].speed;
    let k = scene.exterior_wavenumber(omega);
    let psi = disc
        .interior_layer_blocks(omega)
        .single_layer
        .lu()
        .solve(&g)
        .ok_or(Error::NearSingular {
            cond: f64::INFINITY,
            context: "interior single layer".into(),
        })?;
    let qp = assemble_qp_operators(ctx, k, disc)?;
    let phi = qp
        .single_layer
        .lu()
        .solve(&g)
        .ok_or(Error::NearSingular {
            cond: f64::INFINITY,
            context: "quasiperiodic single layer".into(),
        })?;
    let _ = kb;
    let basis = disc.basis_at_nodes();
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let mut inside: Option<usize> = None;
        for (j, res) in scene.resonators.iter().enumerate() {
            let gap = (x - res.center).norm() - res.radius;
            if gap.abs() < 1e-6 * res.radius {
                return Err(Error::Precondition(format!(
                    "evaluation point {x:?} is within 1e-6 radius of boundary {j}"
                )));
            }
            if gap < 0.0 {
                inside = Some(j);
            }
        }
        let value = match inside {
            Some(_) => {
                // free-space interior single layer at the interior wavenumber
                crate::bie3d::single_layer_at(disc, kb, &psi, x)
            }
            None => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, res) in scene.resonators.iter().enumerate() {
                    let coeffs = phi.rows(j * nb, nb);
                    for (p, y) in disc.boundary_nodes(j).iter().enumerate() {
                        let mut dens = Complex64::new(0.0, 0.0);
                        for b in 0..nb {
                            dens += coeffs[b] * (basis[(p, b)] / res.radius);
                        }
                        let d = x - y;
                        acc += disc.surface_weight(j, p) * ctx.green(&d, k)? * dens;
                    }
                }
                acc
            }
        };
        out.push(value);
    }
    Ok(out)
}
