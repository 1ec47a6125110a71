//! The frequency-dependent capacitance matrix: Neumann mode bookkeeping,
//! exterior flux solves, leading-order resonance/eigenmode predictions, the
//! interior NtD residue verification, and norm-scaling diagnostics.
//!
//! Pairings are bilinear (no conjugation) throughout: the boundary basis is
//! real, so the symmetrized matrix scrC = 2 omega0 Dhat^-1 C is complex
//! symmetric rather than Hermitian.

use num_complex::Complex64;
use serde::Serialize;

use crate::bie3d::{DensityPair, Discretization, SphereScene};
use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::linalg::{eigen, hermitian_eigen, CMatrix, CVector};
use crate::specfun::{jprime_zeros, sph_bessel, BesselKind, HarmonicIndex};

/// One interior Neumann eigenmode of a ball resonator.
#[derive(Debug, Clone)]
pub struct NeumannMode {
    pub resonator: usize,
    pub idx: HarmonicIndex,
    /// Radial index n: beta is the n-th positive zero of j_l'.
    pub radial_index: usize,
    pub beta: f64,
    /// L^2(D_j) normalization constant of the eigenfunction.
    pub normalization: f64,
    /// Coefficient of the boundary trace in the orthonormal boundary basis;
    /// equals the L^2(boundary) norm of the trace.
    pub trace_coef: f64,
}

/// The index set I = {(j, l)} of eigenmodes resonant at omega0, with traces.
#[derive(Debug, Clone)]
pub struct NeumannModeSet {
    pub omega0: f64,
    pub modes: Vec<NeumannMode>,
}

impl NeumannModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Trace vector of mode `q` in the full boundary basis (dim N * L^2),
    /// supported on the owning sphere's block only.
    pub fn trace_vector(&self, q: usize, scene: &SphereScene, trunc: usize) -> CVector {
        let nb = trunc * trunc;
        let mut g = CVector::zeros(scene.len() * nb);
        let mode = &self.modes[q];
        assert!(
            mode.idx.ell < trunc,
            "truncation {trunc} does not resolve mode degree {}",
            mode.idx.ell
        );
        g[mode.resonator * nb + mode.idx.flat()] = Complex64::new(mode.trace_coef, 0.0);
        g
    }
}

/// L^2 normalization of j_l(beta r / R) Y over the ball:
/// 1 / sqrt(R^3/2 (j_l^2 - j_{l-1} j_{l+1})(beta)).
fn ball_mode_normalization(ell: usize, beta: f64, radius: f64) -> f64 {
    let z = Complex64::new(beta, 0.0);
    let j = sph_bessel(BesselKind::J, ell, z).unwrap().0.re;
    let jm = if ell == 0 {
        beta.cos() / beta // j_{-1}
    } else {
        sph_bessel(BesselKind::J, ell - 1, z).unwrap().0.re
    };
    let jp = sph_bessel(BesselKind::J, ell + 1, z).unwrap().0.re;
    let integral = radius.powi(3) / 2.0 * (j * j - jm * jp);
    1.0 / integral.sqrt()
}

/// Identify all resonator modes resonant at omega0 (relative tolerance 1e-8)
/// and compute their boundary traces analytically.
pub fn neumann_modes(scene: &SphereScene, omega0: f64) -> Result<NeumannModeSet> {
    const TOL: f64 = 1e-8;
    const ELL_SCAN: usize = 24;
    const N_SCAN: usize = 12;
    let mut modes = Vec::new();
    let mut nearest = f64::INFINITY;
    let mut nearest_desc = String::new();
    for (j, res) in scene.resonators.iter().enumerate() {
        for ell in 0..=ELL_SCAN {
            for (i, beta) in jprime_zeros(ell, N_SCAN).into_iter().enumerate() {
                let omega = res.speed * beta / res.radius;
                let rel = (omega - omega0).abs() / omega0.abs().max(1e-300);
                if rel <= TOL {
                    let normalization = ball_mode_normalization(ell, beta, res.radius);
                    let jval = sph_bessel(BesselKind::J, ell, Complex64::new(beta, 0.0))
                        .unwrap()
                        .0
                        .re;
                    let trace_coef = normalization * jval * res.radius;
                    for m in -(ell as i64)..=(ell as i64) {
                        modes.push(NeumannMode {
                            resonator: j,
                            idx: HarmonicIndex::new(ell, m),
                            radial_index: i + 1,
                            beta,
                            normalization,
                            trace_coef,
                        });
                    }
                } else if (omega - omega0).abs() < nearest {
                    nearest = (omega - omega0).abs();
                    nearest_desc =
                        format!("omega = {omega:.6} (resonator {j}, l = {ell}, n = {})", i + 1);
                }
            }
        }
    }
    if modes.is_empty() {
        return Err(Error::Precondition(format!(
            "no resonator is Neumann-resonant at omega0 = {omega0}; nearest is {nearest_desc}"
        )));
    }
    Ok(NeumannModeSet { omega0, modes })
}

/// Exterior Dirichlet solver at a fixed wavenumber: one LU factorization of
/// the single-layer matrix, reused read-only across flux columns.
pub struct ExteriorSolver {
    pub k0: Complex64,
    pub condition: f64,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    half_plus_k: CMatrix,
}

impl ExteriorSolver {
    pub fn new(disc: &Discretization, k0: Complex64) -> Result<Self> {
        let blocks = disc.layer_blocks(k0);
        let s = blocks.single_layer;
        let condition = crate::linalg::condition_estimate(&s);
        if condition > 1e12 {
            return Err(Error::NearSingular {
                cond: condition,
                context: "exterior single layer".into(),
            });
        }
        let dim = s.nrows();
        let mut half_plus_k = blocks.neumann_poincare;
        for i in 0..dim {
            half_plus_k[(i, i)] += 0.5;
        }
        Ok(Self {
            k0,
            condition,
            lu: s.lu(),
            half_plus_k,
        })
    }

    /// Outward flux of the outgoing exterior Dirichlet extension of `g`:
    /// (I/2 + K^{k0,*}) (S^{k0})^{-1} g.
    pub fn flux(&self, g: &CVector) -> Result<CVector> {
        let xi = self.lu.solve(g).ok_or_else(|| Error::NearSingular {
            cond: f64::INFINITY,
            context: "exterior single layer solve".into(),
        })?;
        Ok(&self.half_plus_k * xi)
    }
}

/// Flux of the outgoing exterior extension of `g` through a fresh solver.
pub fn exterior_normal_derivative(
    g: &CVector,
    k0: Complex64,
    scene: &SphereScene,
    trunc: usize,
) -> Result<CVector> {
    let disc = Discretization::new(scene, trunc);
    ExteriorSolver::new(&disc, k0)?.flux(g)
}

/// The frequency-dependent capacitance matrix C(omega0), its symmetrized
/// companion scrC with C = (1/2 omega0) Dhat scrC, and the weights Dhat.
#[derive(Debug, Clone)]
pub struct CapacitanceMatrix {
    pub omega0: f64,
    pub modes: NeumannModeSet,
    pub matrix: CMatrix,
    pub symmetrized: CMatrix,
    pub dhat: Vec<Complex64>,
}

impl CapacitanceMatrix {
    /// Relative complex-symmetry defect of scrC.
    pub fn symmetry_defect(&self) -> f64 {
        let s = &self.symmetrized;
        (s - s.transpose()).norm() / s.norm().max(1e-300)
    }
}

/// Assemble C(omega0); delta_scale multiplies every per-resonator contrast.
pub fn capacitance_matrix(
    omega0: f64,
    scene: &SphereScene,
    trunc: usize,
    delta_scale: Complex64,
) -> Result<CapacitanceMatrix> {
    let disc = Discretization::new(scene, trunc);
    capacitance_matrix_with(&disc, omega0, delta_scale)
}

/// Same, reusing a prepared discretization (and hence its quadrature),
/// matching the operators a determinant scan at the same truncation sees.
pub fn capacitance_matrix_with(
    disc: &Discretization,
    omega0: f64,
    delta_scale: Complex64,
) -> Result<CapacitanceMatrix> {
    let scene = &disc.scene;
    let modes = neumann_modes(scene, omega0)?;
    let k0 = scene.exterior_wavenumber(Complex64::new(omega0, 0.0));
    let solver = ExteriorSolver::new(disc, k0)?;
    capacitance_from_traces(disc, &solver, modes, omega0, delta_scale)
}

/// Core assembly from explicit traces; exposed so degenerate bases can be
/// re-mixed and pushed through the same solve path.
pub fn capacitance_from_traces(
    disc: &Discretization,
    solver: &ExteriorSolver,
    modes: NeumannModeSet,
    omega0: f64,
    delta_scale: Complex64,
) -> Result<CapacitanceMatrix> {
    let scene = &disc.scene;
    let m = modes.len();
    let traces: Vec<CVector> = (0..m)
        .map(|q| modes.trace_vector(q, scene, disc.trunc))
        .collect();
    let mut scr = CMatrix::zeros(m, m);
    for q in 0..m {
        let flux = solver.flux(&traces[q])?;
        for p in 0..m {
            // bilinear pairing: real orthonormal basis, no conjugation
            let pair: Complex64 = traces[p].iter().zip(flux.iter()).map(|(a, b)| a * b).sum();
            scr[(p, q)] = -pair;
        }
    }
    let dhat: Vec<Complex64> = modes
        .modes
        .iter()
        .map(|md| {
            let res = &scene.resonators[md.resonator];
            delta_scale * res.contrast * res.speed * res.speed
        })
        .collect();
    let mut matrix = scr.clone();
    for p in 0..m {
        for q in 0..m {
            matrix[(p, q)] = dhat[p] / (2.0 * omega0) * scr[(p, q)];
        }
    }
    Ok(CapacitanceMatrix {
        omega0,
        modes,
        matrix,
        symmetrized: scr,
        dhat,
    })
}

/// Leading-order predictions omega0 + lambda_i(C) with eigenvectors and a
/// Jordan-structure estimate per eigenvalue.
#[derive(Debug, Clone)]
pub struct LeadingOrderPrediction {
    pub omega0: f64,
    pub eigenvalues: Vec<Complex64>,
    pub predictions: Vec<Complex64>,
    /// Columns are eigenvectors matching `eigenvalues`.
    pub eigenvectors: CMatrix,
    /// Largest Jordan block size of the cluster each eigenvalue belongs to.
    pub jordan_q: Vec<usize>,
}

pub fn leading_resonances(cap: &CapacitanceMatrix) -> Result<LeadingOrderPrediction> {
    let c = &cap.matrix;
    let e = eigen(c)?;
    let scale = crate::linalg::matrix_norm(c).max(1e-300);
    let tol = 1e-8 * scale;
    let m = c.nrows();
    let mut jordan_q = vec![1usize; m];
    let mut visited = vec![false; m];
    for i in 0..m {
        if visited[i] {
            continue;
        }
        let cluster: Vec<usize> = (0..m)
            .filter(|&j| (e.values[j] - e.values[i]).norm() <= tol)
            .collect();
        let alg = cluster.len();
        let mut shifted = c.clone();
        for d in 0..m {
            shifted[(d, d)] -= e.values[i];
        }
        // largest Jordan block: first power at which the rank stops dropping
        let mut q = 1usize;
        let mut power = shifted.clone();
        let mut rank_prev = crate::linalg::numerical_rank(&power, tol);
        for p in 2..=alg {
            power = &power * &shifted;
            let rank = crate::linalg::numerical_rank(&power, tol * scale.powi(p as i32 - 1));
            if rank == rank_prev {
                break;
            }
            rank_prev = rank;
            q = p;
        }
        for &j in &cluster {
            visited[j] = true;
            jordan_q[j] = q;
        }
    }
    let predictions = e
        .values
        .iter()
        .map(|l| Complex64::new(cap.omega0, 0.0) + l)
        .collect();
    Ok(LeadingOrderPrediction {
        omega0: cap.omega0,
        eigenvalues: e.values,
        predictions,
        eigenvectors: e.vectors,
        jordan_q,
    })
}

/// Leading-order eigenmode per the layer ansatz: interior S-tilde^{omega0},
/// exterior S^{k0}, both applied to the solve of the mixed trace
/// g_a = sum_q a_q g_q. The coefficient vector must have unit norm.
pub fn eigenmode_leading(
    disc: &Discretization,
    modes: &NeumannModeSet,
    coefficients: &CVector,
    points: &[nalgebra::Vector3<f64>],
) -> Result<Vec<Complex64>> {
    let norm = coefficients.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!(
            "eigenvector must be normalized to 1 (got {norm})"
        )));
    }
    let scene = &disc.scene;
    let omega0 = Complex64::new(modes.omega0, 0.0);
    let m = modes.len();
    let mut g = CVector::zeros(disc.density_dim());
    for q in 0..m {
        g += modes.trace_vector(q, scene, disc.trunc) * coefficients[q];
    }
    let k0 = scene.exterior_wavenumber(omega0);
    let phi = disc
        .layer_blocks(k0)
        .single_layer
        .lu()
        .solve(&g)
        .ok_or_else(|| Error::NearSingular {
            cond: f64::INFINITY,
            context: "exterior single layer".into(),
        })?;
    let psi = disc
        .interior_layer_blocks(omega0)
        .single_layer
        .lu()
        .solve(&g)
        .ok_or_else(|| Error::NearSingular {
            cond: f64::INFINITY,
            context: "interior single layer".into(),
        })?;
    let dens = DensityPair { psi, phi };
    crate::bie3d::evaluate_field(disc, &dens, omega0, points)
}

/// Interior NtD residue verification on a single resonator: the limit
/// (omega - omega0) NtD_l(omega) per harmonic channel by Richardson
/// extrapolation of the analytic ball symbol, against -Pi_{omega0}.
#[derive(Debug, Clone, Serialize)]
pub struct ResidueCheck {
    pub omega0: f64,
    /// Relative error on the resonant channel.
    pub max_rel_error: f64,
    /// Largest extracted residue on non-resonant channels (should be ~0).
    pub max_offchannel_residue: f64,
}

pub fn interior_ntd_residue_check(omega0: f64, scene: &SphereScene) -> Result<ResidueCheck> {
    if scene.len() != 1 {
        return Err(Error::Precondition(
            "residue check needs a single-resonator scene".into(),
        ));
    }
    let res = &scene.resonators[0];
    let modes = neumann_modes(scene, omega0)?;
    let resonant_ell = modes.modes[0].idx.ell;
    let v = res.speed;
    let radius = res.radius;
    let ntd = |ell: usize, omega: f64| -> Complex64 {
        let kb = Complex64::new(omega / v, 0.0);
        let (j, jp) = sph_bessel(BesselKind::J, ell, kb * radius).unwrap();
        j / (kb * jp)
    };
    let richardson = |ell: usize| -> Complex64 {
        let h = 1e-5 * omega0;
        let e = |h: f64| Complex64::new(h, 0.0) * ntd(ell, omega0 + h);
        let (e1, e2, e3) = (e(h), e(h / 2.0), e(h / 4.0));
        let r1 = 2.0 * e2 - e1;
        let r2 = 2.0 * e3 - e2;
        (4.0 * r2 - r1) / 3.0
    };
    let t = modes.modes[0].trace_coef;
    let formula = Complex64::new(-(v * v) / (2.0 * omega0) * t * t, 0.0);
    let numeric = richardson(resonant_ell);
    let max_rel = (numeric - formula).norm() / formula.norm();
    let mut max_off = 0.0f64;
    for ell in 0..=resonant_ell + 2 {
        if ell == resonant_ell {
            continue;
        }
        max_off = max_off.max(richardson(ell).norm());
    }
    Ok(ResidueCheck {
        omega0,
        max_rel_error: max_rel,
        max_offchannel_residue: max_off,
    })
}

/// H^s norm of a single-harmonic trace on a sphere of the given radius,
/// through the Laplace-Beltrami multiplier (1 + l(l+1)/R^2)^{s/2}.
pub fn trace_hs_norm(trace_coef: f64, ell: usize, radius: f64, s: f64) -> f64 {
    (1.0 + (ell * (ell + 1)) as f64 / (radius * radius)).powf(s / 2.0) * trace_coef.abs()
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub frequencies: Vec<f64>,
    pub symmetry_defects: Vec<f64>,
    pub scr_norms: Vec<f64>,
    /// Fitted exponent of ||scrC(omega)|| against (1 + omega / v_min).
    pub scr_norm_exponent: f64,
    /// Fitted exponents of the trace H^s norms for s in {0, 1/2, 1}.
    pub trace_exponents: [f64; 3],
    /// Uniform-regime indicator delta (1 + k0) per frequency.
    pub uniform_indicator: Vec<f64>,
    pub delta: f64,
}

/// Norm-scaling diagnostics across a list of ball Neumann frequencies.
pub fn diagnostics(
    scene: &SphereScene,
    frequencies: &[f64],
    delta: f64,
) -> Result<DiagnosticsReport> {
    if frequencies.len() < 4 {
        return Err(Error::Precondition(
            "diagnostics fit needs at least 4 frequencies".into(),
        ));
    }
    let v_min = scene
        .resonators
        .iter()
        .map(|r| r.speed)
        .fold(f64::INFINITY, f64::min);
    let mut defects = Vec::new();
    let mut norms = Vec::new();
    let mut xs = Vec::new();
    let mut trace_norms = [Vec::new(), Vec::new(), Vec::new()];
    let mut indicator = Vec::new();
    for &omega0 in frequencies {
        let probe = neumann_modes(scene, omega0)?;
        let ell = probe.modes.iter().map(|m| m.idx.ell).max().unwrap();
        let trunc = ell + 2;
        let disc = Discretization::new(scene, trunc);
        let cap = capacitance_matrix_with(&disc, omega0, Complex64::new(1.0, 0.0))?;
        defects.push(cap.symmetry_defect());
        norms.push(crate::linalg::matrix_norm(&cap.symmetrized));
        xs.push(1.0 + omega0 / v_min);
        let lead = &cap.modes.modes[0];
        let radius = scene.resonators[lead.resonator].radius;
        for (i, s) in [0.0, 0.5, 1.0].into_iter().enumerate() {
            trace_norms[i].push(trace_hs_norm(lead.trace_coef, lead.idx.ell, radius, s));
        }
        let k0 = omega0 / scene.background_speed;
        indicator.push(delta * (1.0 + k0));
    }
    let (scr_norm_exponent, _) = loglog_slope(&xs, &norms);
    let mut trace_exponents = [0.0; 3];
    for i in 0..3 {
        let (slope, _) = loglog_slope(&xs, &trace_norms[i]);
        trace_exponents[i] = slope;
    }
    Ok(DiagnosticsReport {
        frequencies: frequencies.to_vec(),
        symmetry_defects: defects,
        scr_norms: norms,
        scr_norm_exponent,
        trace_exponents,
        uniform_indicator: indicator,
        delta,
    })
}

/// Set distance between eig(C) and eig((1/2 omega0) Dhat^{1/2} scrC Dhat^{1/2}),
/// relative to ||C||; the similarity of the two forms makes this ~0.
pub fn similarity_defect(cap: &CapacitanceMatrix) -> f64 {
    let m = cap.matrix.nrows();
    let mut sym = CMatrix::zeros(m, m);
    for p in 0..m {
        for q in 0..m {
            sym[(p, q)] = cap.dhat[p].sqrt() * cap.symmetrized[(p, q)] * cap.dhat[q].sqrt()
                / (2.0 * cap.omega0);
        }
    }
    let a = crate::linalg::eigenvalues(&cap.matrix);
    let b = crate::linalg::eigenvalues(&sym);
    let scale = crate::linalg::matrix_norm(&cap.matrix).max(1e-300);
    crate::nep::hausdorff(&a, &b).unwrap_or(f64::INFINITY) / scale
}

/// Hermitian eigen-decomposition passthrough for callers working with the
/// quasiperiodic (Hermitian) variants.
pub fn hermitian_capacitance_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    hermitian_eigen(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bie3d::Resonator;
    use crate::specfun::{sph_harmonic, sphere_quadrature};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const OMEGA1: f64 = 2.0815759778181017; // first zero of j_1'

    fn dimer(d: f64, delta: Complex64) -> SphereScene {
        SphereScene::new(
            1.0,
            vec![
                Resonator::new([0.0, 0.0, 0.0], 1.0, 1.0, delta),
                Resonator::new([0.0, 0.0, d], 1.0, 1.0, delta),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_ball_mode_count() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        assert_eq!(modes.len(), 3);
        assert!(modes.modes.iter().all(|m| m.idx.ell == 1));
    }

    #[test]
    fn dimer_mode_count_and_support() {
        let scene = dimer(3.5, c(1.0, 0.0));
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        assert_eq!(modes.len(), 6);
        let trunc = 4;
        for q in 0..6 {
            let g = modes.trace_vector(q, &scene, trunc);
            let nb = trunc * trunc;
            let owner = modes.modes[q].resonator;
            for i in 0..g.len() {
                if i / nb != owner {
                    assert_eq!(g[i], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn no_resonance_names_nearest() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let err = neumann_modes(&scene, 2.5).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("nearest"), "{msg}");
    }

    #[test]
    fn trace_norm_matches_surface_quadrature() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        let md = &modes.modes[0];
        let quad = sphere_quadrature(16);
        let mut norm2 = 0.0;
        for (node, &w) in quad.nodes.iter().zip(&quad.weights) {
            let y = sph_harmonic(md.idx, node.0, node.1);
            let trace = md.normalization
                * sph_bessel(BesselKind::J, md.idx.ell, c(md.beta, 0.0))
                    .unwrap()
                    .0
                    .re
                * y;
            norm2 += w * trace * trace; // radius 1: dsigma = dOmega
        }
        assert_relative_eq!(norm2.sqrt(), md.trace_coef.abs(), max_relative = 1e-10);
    }

    #[test]
    fn exterior_flux_matches_sphere_dtn_symbol() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let trunc = 4;
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        let g = modes.trace_vector(0, &scene, trunc);
        let k0 = c(OMEGA1, 0.0);
        let flux = exterior_normal_derivative(&g, k0, &scene, trunc).unwrap();
        let (h, hp) = sph_bessel(BesselKind::H1, 1, k0).unwrap();
        let symbol = k0 * hp / h;
        for i in 0..g.len() {
            let expect = symbol * g[i];
            assert!(
                (flux[i] - expect).norm() <= 1e-10 * symbol.norm() * g.norm(),
                "slot {i}: {} vs {expect}",
                flux[i]
            );
        }
    }

    #[test]
    fn zero_trace_zero_flux() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let g = CVector::zeros(9);
        let flux = exterior_normal_derivative(&g, c(1.0, 0.0), &scene, 3).unwrap();
        assert!(flux.norm() == 0.0);
    }

    #[test]
    fn radiation_loss_sign() {
        // real trace at real k0: the bilinear pairing <flux, g> has positive
        // imaginary part, equivalently the conjugated radiation-identity
        // pairing <g, conj flux> is negative
        for scene in [SphereScene::single(1.0, 1.0, 1.0), dimer(3.5, c(1.0, 0.0))] {
            let trunc = 4;
            let modes = neumann_modes(&scene, OMEGA1).unwrap();
            let g = modes.trace_vector(0, &scene, trunc);
            let flux = exterior_normal_derivative(&g, c(OMEGA1, 0.0), &scene, trunc).unwrap();
            let pairing: Complex64 = g.iter().zip(flux.iter()).map(|(a, b)| a * b).sum();
            assert!(pairing.im > 0.0, "Im pairing = {}", pairing.im);
        }
    }

    #[test]
    fn single_ball_capacitance_closed_form() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let delta = c(1e-3, 0.0);
        let cap = capacitance_matrix(OMEGA1, &scene, 4, delta).unwrap();
        assert_eq!(cap.matrix.nrows(), 3);
        let t = cap.modes.modes[0].trace_coef;
        let (h, hp) = sph_bessel(BesselKind::H1, 1, c(OMEGA1, 0.0)).unwrap();
        let expect = -delta / (2.0 * OMEGA1) * t * t * OMEGA1 * hp / h;
        for p in 0..3 {
            for q in 0..3 {
                if p == q {
                    assert!(
                        (cap.matrix[(p, q)] - expect).norm() < 1e-10 * expect.norm(),
                        "{} vs {expect}",
                        cap.matrix[(p, q)]
                    );
                } else {
                    assert!(cap.matrix[(p, q)].norm() < 1e-12 * expect.norm());
                }
            }
        }
    }

    #[test]
    fn monopole_branch_capacitance_is_1x1() {
        // background speed detuned: at v = v_b the l=0 Neumann frequencies
        // of the ball coincide with interior Dirichlet eigenvalues (zeros of
        // j_1), where the single-layer representation degenerates
        let scene = SphereScene::single(1.0, 1.0, 2.0);
        let omega0 = 4.493409457909064; // l=0 branch
        let cap = capacitance_matrix(omega0, &scene, 3, c(1e-3, 0.0)).unwrap();
        assert_eq!(cap.matrix.nrows(), 1);
        assert_eq!(cap.symmetry_defect(), 0.0);
    }

    #[test]
    fn dirichlet_coincidence_reports_near_singular() {
        // matched speeds at the l=0 branch: S^{k0} is singular and the
        // exterior solver must refuse with a condition estimate
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let omega0 = 4.493409457909064;
        let err = capacitance_matrix(omega0, &scene, 3, c(1e-3, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. }), "{err}");
    }

    #[test]
    fn dimer_symmetrized_matrix_is_complex_symmetric() {
        let scene = dimer(3.5, c(1.0, 0.0));
        let cap = capacitance_matrix(OMEGA1, &scene, 5, c(1e-3, 0.0)).unwrap();
        assert!(
            cap.symmetry_defect() <= 1e-8,
            "defect {}",
            cap.symmetry_defect()
        );
    }

    #[test]
    fn capacitance_scales_linearly_in_delta() {
        let scene = dimer(3.5, c(1.0, 0.0));
        let cap1 = capacitance_matrix(OMEGA1, &scene, 4, c(1e-3, 0.0)).unwrap();
        let cap2 = capacitance_matrix(OMEGA1, &scene, 4, c(2e-3, 0.0)).unwrap();
        for p in 0..6 {
            for q in 0..6 {
                let d = (cap2.matrix[(p, q)] - 2.0 * cap1.matrix[(p, q)]).norm();
                assert!(d <= 1e-14 * cap1.matrix[(p, q)].norm().max(1e-300));
            }
        }
    }

    #[test]
    fn spectrum_similarity() {
        let scene = dimer(3.5, c(1.0, 0.0));
        let cap = capacitance_matrix(OMEGA1, &scene, 4, c(1e-3, 0.0)).unwrap();
        assert!(similarity_defect(&cap) < 1e-10);
    }

    #[test]
    fn zero_capacitance_predicts_omega0() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let cap = capacitance_matrix(OMEGA1, &scene, 3, c(0.0, 0.0)).unwrap();
        let lead = leading_resonances(&cap).unwrap();
        for p in lead.predictions {
            assert!((p - c(OMEGA1, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_ball_three_equal_predictions() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let cap = capacitance_matrix(OMEGA1, &scene, 4, c(1e-3, 0.0)).unwrap();
        let lead = leading_resonances(&cap).unwrap();
        for w in lead.predictions.windows(2) {
            assert!((w[0] - w[1]).norm() < 1e-12);
        }
        assert!(lead.predictions[0].im < 0.0, "radiation loss sign");
    }

    #[test]
    fn predictions_invariant_under_degenerate_basis_rotation() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let trunc = 4;
        let disc = Discretization::new(&scene, trunc);
        let cap = capacitance_matrix_with(&disc, OMEGA1, c(1e-3, 0.0)).unwrap();
        let lead = leading_resonances(&cap).unwrap();

        let axis = nalgebra::Unit::new_normalize(nalgebra::Vector3::new(0.3, -1.2, 0.7));
        let rot = nalgebra::Rotation3::from_axis_angle(&axis, 0.83);
        let solver = ExteriorSolver::new(&disc, c(OMEGA1, 0.0)).unwrap();
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        let base: Vec<CVector> = (0..3)
            .map(|q| modes.trace_vector(q, &scene, trunc))
            .collect();
        let mixed: Vec<CVector> = (0..3)
            .map(|p| {
                let mut v = CVector::zeros(base[0].len());
                for q in 0..3 {
                    v += &base[q] * c(rot[(q, p)], 0.0);
                }
                v
            })
            .collect();
        let mut scr = CMatrix::zeros(3, 3);
        for q in 0..3 {
            let flux = solver.flux(&mixed[q]).unwrap();
            for p in 0..3 {
                let pair: Complex64 = mixed[p].iter().zip(flux.iter()).map(|(a, b)| a * b).sum();
                scr[(p, q)] = -pair;
            }
        }
        let delta = c(1e-3, 0.0);
        let cmat = scr.map(|v| v * delta / (2.0 * OMEGA1));
        let rotated = crate::linalg::eigenvalues(&cmat);
        let d = crate::nep::hausdorff(&rotated, &lead.eigenvalues).unwrap();
        let scale = crate::linalg::matrix_norm(&cmat).max(1e-300);
        assert!(d < 1e-10 * scale.max(1e-4), "set distance {d}");
    }

    #[test]
    fn eigenmode_interior_shape_single_ball() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let trunc = 4;
        // fine rule so the quadrature field evaluation at ~0.25R off the
        // boundary does not limit the comparison
        let disc = Discretization::with_exactness(&scene, trunc, 90);
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        let mut a = CVector::zeros(3);
        a[0] = c(1.0, 0.0);
        let md = &modes.modes[0];
        let dirs = [
            nalgebra::Vector3::new(0.6, 0.2, 0.4),
            nalgebra::Vector3::new(-0.3, 0.5, 0.1),
            nalgebra::Vector3::new(0.1, -0.4, 0.55),
        ];
        let pts: Vec<_> = dirs.to_vec();
        let vals = eigenmode_leading(&disc, &modes, &a, &pts).unwrap();
        let reference: Vec<Complex64> = pts
            .iter()
            .map(|p| {
                let r = p.norm();
                let theta = (p.z / r).acos();
                let phi = p.y.atan2(p.x);
                let jr = sph_bessel(BesselKind::J, 1, c(md.beta * r, 0.0)).unwrap().0;
                jr * sph_harmonic(md.idx, theta, phi)
            })
            .collect();
        let ratio0 = vals[0] / reference[0];
        for i in 1..pts.len() {
            let ratio = vals[i] / reference[i];
            assert!(
                (ratio - ratio0).norm() < 1e-6 * ratio0.norm(),
                "{ratio} vs {ratio0}"
            );
        }
    }

    #[test]
    fn eigenmode_rejects_unnormalized() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let disc = Discretization::new(&scene, 3);
        let modes = neumann_modes(&scene, OMEGA1).unwrap();
        let a = CVector::zeros(3);
        assert!(eigenmode_leading(&disc, &modes, &a, &[]).is_err());
    }

    #[test]
    fn residue_check_resonant_and_off_channels() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let check = interior_ntd_residue_check(OMEGA1, &scene).unwrap();
        assert!(check.max_rel_error <= 1e-6, "rel error {}", check.max_rel_error);
        assert!(
            check.max_offchannel_residue <= 1e-6,
            "off-channel {}",
            check.max_offchannel_residue
        );
    }

    #[test]
    fn residue_prefactor_scales_with_frequency() {
        // second l=1 radial zero: the extracted residue must match the
        // formula with its own omega0 prefactor and trace
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let beta12 = jprime_zeros(1, 2)[1];
        let check = interior_ntd_residue_check(beta12, &scene).unwrap();
        assert!(check.max_rel_error <= 1e-6, "rel error {}", check.max_rel_error);
    }

    #[test]
    fn residue_check_rejects_multi_sphere() {
        let scene = dimer(3.5, c(1.0, 0.0));
        assert!(interior_ntd_residue_check(OMEGA1, &scene).is_err());
    }

    #[test]
    fn diagnostics_report_fits() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let freqs: Vec<f64> = (1..=8).map(|ell| jprime_zeros(ell, 1)[0]).collect();
        let report = diagnostics(&scene, &freqs, 1e-3).unwrap();
        assert!(
            report.scr_norm_exponent <= 2.3,
            "exponent {}",
            report.scr_norm_exponent
        );
        assert!(report.symmetry_defects.iter().all(|&d| d <= 1e-8));
        // proven trace exponents are s + 1/2; the finite-degree fits sit below
        assert!(report.trace_exponents[0] <= 0.55, "{:?}", report.trace_exponents);
        assert!(report.trace_exponents[1] <= 1.05);
        assert!(report.trace_exponents[2] <= 1.55);
        assert!(report.trace_exponents[0] > 0.1);
        assert_relative_eq!(
            report.uniform_indicator[0],
            1e-3 * (1.0 + OMEGA1),
            epsilon = 1e-6
        );
        assert!(diagnostics(&scene, &freqs[..3], 1e-3).is_err());
    }
}
