//! One-dimensional formulation: the exterior DtN matrix on resonator
//! endpoints, the explicit tridiagonal ODE capacitance matrix, the singular
//! Fabry-Perot block with its sign matrix, the delta^(1/2) splitting, and an
//! exact transfer-matrix oracle for the full transmission problem.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::nep::{muller_root, MullerConfig, ResonanceSet};

/// Ordered collection of resonator intervals on the line.
#[derive(Debug, Clone)]
pub struct Layout1D {
    /// (x_j^-, x_j^+), strictly increasing and disjoint.
    pub endpoints: Vec<(f64, f64)>,
    /// Exterior wave speed v.
    pub exterior_speed: f64,
    /// Interior speeds v_j.
    pub speeds: Vec<f64>,
    /// Relative contrast weights; effective contrasts are delta_scale * contrast.
    pub contrasts: Vec<f64>,
}

impl Layout1D {
    pub fn new(
        endpoints: Vec<(f64, f64)>,
        exterior_speed: f64,
        speeds: Vec<f64>,
        contrasts: Vec<f64>,
    ) -> Result<Self> {
        if endpoints.is_empty() {
            return Err(Error::Domain("layout needs at least one resonator".into()));
        }
        if endpoints.len() != speeds.len() || endpoints.len() != contrasts.len() {
            return Err(Error::Domain("per-resonator arrays must share a length".into()));
        }
        if exterior_speed <= 0.0 || speeds.iter().any(|&v| v <= 0.0) {
            return Err(Error::Domain("wave speeds must be positive".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(a, b) in &endpoints {
            if !(a > prev && b > a) {
                return Err(Error::Domain(
                    "endpoints must be strictly increasing with positive lengths and spacings"
                        .into(),
                ));
            }
            prev = b;
        }
        Ok(Self {
            endpoints,
            exterior_speed,
            speeds,
            contrasts,
        })
    }

    /// Uniform helper: equal speeds/contrasts, resonators laid out from 0.
    pub fn from_lengths(
        lengths: &[f64],
        spacings: &[f64],
        exterior_speed: f64,
        interior_speed: f64,
    ) -> Result<Self> {
        if spacings.len() + 1 != lengths.len() {
            return Err(Error::Domain("need one spacing between consecutive resonators".into()));
        }
        let mut endpoints = Vec::with_capacity(lengths.len());
        let mut x = 0.0;
        for (i, &l) in lengths.iter().enumerate() {
            endpoints.push((x, x + l));
            x += l;
            if i < spacings.len() {
                x += spacings[i];
            }
        }
        Self::new(
            endpoints,
            exterior_speed,
            vec![interior_speed; lengths.len()],
            vec![1.0; lengths.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    /// Resonator length l_j.
    pub fn length(&self, j: usize) -> f64 {
        self.endpoints[j].1 - self.endpoints[j].0
    }

    /// Spacing l_{i,i+1} between resonators i and i+1 (0-based i).
    pub fn spacing(&self, i: usize) -> f64 {
        self.endpoints[i + 1].0 - self.endpoints[i].1
    }
}

/// Exterior DtN matrix on the 2N boundary points, ordered
/// (x_1^-, x_1^+, x_2^-, ..., x_N^+).
#[derive(Debug, Clone)]
pub struct DtN1D {
    pub matrix: CMatrix,
}

/// The 2x2 spacing coupling block A_k(l).
pub fn spacing_block(k: Complex64, ell: f64) -> [[Complex64; 2]; 2] {
    let z = k * ell;
    let cot = z.cos() / z.sin();
    let csc = 1.0 / z.sin();
    [[-k * cot, k * csc], [k * csc, -k * cot]]
}

/// Exterior DtN map at wave number k. Fails when a spacing is resonant
/// (k l in pi Z within 1e-10), where the exterior Dirichlet problem on that
/// spacing interval degenerates.
pub fn dtn_1d(k: Complex64, layout: &Layout1D) -> Result<DtN1D> {
    let n = layout.len();
    let dim = 2 * n;
    let mut m = CMatrix::zeros(dim, dim);
    let ik = Complex64::I * k;
    m[(0, 0)] = ik;
    m[(dim - 1, dim - 1)] = ik;
    for i in 0..n.saturating_sub(1) {
        let ell = layout.spacing(i);
        let z = k * ell;
        if z.sin().norm() < 1e-10 {
            return Err(Error::Precondition(format!(
                "spacing {i} is resonant: k*l = {z} lies in pi Z"
            )));
        }
        let block = spacing_block(k, ell);
        let a = 2 * i + 1; // x_i^+
        let b = 2 * i + 2; // x_{i+1}^-
        m[(a, a)] = block[0][0];
        m[(a, b)] = block[0][1];
        m[(b, a)] = block[1][0];
        m[(b, b)] = block[1][1];
    }
    Ok(DtN1D { matrix: m })
}

/// Resonant index set J at a reference frequency: resonators with
/// k_{j,0} l_j in pi N within 1e-10, with the integers n_j recorded.
#[derive(Debug, Clone)]
pub struct ResonantSet1D {
    pub omega0: f64,
    /// 0-based resonator indices in J.
    pub indices: Vec<usize>,
    /// n_j >= 1 with k_{j,0} l_j = n_j pi.
    pub n: Vec<i64>,
}

impl ResonantSet1D {
    /// Trace values (a_j at x_j^-, s_j a_j at x_j^+) of the normalized mode.
    pub fn trace(&self, which: usize, layout: &Layout1D) -> (f64, f64) {
        let j = self.indices[which];
        let a = (2.0 / layout.length(j)).sqrt();
        let s = if self.n[which] % 2 == 0 { 1.0 } else { -1.0 };
        (a, s * a)
    }
}

pub fn resonant_set(omega0: f64, layout: &Layout1D) -> Result<ResonantSet1D> {
    let mut indices = Vec::new();
    let mut n = Vec::new();
    for j in 0..layout.len() {
        let kb = omega0 / layout.speeds[j];
        let z = kb * layout.length(j) / std::f64::consts::PI;
        let nearest = z.round();
        if nearest >= 1.0 && (z - nearest).abs() * std::f64::consts::PI <= 1e-10 {
            indices.push(j);
            n.push(nearest as i64);
        }
    }
    if indices.is_empty() {
        return Err(Error::Precondition(format!(
            "no resonator is Neumann-resonant at omega0 = {omega0}"
        )));
    }
    Ok(ResonantSet1D {
        omega0,
        indices,
        n,
    })
}

/// The ODE capacitance matrix over J, evaluated at a (possibly complex)
/// frequency with the traces frozen at omega0. Nearest-neighbor tridiagonal
/// by construction; at omega = omega0 this is the matrix of the appendix
/// formulas.
pub fn capmat_1d_at(
    omega: Complex64,
    layout: &Layout1D,
    set: &ResonantSet1D,
    delta_scale: f64,
) -> Result<CMatrix> {
    let v = layout.exterior_speed;
    let k = omega / v;
    let m = set.indices.len();
    let mut c = CMatrix::zeros(m, m);
    let cot = |ell: f64| -> Result<Complex64> {
        let z = k * ell;
        if z.sin().norm() < 1e-14 {
            return Err(Error::Precondition(format!(
                "spacing evaluation at an exact pole: k*l = {z}"
            )));
        }
        Ok(z.cos() / z.sin())
    };
    let csc = |ell: f64| -> Result<Complex64> {
        let z = k * ell;
        if z.sin().norm() < 1e-14 {
            return Err(Error::Precondition(format!(
                "spacing evaluation at an exact pole: k*l = {z}"
            )));
        }
        Ok(1.0 / z.sin())
    };
    let minus_i = -Complex64::I;
    for (row, &i) in set.indices.iter().enumerate() {
        let delta_v2 = delta_scale * layout.contrasts[i] * layout.speeds[i] * layout.speeds[i];
        let left = if i == 0 { minus_i } else { cot(layout.spacing(i - 1))? };
        let right = if i + 1 == layout.len() {
            minus_i
        } else {
            cot(layout.spacing(i))?
        };
        c[(row, row)] = delta_v2 / (v * layout.length(i)) * (left + right);
        // nearest-neighbor coupling only when the neighbor is resonant too
        if let Some(col) = set.indices.iter().position(|&jj| jj == i + 1) {
            let s_i = if set.n[row] % 2 == 0 { 1.0 } else { -1.0 };
            let geom = (layout.length(i) * layout.length(i + 1)).sqrt();
            let coupling = csc(layout.spacing(i))? * s_i / (v * geom);
            c[(row, col)] = -delta_v2 * coupling;
            let delta_v2_next = delta_scale
                * layout.contrasts[i + 1]
                * layout.speeds[i + 1]
                * layout.speeds[i + 1];
            c[(col, row)] = -delta_v2_next * coupling;
        }
    }
    Ok(c)
}

/// The frequency-dependent capacitance matrix at omega0 (regular case):
/// spacings adjacent to resonant resonators must be non-resonant.
pub fn capmat_1d(
    omega0: f64,
    layout: &Layout1D,
    delta_scale: f64,
) -> Result<(CMatrix, ResonantSet1D)> {
    let set = resonant_set(omega0, layout)?;
    let k0 = Complex64::new(omega0 / layout.exterior_speed, 0.0);
    for &j in &set.indices {
        for adj in [j.checked_sub(1), (j + 1 < layout.len()).then_some(j)] {
            if let Some(i) = adj {
                let z = k0 * layout.spacing(i);
                if z.sin().norm() < 1e-10 {
                    return Err(Error::Precondition(format!(
                        "spacing {i} is resonant at omega0; use the singular-case machinery"
                    )));
                }
            }
        }
    }
    let c = capmat_1d_at(Complex64::new(omega0, 0.0), layout, &set, delta_scale)?;
    Ok((c, set))
}

/// Complex resonances of the full transmission problem from 2x2 propagation
/// matrices with outgoing closures at both ends. Exact up to root finding,
/// which makes it the oracle the capacitance approximations are tested
/// against.
pub fn transfer_resonances(
    layout: &Layout1D,
    delta_scale: f64,
    window_center: f64,
    window_halfwidth: f64,
    scan_points: usize,
) -> ResonanceSet {
    let f = |omega: Complex64| transfer_misfit(layout, delta_scale, omega);
    let lo = window_center - window_halfwidth;
    let step = 2.0 * window_halfwidth / scan_points as f64;
    let mut scan: Vec<(f64, f64)> = Vec::with_capacity(scan_points);
    for i in 0..scan_points {
        let x = lo + (i as f64 + 0.5) * step;
        scan.push((x, f(Complex64::new(x, 0.0)).norm()));
    }
    let mut seeds: Vec<f64> = Vec::new();
    for w in scan.windows(3) {
        if w[1].1 < w[0].1 && w[1].1 < w[2].1 {
            seeds.push(w[1].0);
        }
    }
    // retain genuine dips only: a root just below the axis pulls |f| well
    // under the window median
    let mut mags: Vec<f64> = scan.iter().map(|p| p.1).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = mags[mags.len() / 2];
    seeds.retain(|&x| {
        let v = f(Complex64::new(x, 0.0)).norm();
        v < 0.5 * median
    });
    let mut found: Vec<Complex64> = Vec::new();
    let cfg = MullerConfig {
        residual_tol: 1e-13 * median.max(1e-300),
        step_tol: 1e-13,
        max_iterations: 80,
    };
    for &seed in &seeds {
        loop {
            let deflated = |z: Complex64| {
                let mut v = f(z);
                for r in &found {
                    v /= z - r;
                }
                v
            };
            let h = 1e-4 * window_center.abs().max(1.0);
            let s = [
                Complex64::new(seed - h, -h),
                Complex64::new(seed + h, -h),
                Complex64::new(seed, -2.0 * h),
            ];
            match muller_root(&deflated, s, &cfg) {
                Ok(out)
                    if (out.root.re - window_center).abs() <= window_halfwidth * 1.001
                        && out.root.im.abs() <= window_halfwidth.max(0.1) =>
                {
                    found.push(out.root);
                }
                _ => break,
            }
            if found.len() > 4 * layout.len() + 4 {
                break;
            }
        }
    }
    found.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    let mut values: Vec<Complex64> = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    for r in found {
        match values.last() {
            Some(&v) if (v - r).norm() <= 1e-10 * window_center.abs().max(1.0) => {
                *multiplicities.last_mut().unwrap() += 1;
            }
            _ => {
                values.push(r);
                multiplicities.push(1);
            }
        }
    }
    let residual_norms = values.iter().map(|&v| f(v).norm()).collect();
    ResonanceSet {
        values,
        multiplicities,
        residual_norms,
        warning: None,
    }
}

/// Outgoing misfit u'(x_N^+) - i k u(x_N^+) after propagating the left
/// outgoing state through all segments and interfaces.
pub fn transfer_misfit(layout: &Layout1D, delta_scale: f64, omega: Complex64) -> Complex64 {
    let k = omega / layout.exterior_speed;
    let mut u = Complex64::new(1.0, 0.0);
    let mut up = -Complex64::I * k;
    let propagate = |u: Complex64, up: Complex64, kappa: Complex64, ell: f64| {
        let z = kappa * ell;
        let (c, s) = (z.cos(), z.sin());
        // entire also at kappa = 0: sin(z)/kappa -> ell
        let s_over = if kappa.norm() < 1e-14 {
            Complex64::new(ell, 0.0)
        } else {
            s / kappa
        };
        (c * u + s_over * up, -kappa * s * u + c * up)
    };
    for j in 0..layout.len() {
        let delta = delta_scale * layout.contrasts[j];
        let kj = omega / layout.speeds[j];
        up *= delta; // flux condition entering the resonator
        let (nu, nup) = propagate(u, up, kj, layout.length(j));
        u = nu;
        up = nup / delta; // and leaving it
        if j + 1 < layout.len() {
            let (nu, nup) = propagate(u, up, k, layout.spacing(j));
            u = nu;
            up = nup;
        }
    }
    up - Complex64::I * k * u
}

/// A resonant run p..q (0-based, inclusive) with its declared integers:
/// k_{b,0} l_i = n_i pi inside the run and k_0 l_{i,i+1} = m_i pi on the
/// interior spacings.
#[derive(Debug, Clone)]
pub struct FpRun {
    pub p: usize,
    pub q: usize,
    pub n: Vec<i64>,
    pub m: Vec<i64>,
}

/// Singular Fabry-Perot block: the symmetrized tridiagonal matrix, the sign
/// matrix Sigma, and the structural vector with its theta coefficients.
#[derive(Debug, Clone)]
pub struct FpBlock {
    pub run: FpRun,
    pub c_sym: CMatrix,
    /// Diagonal of Sigma (entries +-1).
    pub sigma: Vec<f64>,
    /// Alternating structural vector (r l_p, l_{p,p+1}, r l_{p+1}, ...).
    pub structural: Vec<f64>,
    /// theta_j = 1 / (t_j t_{j+1}); all entries of the run are resonant.
    pub theta: Vec<f64>,
}

pub fn fp_block(omega0: f64, layout: &Layout1D, run: &FpRun) -> Result<FpBlock> {
    if run.p >= run.q {
        return Err(Error::Precondition(
            "a Fabry-Perot run needs p < q: single resonators have no interior resonant spacing"
                .into(),
        ));
    }
    if run.q >= layout.len() {
        return Err(Error::Precondition("run exceeds the layout".into()));
    }
    let width = run.q - run.p + 1;
    if run.n.len() != width || run.m.len() != width - 1 {
        return Err(Error::Precondition(
            "run needs one n per resonator and one m per interior spacing".into(),
        ));
    }
    let vb = layout.speeds[run.p];
    if layout.speeds.iter().any(|&s| s != vb)
        || layout.contrasts.iter().any(|&c| c != layout.contrasts[0])
    {
        return Err(Error::Precondition(
            "the singular block assumes uniform interior speeds and contrasts".into(),
        ));
    }
    let v = layout.exterior_speed;
    let r = v / vb;
    let k0 = omega0 / v;
    let kb0 = omega0 / vb;
    for (idx, i) in (run.p..=run.q).enumerate() {
        let want = run.n[idx] as f64 * std::f64::consts::PI;
        if (kb0 * layout.length(i) - want).abs() > 1e-10 {
            return Err(Error::Precondition(format!(
                "resonator {i} violates k_b0 l = n pi (declared n = {})",
                run.n[idx]
            )));
        }
    }
    for (idx, i) in (run.p..run.q).enumerate() {
        let want = run.m[idx] as f64 * std::f64::consts::PI;
        if (k0 * layout.spacing(i) - want).abs() > 1e-10 {
            return Err(Error::Precondition(format!(
                "spacing {i} violates k_0 l = m pi (declared m = {})",
                run.m[idx]
            )));
        }
    }
    for outer in [run.p.checked_sub(1), (run.q + 1 < layout.len()).then_some(run.q)] {
        if let Some(i) = outer {
            if (Complex64::new(k0 * layout.spacing(i), 0.0)).sin().norm() < 1e-10 {
                return Err(Error::Precondition(format!(
                    "outer spacing {i} is resonant: the run is not maximal"
                )));
            }
        }
    }
    let mut c_sym = CMatrix::zeros(width, width);
    for (idx, i) in (run.p..=run.q).enumerate() {
        let li = layout.length(i);
        let mut diag = 0.0;
        if idx > 0 {
            diag += 1.0 / (r * li * layout.spacing(i - 1));
        }
        if idx + 1 < width {
            diag += 1.0 / (r * li * layout.spacing(i));
        }
        c_sym[(idx, idx)] = Complex64::new(diag, 0.0);
        if idx + 1 < width {
            let off = -1.0
                / (r * layout.spacing(i) * (layout.length(i) * layout.length(i + 1)).sqrt());
            c_sym[(idx, idx + 1)] = Complex64::new(off, 0.0);
            c_sym[(idx + 1, idx)] = Complex64::new(off, 0.0);
        }
    }
    let mut sigma = vec![1.0f64; width];
    for idx in 0..width - 1 {
        let flip = if (run.n[idx] + run.m[idx]) % 2 == 0 { 1.0 } else { -1.0 };
        sigma[idx + 1] = sigma[idx] * flip;
    }
    let mut structural = Vec::with_capacity(2 * width - 1);
    for (idx, i) in (run.p..=run.q).enumerate() {
        structural.push(r * layout.length(i));
        if idx + 1 < width {
            structural.push(layout.spacing(i));
        }
    }
    let theta = structural
        .windows(2)
        .map(|w| 1.0 / (w[0] * w[1]))
        .collect();
    Ok(FpBlock {
        run: run.clone(),
        c_sym,
        sigma,
        structural,
        theta,
    })
}

/// Leading-order singular-case offsets +- v sqrt(lambda / r) delta^(1/2).
pub fn splitting_prediction(lambda: f64, delta: f64, v: f64, r: f64) -> Result<(f64, f64)> {
    if lambda <= 0.0 {
        return Err(Error::Precondition(
            "only strictly positive eigenvalues carry a delta^(1/2) splitting".into(),
        ));
    }
    if delta <= 0.0 {
        return Err(Error::Precondition("delta must be positive".into()));
    }
    let offset = v * (lambda / r).sqrt() * delta.sqrt();
    Ok((offset, -offset))
}

/// Residue extraction of the singular block: Richardson extrapolation of
/// (omega - omega0) C^ODE_*(omega) over steps {1e-3, 5e-4, 2.5e-4}, against
/// the closed form delta v v_b Sigma C^FP_sym Sigma.
#[derive(Debug, Clone)]
pub struct Residue1D {
    pub numerical: CMatrix,
    pub formula: CMatrix,
    pub rel_error: f64,
}

pub fn residue_extraction_1d(
    omega0: f64,
    layout: &Layout1D,
    run: &FpRun,
    delta_scale: f64,
) -> Result<Residue1D> {
    let block = fp_block(omega0, layout, run)?;
    let set = ResonantSet1D {
        omega0,
        indices: (run.p..=run.q).collect(),
        n: run.n.clone(),
    };
    let eval = |h: f64| -> Result<CMatrix> {
        let omega = Complex64::new(omega0 + h, 0.0);
        let c = capmat_1d_at(omega, layout, &set, delta_scale)?;
        Ok(c.map(|v| v * h))
    };
    let h = 1e-3;
    let (e1, e2, e3) = (eval(h)?, eval(h / 2.0)?, eval(h / 4.0)?);
    let r1 = e2.map(|v| 2.0 * v) - &e1;
    let r2 = e3.map(|v| 2.0 * v) - &e2;
    let numerical = (r2.map(|v| 4.0 * v) - &r1).map(|v| v / 3.0);
    let v = layout.exterior_speed;
    let vb = layout.speeds[run.p];
    let delta = delta_scale * layout.contrasts[run.p];
    let width = run.q - run.p + 1;
    let mut formula = CMatrix::zeros(width, width);
    for a in 0..width {
        for b in 0..width {
            formula[(a, b)] =
                delta * v * vb * block.sigma[a] * block.c_sym[(a, b)] * block.sigma[b];
        }
    }
    let rel_error = (&numerical - &formula).norm() / formula.norm().max(1e-300);
    Ok(Residue1D {
        numerical,
        formula,
        rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dtn_single_resonator_is_endpoint_diagonal() {
        let layout = Layout1D::from_lengths(&[1.0], &[], 1.0, 1.0).unwrap();
        let k = c(1.7, 0.0);
        let dtn = dtn_1d(k, &layout).unwrap().matrix;
        assert_eq!(dtn.nrows(), 2);
        assert_eq!(dtn[(0, 0)], Complex64::I * k);
        assert_eq!(dtn[(1, 1)], Complex64::I * k);
        assert_eq!(dtn[(0, 1)], c(0.0, 0.0));
        // outgoing: positive imaginary part for k > 0
        assert!(dtn[(0, 0)].im > 0.0);
    }

    #[test]
    fn dtn_quarter_wave_block() {
        // k l = pi/2: cot = 0, csc = 1
        let layout = Layout1D::from_lengths(&[1.0, 1.0], &[0.5], 1.0, 1.0).unwrap();
        let k = c(PI, 0.0);
        let dtn = dtn_1d(k, &layout).unwrap().matrix;
        assert!((dtn[(1, 1)]).norm() < 1e-12);
        assert!((dtn[(1, 2)] - k).norm() < 1e-12);
        assert!((dtn[(2, 1)] - k).norm() < 1e-12);
        assert!((dtn[(2, 2)]).norm() < 1e-12);
    }

    #[test]
    fn dtn_static_spacing_limit() {
        // k l -> 0: block approaches [[-1/l, 1/l], [1/l, -1/l]]
        let ell = 0.7;
        let layout = Layout1D::from_lengths(&[1.0, 1.0], &[ell], 1.0, 1.0).unwrap();
        let k = c(1e-5, 0.0);
        let dtn = dtn_1d(k, &layout).unwrap().matrix;
        let tol = 1e-8;
        assert_relative_eq!(dtn[(1, 1)].re, -1.0 / ell, max_relative = tol);
        assert_relative_eq!(dtn[(1, 2)].re, 1.0 / ell, max_relative = tol);
        assert_relative_eq!(dtn[(2, 1)].re, 1.0 / ell, max_relative = tol);
        assert_relative_eq!(dtn[(2, 2)].re, -1.0 / ell, max_relative = tol);
    }

    #[test]
    fn dtn_rejects_resonant_spacing() {
        let layout = Layout1D::from_lengths(&[1.0, 1.0], &[1.0], 1.0, 1.0).unwrap();
        let err = dtn_1d(c(PI, 0.0), &layout).unwrap_err();
        assert!(format!("{err}").contains("spacing 0"), "{err}");
    }

    #[test]
    fn capmat_entries_match_direct_pairing_oracle() {
        // direct pairing -(delta_i v_i^2 / 2 omega0) <T g_j, g_i> via the
        // assembled DtN matrix and explicit traces
        let layout = Layout1D::new(
            vec![(0.0, 1.0), (1.3, 2.3), (2.9, 4.4)],
            1.0,
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let omega0 = 2.0 * PI; // resonators of length 1 have n = 2; length 1.5 has n = 3
        let (cmat, set) = capmat_1d(omega0, &layout, 1e-3).unwrap();
        assert_eq!(set.indices, vec![0, 1, 2]);
        let dtn = dtn_1d(c(omega0, 0.0), &layout).unwrap().matrix;
        let m = set.indices.len();
        for a in 0..m {
            for b in 0..m {
                let (ga_m, ga_p) = set.trace(a, &layout);
                let (gb_m, gb_p) = set.trace(b, &layout);
                let ja = set.indices[a];
                let jb = set.indices[b];
                let mut tg = [c(0.0, 0.0); 6];
                for (val, pos) in [(gb_m, 2 * jb), (gb_p, 2 * jb + 1)] {
                    for row in 0..6 {
                        tg[row] += dtn[(row, pos)] * val;
                    }
                }
                let pairing = tg[2 * ja] * ga_m + tg[2 * ja + 1] * ga_p;
                let delta_v2 = 1e-3 * layout.contrasts[ja] * layout.speeds[ja].powi(2);
                let expect = -delta_v2 / (2.0 * omega0) * pairing;
                assert!(
                    (cmat[(a, b)] - expect).norm() <= 1e-12 * expect.norm().max(1e-10),
                    "({a},{b}): {} vs {expect}",
                    cmat[(a, b)]
                );
            }
        }
        // nearest-neighbor structure
        assert!(cmat[(0, 2)].norm() == 0.0 && cmat[(2, 0)].norm() == 0.0);
    }

    #[test]
    fn endpoint_entry_at_quarter_wave_spacing() {
        // C_11 = -i delta v_1^2 / (v l_1) when cot(k0 l_12) = 0
        let omega0 = PI;
        let layout = Layout1D::from_lengths(&[1.0, 0.77], &[0.5], 1.0, 1.0).unwrap();
        let (cmat, set) = capmat_1d(omega0, &layout, 2e-3).unwrap();
        assert_eq!(set.indices, vec![0]);
        let expect = c(0.0, -2e-3);
        assert!((cmat[(0, 0)] - expect).norm() < 1e-12, "{}", cmat[(0, 0)]);
    }

    #[test]
    fn offdiagonal_symmetry_shares_csc_factor() {
        let omega0 = 2.0 * PI;
        let layout = Layout1D::new(
            vec![(0.0, 1.0), (1.3, 2.3)],
            1.0,
            vec![1.0, 1.0],
            vec![0.7, 1.9],
        )
        .unwrap();
        let (cmat, _) = capmat_1d(omega0, &layout, 1e-3).unwrap();
        let lhs = cmat[(0, 1)] / (1e-3 * 0.7);
        let rhs = cmat[(1, 0)] / (1e-3 * 1.9);
        assert!((lhs - rhs).norm() < 1e-14 * lhs.norm());
    }

    #[test]
    fn matched_medium_has_no_resonances() {
        let layout = Layout1D::from_lengths(&[1.0, 0.8], &[0.6], 1.0, 1.0).unwrap();
        let set = transfer_resonances(&layout, 1.0, 3.0, 2.5, 300);
        assert!(set.values.is_empty(), "{:?}", set.values);
    }

    #[test]
    fn single_resonator_small_delta_near_neumann() {
        let layout = Layout1D::from_lengths(&[1.0], &[], 1.0, 1.0).unwrap();
        let delta = 1e-6;
        let set = transfer_resonances(&layout, delta, PI, 0.3, 400);
        assert_eq!(set.values.len(), 1, "{:?}", set.values);
        let root = set.values[0];
        assert!((root.re - PI).abs() < 1e-4, "{root}");
        assert!(root.im < 0.0, "outgoing loss sign: {root}");
        // regular case: distance to omega0 is O(delta)
        assert!((root - c(PI, 0.0)).norm() < 10.0 * delta);
    }

    #[test]
    fn fp_block_structure_and_rejections() {
        let layout = Layout1D::from_lengths(&[1.0, 1.0], &[1.0], 1.0, 1.0).unwrap();
        let run = FpRun {
            p: 0,
            q: 1,
            n: vec![1, 1],
            m: vec![1],
        };
        let block = fp_block(PI, &layout, &run).unwrap();
        // l = spacing = 1, r = 1: [[1, -1], [-1, 1]]
        assert!((block.c_sym[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((block.c_sym[(0, 1)] + c(1.0, 0.0)).norm() < 1e-12);
        // n + m = 2 even: Sigma = I
        assert_eq!(block.sigma, vec![1.0, 1.0]);
        assert_eq!(block.structural, vec![1.0, 1.0, 1.0]);
        assert_eq!(block.theta.len(), 2);

        // length-1 runs rejected
        let bad = FpRun {
            p: 1,
            q: 1,
            n: vec![1],
            m: vec![],
        };
        assert!(fp_block(PI, &layout, &bad).is_err());
    }

    #[test]
    fn sigma_conjugation_preserves_spectrum() {
        // lengths 1 and 2 at omega0 = pi: n = (1, 2); spacing 1 resonant m=1
        let layout = Layout1D::from_lengths(&[1.0, 2.0], &[1.0], 1.0, 1.0).unwrap();
        let run = FpRun {
            p: 0,
            q: 1,
            n: vec![1, 2],
            m: vec![1],
        };
        let block = fp_block(PI, &layout, &run).unwrap();
        assert_eq!(block.sigma, vec![1.0, 1.0]); // n+m = 2 even
        let mut conj = block.c_sym.clone();
        for a in 0..2 {
            for b in 0..2 {
                conj[(a, b)] *= block.sigma[a] * block.sigma[b];
            }
        }
        let ev_a = crate::linalg::eigenvalues(&block.c_sym);
        let ev_b = crate::linalg::eigenvalues(&conj);
        let d = crate::nep::hausdorff(&ev_a, &ev_b).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn splitting_prediction_values() {
        let (plus, minus) = splitting_prediction(1.0, 1e-4, 1.0, 1.0).unwrap();
        assert_relative_eq!(plus, 0.01, max_relative = 1e-14);
        assert_relative_eq!(minus, -0.01, max_relative = 1e-14);
        // quadrupling delta doubles the offsets
        let (p4, _) = splitting_prediction(1.0, 4e-4, 1.0, 1.0).unwrap();
        assert_relative_eq!(p4, 0.02, max_relative = 1e-14);
        assert!(splitting_prediction(0.0, 1e-4, 1.0, 1.0).is_err());
        assert!(splitting_prediction(-1.0, 1e-4, 1.0, 1.0).is_err());
    }

    #[test]
    fn singular_case_splitting_matches_oracle() {
        // two unit resonators with a resonant unit spacing at omega0 = pi
        let layout = Layout1D::from_lengths(&[1.0, 1.0], &[1.0], 1.0, 1.0).unwrap();
        let run = FpRun {
            p: 0,
            q: 1,
            n: vec![1, 1],
            m: vec![1],
        };
        let block = fp_block(PI, &layout, &run).unwrap();
        let eigs = crate::linalg::eigenvalues(&block.c_sym);
        let lambda = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(lambda, 2.0, max_relative = 1e-12);
        let delta = 1e-4;
        let (plus, minus) = splitting_prediction(lambda, delta, 1.0, 1.0).unwrap();
        let set = transfer_resonances(&layout, delta, PI, 0.1, 600);
        assert!(set.values.len() >= 2, "found {:?}", set.values);
        // match the predicted offsets against the two outermost roots
        let max_off = set
            .values
            .iter()
            .map(|r| r.re - PI)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_off = set
            .values
            .iter()
            .map(|r| r.re - PI)
            .fold(f64::INFINITY, f64::min);
        assert!(
            (max_off - plus).abs() <= 3.0 * delta.sqrt() * plus.abs(),
            "{max_off} vs {plus}"
        );
        assert!(
            (min_off - minus).abs() <= 3.0 * delta.sqrt() * plus.abs(),
            "{min_off} vs {minus}"
        );
    }

    #[test]
    fn residue_matches_closed_form() {
        let layout = Layout1D::from_lengths(&[1.0, 1.0], &[1.0], 1.0, 1.0).unwrap();
        let run = FpRun {
            p: 0,
            q: 1,
            n: vec![1, 1],
            m: vec![1],
        };
        let res = residue_extraction_1d(PI, &layout, &run, 1e-3).unwrap();
        assert!(res.rel_error <= 1e-6, "rel error {}", res.rel_error);
        // linearity: doubling delta doubles the numerical residue exactly
        let res2 = residue_extraction_1d(PI, &layout, &run, 2e-3).unwrap();
        let lin = (&res2.numerical - res.numerical.map(|v| 2.0 * v)).norm()
            / res2.numerical.norm();
        assert!(lin < 1e-12, "linearity defect {lin}");
    }

    #[test]
    fn residue_off_tridiagonal_entries_vanish() {
        // three-resonator resonant run: residue stays tridiagonal
        let layout = Layout1D::from_lengths(&[1.0, 1.0, 1.0], &[1.0, 1.0], 1.0, 1.0).unwrap();
        let run = FpRun {
            p: 0,
            q: 2,
            n: vec![1, 1, 1],
            m: vec![1, 1],
        };
        let res = residue_extraction_1d(PI, &layout, &run, 1e-3).unwrap();
        assert!(res.rel_error <= 1e-6, "rel error {}", res.rel_error);
        let scale = res.numerical.norm();
        assert!(res.numerical[(0, 2)].norm() <= 1e-10 * scale);
        assert!(res.numerical[(2, 0)].norm() <= 1e-10 * scale);
    }

    #[test]
    fn regular_case_residual_is_second_order() {
        // one resonant resonator flanked by two detuned ones
        let layout = Layout1D::new(
            vec![(0.0, 0.83), (1.4, 2.4), (3.05, 3.95)],
            1.0,
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let omega0 = PI; // only the middle resonator (length 1) is resonant
        let mut residuals = Vec::new();
        let deltas = [1e-5, 1e-4, 1e-3];
        for &delta in &deltas {
            let (cmat, set) = capmat_1d(omega0, &layout, delta).unwrap();
            assert_eq!(set.indices, vec![1]);
            let lead = c(omega0, 0.0) + cmat[(0, 0)];
            let oracle = transfer_resonances(&layout, delta, omega0, 0.05, 400);
            let nearest = oracle
                .values
                .iter()
                .min_by(|a, b| {
                    (*a - lead).norm().partial_cmp(&(*b - lead).norm()).unwrap()
                })
                .expect("oracle found a root");
            residuals.push((nearest - lead).norm());
        }
        let (slope, _) = crate::fit::loglog_slope(&deltas, &residuals);
        assert!(
            (slope - 2.0).abs() <= 0.2,
            "slope {slope}, residuals {residuals:?}"
        );
    }
}
