//! Nonlinear eigenvalue machinery on omega -> det A(omega): determinant
//! scans, Muller iteration with deflation, resonance-cluster extraction, and
//! the Hausdorff set distance.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{logdet, smallest_singular, CMatrix};

/// One determinant-scan sample. `ok` is false when the LU broke down at this
/// grid point (the scan continues past it).
#[derive(Debug, Clone, Copy)]
pub struct ScanPoint {
    pub omega: Complex64,
    pub log_abs_det: f64,
    pub ok: bool,
}

/// log|det| of the built matrix over a grid, evaluated in parallel with
/// per-row log scaling so sizes up to 2NL^2 = 1024 cannot overflow.
pub fn det_scan<F>(builder: F, grid: &[Complex64]) -> Vec<ScanPoint>
where
    F: Fn(Complex64) -> CMatrix + Sync,
{
    grid.par_iter()
        .map(|&omega| match logdet(&builder(omega)) {
            Some((log_abs, _)) => ScanPoint {
                omega,
                log_abs_det: log_abs,
                ok: true,
            },
            None => ScanPoint {
                omega,
                log_abs_det: f64::NEG_INFINITY,
                ok: false,
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct MullerConfig {
    pub residual_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl Default for MullerConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            step_tol: 1e-12,
            max_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MullerOutcome {
    pub root: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

/// Muller's method from three distinct seeds.
pub fn muller_root(
    f: impl Fn(Complex64) -> Complex64,
    seeds: [Complex64; 3],
    cfg: &MullerConfig,
) -> Result<MullerOutcome> {
    if seeds[0] == seeds[1] || seeds[1] == seeds[2] || seeds[0] == seeds[2] {
        return Err(Error::Precondition("muller seeds must be distinct".into()));
    }
    let (mut x0, mut x1, mut x2) = (seeds[0], seeds[1], seeds[2]);
    let (mut f0, mut f1, mut f2) = (f(x0), f(x1), f(x2));
    let mut trace = Vec::new();
    let mut best = (x2, f2.norm());
    let mut under_tol = 0usize;
    for it in 0..cfg.max_iterations {
        if f2.norm() < best.1 {
            best = (x2, f2.norm());
        }
        if f2.norm() <= cfg.residual_tol {
            under_tol += 1;
        }
        // one refinement step beyond the first crossing sharpens the root
        // before the residual criterion accepts it
        if under_tol >= 2 {
            return Ok(MullerOutcome {
                root: best.0,
                iterations: it,
                residual: best.1,
            });
        }
        let q = (x2 - x1) / (x1 - x0);
        let a = q * f2 - q * (1.0 + q) * f1 + q * q * f0;
        let b = (2.0 * q + 1.0) * f2 - (1.0 + q) * (1.0 + q) * f1 + q * q * f0;
        let c = (1.0 + q) * f2;
        let disc = (b * b - 4.0 * a * c).sqrt();
        let denom = if (b + disc).norm() >= (b - disc).norm() {
            b + disc
        } else {
            b - disc
        };
        if denom.norm() == 0.0 {
            return Err(Error::NonConvergence(
                "muller: vanishing denominator".into(),
            ));
        }
        let step = (x2 - x1) * 2.0 * c / denom;
        let x3 = x2 - step;
        let f3 = f(x3);
        trace.push(x3);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 = x3;
        f2 = f3;
        if step.norm() <= cfg.step_tol * x2.norm().max(1.0) {
            let (root, residual) = if f2.norm() < best.1 {
                (x2, f2.norm())
            } else {
                best
            };
            return Ok(MullerOutcome {
                root,
                iterations: it + 1,
                residual,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "muller: no convergence after {} iterations; last iterates {:?}",
        cfg.max_iterations,
        &trace[trace.len().saturating_sub(3)..]
    )))
}

/// Roots of det A(omega) near a reference frequency, with multiplicity tags.
#[derive(Debug, Clone)]
pub struct ResonanceSet {
    /// Pairwise-distinct root values.
    pub values: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    /// Normalized |det| at each distinct value.
    pub residual_norms: Vec<f64>,
    pub warning: Option<String>,
}

impl ResonanceSet {
    pub fn total_count(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Values repeated according to multiplicity.
    pub fn all_roots(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&v, &m)| std::iter::repeat(v).take(m))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    /// Search disk radius around omega0; default 10 |delta| omega0 + 1e-3.
    pub radius: Option<f64>,
    pub scan_points: usize,
    /// Interior Neumann multiplicity m; a mismatch is reported as a warning.
    pub expected_count: Option<usize>,
    pub muller: MullerConfig,
    /// Roots closer than this collapse into one value with a multiplicity tag.
    pub dedupe_tol: f64,
    pub max_roots: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            radius: None,
            scan_points: 400,
            expected_count: None,
            muller: MullerConfig::default(),
            dedupe_tol: 1e-9,
            max_roots: 32,
        }
    }
}

/// All roots of det A(omega) in a disk around `omega0`: seeded Muller from
/// scan minima with deflation, then a two-sided residual polish of every root
/// so that multiple roots are still resolved to near machine precision.
pub fn find_resonance_cluster<F>(
    builder: &F,
    omega0: f64,
    delta_mag: f64,
    cfg: &ClusterConfig,
) -> ResonanceSet
where
    F: Fn(Complex64) -> CMatrix + Sync,
{
    let radius = cfg
        .radius
        .unwrap_or(10.0 * delta_mag.abs() * omega0 + 1e-3);
    let lo = omega0 - radius;
    let grid: Vec<Complex64> = (0..cfg.scan_points)
        .map(|i| {
            Complex64::new(
                lo + 2.0 * radius * (i as f64 + 0.5) / cfg.scan_points as f64,
                0.0,
            )
        })
        .collect();
    let scan = det_scan(builder, &grid);
    let mut seeds = local_minima(&scan);
    if let Some(global) = scan
        .iter()
        .filter(|p| p.ok)
        .min_by(|a, b| a.log_abs_det.partial_cmp(&b.log_abs_det).unwrap())
    {
        seeds.push(global.omega.re);
        seeds.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    }

    let det_f = scaled_det(builder);
    let mut found: Vec<Complex64> = Vec::new();
    for &seed in &seeds {
        loop {
            if found.len() >= cfg.max_roots {
                break;
            }
            let deflated = |z: Complex64| {
                let mut v = det_f(z);
                for r in &found {
                    v /= z - r;
                }
                v
            };
            let s = [
                Complex64::new(seed * (1.0 - 1e-4), -1e-4),
                Complex64::new(seed * (1.0 + 1e-4), -1e-4),
                Complex64::new(seed, -2e-4),
            ];
            match muller_root(&deflated, s, &cfg.muller) {
                Ok(out) => {
                    let root = (out.root - Complex64::new(omega0, 0.0)).norm() <= 1.05 * radius;
                    if !root {
                        break;
                    }
                    let polished =
                        polish_root(builder, out.root).unwrap_or(out.root);
                    found.push(polished);
                }
                Err(_) => break,
            }
        }
    }

    // group into distinct values with multiplicities
    found.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut values: Vec<Complex64> = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    for r in found {
        match values.last() {
            Some(&v) if (v - r).norm() <= cfg.dedupe_tol.max(1e-12 * omega0.abs()) => {
                *multiplicities.last_mut().unwrap() += 1;
            }
            _ => {
                values.push(r);
                multiplicities.push(1);
            }
        }
    }
    let residual_norms: Vec<f64> = values.iter().map(|&v| det_f(v).norm()).collect();
    let total: usize = multiplicities.iter().sum();
    let warning = cfg.expected_count.and_then(|m| {
        (total != m).then(|| format!("cluster count {total} does not match multiplicity {m}"))
    });
    ResonanceSet {
        values,
        multiplicities,
        residual_norms,
        warning,
    }
}

/// Normalized determinant: exp(logdet - ref) with the reference magnitude
/// fixed at the first evaluation, so Muller works on representable numbers.
pub fn scaled_det<'a, F>(builder: &'a F) -> impl Fn(Complex64) -> Complex64 + 'a
where
    F: Fn(Complex64) -> CMatrix + Sync,
{
    let reference = std::sync::OnceLock::new();
    move |z: Complex64| match logdet(&builder(z)) {
        Some((log_abs, phase)) => {
            let r = *reference.get_or_init(|| log_abs);
            ((log_abs - r) + Complex64::I * phase).exp()
        }
        None => Complex64::new(0.0, 0.0),
    }
}

/// Two-sided residual polish: freeze the smallest singular directions (u, v)
/// of A at the approximate root and re-solve v* A(omega) u = 0. This scalar
/// has a simple zero even when det A vanishes to higher order, so clusters
/// that are exactly degenerate by symmetry are still located to ~1e-13.
pub fn polish_root<F>(builder: &F, root: Complex64) -> Result<Complex64>
where
    F: Fn(Complex64) -> CMatrix + Sync,
{
    let a = builder(root);
    let scale = crate::linalg::matrix_norm(&a).max(1e-300);
    let (_, u, v) = smallest_singular(&a)?;
    let s = |z: Complex64| (v.adjoint() * builder(z) * &u)[(0, 0)];
    let h = 1e-7 * root.norm().max(1e-3);
    let seeds = [
        root - Complex64::new(h, 0.0),
        root + Complex64::new(h, 0.0),
        root + Complex64::new(0.0, h),
    ];
    let cfg = MullerConfig {
        residual_tol: 1e-13 * scale,
        step_tol: 1e-14,
        max_iterations: 40,
    };
    let out = muller_root(s, seeds, &cfg)?;
    // refuse a polish that wandered away from the seed root
    if (out.root - root).norm() > 100.0 * h.max(1e-9) {
        return Err(Error::NonConvergence("polish diverged from seed".into()));
    }
    Ok(out.root)
}

fn local_minima(scan: &[ScanPoint]) -> Vec<f64> {
    let mut mins: Vec<(f64, f64)> = Vec::new();
    for w in scan.windows(3) {
        if w.iter().all(|p| p.ok)
            && w[1].log_abs_det < w[0].log_abs_det
            && w[1].log_abs_det < w[2].log_abs_det
        {
            mins.push((w[1].log_abs_det, w[1].omega.re));
        }
    }
    mins.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    mins.into_iter().map(|(_, x)| x).collect()
}

/// Hausdorff distance between two nonempty finite sets in the complex plane.
pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition(
            "hausdorff distance needs nonempty sets".into(),
        ));
    }
    let directed = |from: &[Complex64], to: &[Complex64]| {
        from.iter()
            .map(|x| {
                to.iter()
                    .map(|y| (x - y).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
