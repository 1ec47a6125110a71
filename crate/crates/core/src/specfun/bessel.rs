//! Spherical Bessel and Hankel functions of complex argument, with derivatives,
//! and zeros of j_l' on the positive real axis.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Which spherical function family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    /// First kind j_l, regular at the origin.
    J,
    /// Second kind y_l, singular at the origin.
    Y,
    /// Outgoing Hankel function h_l^(1) = j_l + i y_l.
    H1,
}

const SERIES_RADIUS: f64 = 0.6;

/// Value and first derivative of the requested spherical function at `z`.
///
/// j is evaluated by downward (Miller) recurrence, y by upward recurrence;
/// both continue analytically to complex arguments. Stable at least for
/// |z| <= 100 and l <= 40.
pub fn sph_bessel(kind: BesselKind, ell: usize, z: Complex64) -> Result<(Complex64, Complex64)> {
    if z == Complex64::new(0.0, 0.0) {
        return match kind {
            BesselKind::J => Ok(j_at_zero(ell)),
            _ => Err(Error::Domain(format!(
                "spherical {kind:?} is singular at z = 0"
            ))),
        };
    }
    let (value, derivative) = match kind {
        BesselKind::J => sph_j(ell, z),
        BesselKind::Y => sph_y(ell, z),
        BesselKind::H1 => {
            let (j, jp) = sph_j(ell, z);
            let (y, yp) = sph_y(ell, z);
            (j + Complex64::I * y, jp + Complex64::I * yp)
        }
    };
    if !value.is_finite() || !derivative.is_finite() {
        return Err(Error::Overflow(format!(
            "spherical {kind:?}_{ell}({z}) exceeded representable range"
        )));
    }
    Ok((value, derivative))
}

fn j_at_zero(ell: usize) -> (Complex64, Complex64) {
    let value = if ell == 0 { 1.0 } else { 0.0 };
    let derivative = if ell == 1 { 1.0 / 3.0 } else { 0.0 };
    (value.into(), derivative.into())
}

/// j_l and j_l' via power series; used for small |z| where the recurrences
/// would divide near-cancelling quantities by z.
fn series_j(ell: usize, z: Complex64) -> (Complex64, Complex64) {
    // j_l(z) = z^l / (2l+1)!! * sum_k (-z^2/2)^k / (k! prod_{i<=k}(2l+2i+1))
    let z2 = z * z;
    let mut double_fact = 1.0;
    for i in 0..ell {
        double_fact *= (2 * i + 3) as f64;
    }
    let mut sum = Complex64::new(1.0, 0.0);
    let mut dsum = Complex64::new(0.0, 0.0); // d/dz of the series factor
    let mut term = Complex64::new(1.0, 0.0);
    for k in 1..40 {
        term *= -z2 * 0.5 / ((k * (2 * ell + 2 * k + 1)) as f64);
        sum += term;
        dsum += term * (2 * k) as f64 / z;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    let zl = z.powu(ell as u32);
    let value = zl * sum / double_fact;
    let dvalue = if ell == 0 {
        dsum / double_fact
    } else {
        (zl * dsum + (ell as f64) * z.powu(ell as u32 - 1) * sum) / double_fact
    };
    (value, dvalue)
}

fn sph_j(ell: usize, z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < SERIES_RADIUS {
        return series_j(ell, z);
    }
    let j0 = z.sin() / z;
    let j1 = z.sin() / (z * z) - z.cos() / z;
    if ell == 0 {
        return (j0, -j1);
    }
    if ell == 1 {
        return (j1, j0 - 2.0 * j1 / z);
    }
    // Miller downward recurrence, normalized against j0 or j1. The seed is
    // large enough that the final normalization never divides by a complex
    // number whose squared norm underflows.
    let start = ell.max(z.norm().ceil() as usize) + 32;
    let mut fp = Complex64::new(0.0, 0.0);
    let mut f = Complex64::new(1e-30, 0.0);
    let mut jl = Complex64::new(0.0, 0.0);
    let mut jlm1 = Complex64::new(0.0, 0.0);
    let mut f0 = Complex64::new(0.0, 0.0);
    let mut f1 = Complex64::new(0.0, 0.0);
    for n in (0..=start).rev() {
        let fm = (2 * n + 3) as f64 / z * f - fp;
        fp = f;
        f = fm;
        if n == ell {
            jl = f;
        }
        if n + 1 == ell {
            jl = fp;
            jlm1 = f;
        }
        if n == 1 {
            f1 = f;
        }
        if n == 0 {
            f0 = f;
        }
        // rescale to dodge overflow of the unnormalized recurrence
        if f.norm() > 1e240 {
            let s = 1e-240;
            fp *= s;
            f *= s;
            jl *= s;
            jlm1 *= s;
            f1 *= s;
        }
    }
    let scale = if f0.norm() >= f1.norm() { j0 / f0 } else { j1 / f1 };
    let value = jl * scale;
    let prev = jlm1 * scale;
    let derivative = prev - (ell + 1) as f64 / z * value;
    (value, derivative)
}

fn sph_y(ell: usize, z: Complex64) -> (Complex64, Complex64) {
    let y0 = -z.cos() / z;
    let y1 = -z.cos() / (z * z) - z.sin() / z;
    if ell == 0 {
        return (y0, -y1);
    }
    let mut prev = y0;
    let mut cur = y1;
    for n in 1..ell {
        let next = (2 * n + 1) as f64 / z * cur - prev;
        prev = cur;
        cur = next;
    }
    let derivative = prev - (ell + 1) as f64 / z * cur;
    (cur, derivative)
}

/// First `n_max` positive zeros of j_l', bracketed on a pi/8 grid and refined
/// by bisection. The trivial zero at the origin is excluded.
pub fn jprime_zeros(ell: usize, n_max: usize) -> Vec<f64> {
    let jp = |x: f64| {
        sph_bessel(BesselKind::J, ell, Complex64::new(x, 0.0))
            .expect("real positive argument")
            .1
            .re
    };
    let mut zeros = Vec::with_capacity(n_max);
    let step = std::f64::consts::PI / 8.0;
    let mut x = if ell == 0 { step } else { 1e-3 };
    let mut fx = jp(x);
    let limit = 1.2 * ell as f64 + (n_max as f64 + 2.0) * std::f64::consts::PI + 20.0;
    while zeros.len() < n_max && x < limit {
        let x_next = x + step;
        let f_next = jp(x_next);
        if fx == 0.0 {
            zeros.push(x);
        } else if fx.signum() != f_next.signum() {
            zeros.push(bisect(&jp, x, x_next));
        }
        x = x_next;
        fx = f_next;
    }
    zeros
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-14 * mid.max(1.0) {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fa.signum() == fm.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
