//! Field evaluation from density pairs via the layer ansatz.

use nalgebra::Vector3;
use num_complex::Complex64;

use super::assemble::{green_and_radial_derivative, Discretization};
use super::DensityPair;
use crate::error::{Error, Result};

/// u(x) = S^k[phi](x) outside the resonators, S-tilde^omega[psi](x) inside.
/// Points closer to a boundary than 1e-6 times that sphere's radius are
/// rejected with a distance diagnostic.
pub fn evaluate_field(
    disc: &Discretization,
    densities: &DensityPair,
    omega: Complex64,
    points: &[Vector3<f64>],
) -> Result<Vec<Complex64>> {
    let scene = &disc.scene;
    let mut out = Vec::with_capacity(points.len());
    for (pi, x) in points.iter().enumerate() {
        let mut inside: Option<usize> = None;
        for (j, res) in scene.resonators.iter().enumerate() {
            let gap = (x - res.center).norm() - res.radius;
            if gap.abs() < 1e-6 * res.radius {
                return Err(Error::Precondition(format!(
                    "point {pi} lies {gap:.3e} from the boundary of resonator {j} \
                     (closer than 1e-6 * radius)"
                )));
            }
            if gap < 0.0 {
                inside = Some(j);
            }
        }
        let (k, density) = match inside {
            Some(j) => (scene.interior_wavenumber(j, omega), &densities.psi),
            None => (scene.exterior_wavenumber(omega), &densities.phi),
        };
        out.push(single_layer_at(disc, k, density, x));
    }
    Ok(out)
}

/// Quadrature evaluation of S^k[density](x) over the whole boundary.
pub fn single_layer_at(
    disc: &Discretization,
    k: Complex64,
    density: &crate::linalg::CVector,
    x: &Vector3<f64>,
) -> Complex64 {
    let nb = disc.trunc * disc.trunc;
    let basis = disc.basis_at_nodes();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, res) in disc.scene.resonators.iter().enumerate() {
        let coeffs = density.rows(j * nb, nb);
        for (p, y) in disc.boundary_nodes(j).iter().enumerate() {
            let mut dens_val = Complex64::new(0.0, 0.0);
            for b in 0..nb {
                dens_val += coeffs[b] * (basis[(p, b)] / res.radius);
            }
            let r = (x - y).norm();
            let (g, _) = green_and_radial_derivative(k, r);
            acc += disc.surface_weight(j, p) * g * dens_val;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bie3d::SphereScene;
    use crate::linalg::CVector;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_densities_zero_field() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let disc = Discretization::new(&scene, 3);
        let dens = DensityPair {
            psi: CVector::zeros(9),
            phi: CVector::zeros(9),
        };
        let pts = vec![Vector3::new(3.0, 0.0, 0.0), Vector3::new(0.1, 0.2, 0.1)];
        let vals = evaluate_field(&disc, &dens, c(1.0, 0.0), &pts).unwrap();
        assert!(vals.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn far_field_monopole() {
        // small kR so j_0(kR) ~ 1 and the field is (total charge) * G
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let disc = Discretization::new(&scene, 2);
        let mut phi = CVector::zeros(4);
        phi[0] = c(1.0, 0.0);
        let dens = DensityPair {
            psi: CVector::zeros(4),
            phi,
        };
        let k = c(0.2, 0.0);
        let x = Vector3::new(0.0, 0.0, 100.0);
        let val = evaluate_field(&disc, &dens, k, &[x]).unwrap()[0];
        // total charge of b_00 = Y_00 / R over the sphere
        let charge = (4.0 * std::f64::consts::PI).sqrt() * 1.0;
        let (g, _) = green_and_radial_derivative(k, 100.0);
        let expect = charge * g;
        assert!(
            (val - expect).norm() / expect.norm() < 0.01,
            "{val} vs {expect}"
        );
    }

    #[test]
    fn quadrature_field_matches_analytic_channel() {
        // single sphere, single-harmonic density: the layer potential is
        // -ikR j_l(kR) h_l(kr) Y_lm outside, -ikR h_l(kR) j_l(kr) Y_lm inside
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let trunc = 3;
        // fine rule: quadrature field evaluation is accurate a few node
        // spacings away from the surface, so shrink the spacing
        let disc = Discretization::with_exactness(&scene, trunc, 100);
        let nb = trunc * trunc;
        let mut phi = CVector::zeros(nb);
        let idx = crate::specfun::HarmonicIndex::new(1, 0);
        phi[idx.flat()] = c(1.0, 0.0);
        let k = c(1.3, 0.2);
        use crate::specfun::{sph_bessel, sph_harmonic, BesselKind};
        let (jkr, _) = sph_bessel(BesselKind::J, 1, k).unwrap();
        let (hkr, _) = sph_bessel(BesselKind::H1, 1, k).unwrap();
        let dir = Vector3::new(0.3f64, -0.2, 0.8).normalize();
        let theta = dir.z.acos();
        let phi_angle = dir.y.atan2(dir.x);
        let y = sph_harmonic(idx, theta, phi_angle);
        for r in [1.4f64, 2.5, 0.6] {
            let got = single_layer_at(&disc, k, &phi, &(dir * r));
            let (radial, _) = if r > 1.0 {
                sph_bessel(BesselKind::H1, 1, k * r).unwrap()
            } else {
                sph_bessel(BesselKind::J, 1, k * r).unwrap()
            };
            let other = if r > 1.0 { jkr } else { hkr };
            let expect = -Complex64::I * k * other * radial * y;
            assert!(
                (got - expect).norm() < 1e-9 * expect.norm().max(1e-3),
                "r={r}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn normal_derivative_jump_recovers_density() {
        // [d_nu S[phi]]_+- = phi, probed by finite differences at standoff
        // distances d and Richardson-extrapolated in d (the quadrature field
        // evaluation is only trustworthy a few node spacings off the surface)
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let trunc = 3;
        let disc = Discretization::with_exactness(&scene, trunc, 160);
        let nb = trunc * trunc;
        let mut phi = CVector::zeros(nb);
        let idx = crate::specfun::HarmonicIndex::new(1, 0);
        phi[idx.flat()] = c(1.0, 0.0);
        let k = c(1.3, 0.0);
        let dir = Vector3::new(0.3f64, -0.2, 0.8).normalize();
        let eval = |r: f64| single_layer_at(&disc, k, &phi, &(dir * r));
        let s = 0.03;
        let deriv = |r: f64| (eval(r + s) - eval(r - s)) / (2.0 * s);
        let jump_at = |d: f64| deriv(1.0 + d) - deriv(1.0 - d);
        // jump(d) = phi + c1 d + c2 d^2 + ...; eliminate c1 and c2
        let (j1, j2, j3) = (jump_at(0.1), jump_at(0.2), jump_at(0.3));
        let jump = 3.0 * j1 - 3.0 * j2 + j3;
        let theta = dir.z.acos();
        let phi_angle = dir.y.atan2(dir.x);
        let density_val = crate::specfun::sph_harmonic(idx, theta, phi_angle);
        assert!(
            (jump.re - density_val).abs() < 2e-2 * density_val.abs(),
            "jump {jump} vs density {density_val}"
        );
        assert!(jump.im.abs() < 2e-2 * density_val.abs());
    }

    #[test]
    fn near_boundary_rejected() {
        let scene = SphereScene::single(1.0, 1.0, 1.0);
        let disc = Discretization::new(&scene, 2);
        let dens = DensityPair {
            psi: CVector::zeros(4),
            phi: CVector::zeros(4),
        };
        let pts = vec![Vector3::new(1.0 + 1e-8, 0.0, 0.0)];
        let err = evaluate_field(&disc, &dens, c(1.0, 0.0), &pts).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
