//! Dense complex linear algebra helpers: scaled log-determinants, general
//! complex eigen-decomposition, and smallest-singular-direction extraction.
//!
//! Factorizations are backed by nalgebra (LU, Schur, Hermitian eigen);
//! eigenvectors of general matrices come from inverse iteration with
//! re-orthogonalization inside degenerate clusters.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// log|det A| and the determinant phase, from a pivoted LU. Never overflows:
/// the magnitude is accumulated in log space.
pub fn logdet(a: &CMatrix) -> Option<(f64, f64)> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let mut log_abs = 0.0;
    let mut phase = 0.0;
    let u = lu.u();
    for i in 0..n {
        let d = u[(i, i)];
        if d == Complex64::new(0.0, 0.0) {
            return None;
        }
        log_abs += d.norm().ln();
        phase += d.arg();
    }
    let parity: f64 = lu.p().determinant();
    if parity < 0.0 {
        phase += std::f64::consts::PI;
    }
    if !log_abs.is_finite() {
        return None;
    }
    Some((log_abs, phase))
}

/// Eigenvalues of a general complex matrix via Schur reduction. Matrices
/// that are already numerically upper triangular (diagonal ones included)
/// short-circuit to their diagonal; the QR iteration does not terminate on
/// an exactly zero matrix.
pub fn eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    if is_upper_triangular(a) {
        return (0..n).map(|i| a[(i, i)]).collect();
    }
    let (_, t) = a.clone().schur().unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

fn is_upper_triangular(a: &CMatrix) -> bool {
    let n = a.nrows();
    let scale = a.norm();
    let mut below = 0.0f64;
    for i in 1..n {
        for j in 0..i {
            below = below.max(a[(i, j)].norm());
        }
    }
    below <= 1e-14 * (1.0 + scale)
}

/// Full eigen-decomposition of a general complex matrix. Eigenvectors are
/// recovered by inverse iteration against each (clustered) eigenvalue and
/// re-orthogonalized within clusters so that degenerate eigenspaces come out
/// with an orthonormal basis.
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Columns are unit-norm eigenvectors matching `values`.
    pub vectors: CMatrix,
}

pub fn eigen(a: &CMatrix) -> Result<Eigen> {
    let n = a.nrows();
    let values = eigenvalues(a);
    let scale = matrix_norm(a).max(1e-300);
    let cluster_tol = 1e-8 * scale;
    let mut vectors = CMatrix::zeros(n, n);
    let mut done: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for (i, &lambda) in values.iter().enumerate() {
        let cluster = done.iter_mut().find(|(mu, _)| (*mu - lambda).norm() <= cluster_tol);
        let prior: Vec<usize> = match cluster {
            Some((_, members)) => {
                members.push(i);
                members[..members.len() - 1].to_vec()
            }
            None => {
                done.push((lambda, vec![i]));
                Vec::new()
            }
        };
        let v = inverse_iteration(a, lambda, &prior.iter().map(|&j| vectors.column(j).into_owned()).collect::<Vec<_>>())?;
        vectors.set_column(i, &v);
    }
    Ok(Eigen { values, vectors })
}

fn inverse_iteration(a: &CMatrix, lambda: Complex64, orthogonal_to: &[CVector]) -> Result<CVector> {
    let n = a.nrows();
    // the absolute floor keeps LU pivots away from denormals when the whole
    // matrix is zero or vanishingly small
    let scale = matrix_norm(a).max(1e-30);
    // small complex shift keeps the factorization usable at exact eigenvalues
    let shift = lambda + Complex64::new(1e-13, 1e-13) * scale;
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = CVector::from_fn(n, |i, _| {
        Complex64::new(((i * 2654435761 + 12345) % 1000) as f64 / 1000.0 - 0.5, 0.1 + (i as f64 * 0.37).sin() * 0.05)
    });
    orthogonalize(&mut v, orthogonal_to);
    normalize(&mut v)?;
    for _ in 0..50 {
        let mut w = lu
            .solve(&v)
            .ok_or_else(|| Error::NonConvergence("inverse iteration: singular shift".into()))?;
        orthogonalize(&mut w, orthogonal_to);
        normalize(&mut w)?;
        let residual = (a * &w - &w * lambda).norm();
        v = w;
        if residual <= 1e-12 * scale {
            break;
        }
    }
    Ok(v)
}

fn orthogonalize(v: &mut CVector, basis: &[CVector]) {
    for _ in 0..2 {
        for b in basis {
            let proj = b.dotc(v);
            *v -= b * proj;
        }
    }
}

fn normalize(v: &mut CVector) -> Result<()> {
    let norm = v.norm();
    if norm < 1e-200 {
        return Err(Error::NonConvergence("inverse iteration produced zero vector".into()));
    }
    *v /= Complex64::new(norm, 0.0);
    Ok(())
}

/// Spectral norm estimate by a few power-iteration sweeps on A* A.
pub fn matrix_norm(a: &CMatrix) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = CVector::from_element(n, Complex64::new(1.0, 0.0));
    v /= Complex64::new(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..30 {
        let w = a * &v;
        let u = a.adjoint() * w;
        let norm = u.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        let rel = (next - sigma).abs() / next.max(1e-300);
        v = u / Complex64::new(norm, 0.0);
        sigma = next;
        if rel < 1e-10 {
            break;
        }
    }
    sigma
}

/// Smallest singular value and the corresponding right/left singular vectors,
/// by inverse iteration on A and A*.
pub fn smallest_singular(a: &CMatrix) -> Result<(f64, CVector, CVector)> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let lu_adj = a.adjoint().lu();
    let mut v = CVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.61).cos(), (i as f64 * 0.17).sin()));
    normalize(&mut v)?;
    let mut sigma = f64::INFINITY;
    for _ in 0..60 {
        let mut w = lu
            .solve(&v)
            .ok_or_else(|| Error::NonConvergence("smallest_singular: exactly singular".into()))?;
        let growth = w.norm();
        normalize(&mut w)?;
        let mut u = lu_adj
            .solve(&w)
            .ok_or_else(|| Error::NonConvergence("smallest_singular: exactly singular".into()))?;
        normalize(&mut u)?;
        let next = 1.0 / growth.max(1e-300);
        let rel = (next - sigma).abs() / next.max(1e-300);
        v = u.clone();
        sigma = next;
        if rel < 1e-12 {
            break;
        }
    }
    // right vector v ~ argmin |Av|; left vector from one more solve
    let right = v.clone();
    let av = a * &right;
    let s = av.norm();
    let left = if s > 1e-280 {
        let mut l = av;
        normalize(&mut l)?;
        l
    } else {
        let mut l = lu_adj.solve(&right).unwrap_or_else(|| right.clone());
        normalize(&mut l)?;
        l
    };
    Ok((s, right, left))
}

/// 2-norm condition estimate via power iterations for the largest singular
/// value and inverse iterations for the smallest.
pub fn condition_estimate(a: &CMatrix) -> f64 {
    let top = matrix_norm(a);
    match smallest_singular(a) {
        Ok((bottom, _, _)) if bottom > 0.0 => top / bottom,
        _ => f64::INFINITY,
    }
}

/// Hermitian eigen-decomposition (values ascending).
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let se = nalgebra::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(a.nrows(), a.ncols());
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Numerical rank with respect to `tol` on singular values, computed from the
/// Hermitian eigenvalues of A* A.
pub fn numerical_rank(a: &CMatrix, tol: f64) -> usize {
    let gram = a.adjoint() * a;
    let (vals, _) = hermitian_eigen(&gram);
    vals.iter().filter(|&&v| v.max(0.0).sqrt() > tol).count()
}
