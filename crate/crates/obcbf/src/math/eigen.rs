//! Symmetric eigenvalue problems (cyclic Jacobi) and the spectral norm
//! (power iteration on MᵀM). Two deliberately independent routes: the test
//! suite cross-checks one against the other.

use crate::error::Error;
use crate::math::linalg::{Matrix, Vector};

const SYMMETRY_TOL: f64 = 1e-12;

/// Full eigendecomposition S = V diag(λ) Vᵀ of a symmetric matrix by cyclic
/// Jacobi rotations. Eigenvalues are returned ascending with matching columns
/// of `vectors`.
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn symmetric_eigen(s: &Matrix) -> Result<SymmetricEigen, Error> {
    debug_assert!(s.is_square());
    let scale = s.max_abs().max(1.0);
    if s.asymmetry() > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { defect: s.asymmetry() });
    }
    let n = s.rows();
    let mut a = s.clone();
    let mut v = Matrix::identity(n);

    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-13 * a.max_abs().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Classical Jacobi rotation annihilating a[p][q].
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Extremal eigenvalues (λ_min, λ_max) of a symmetric matrix.
pub fn symmetric_eigen_extrema(s: &Matrix) -> Result<(f64, f64), Error> {
    let eig = symmetric_eigen(s)?;
    Ok((eig.values[0], *eig.values.last().unwrap()))
}

/// Largest singular value of M, via power iteration on MᵀM.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let b = m.transpose().matmul(m);
    let n = b.rows();
    if b.max_abs() == 0.0 {
        return 0.0;
    }
    // Deterministic start with unequal components so the iterate is unlikely
    // to be orthogonal to the dominant eigenvector.
    let mut v = Vector::from_fn(n, |i| 1.0 + 0.137 * i as f64);
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let w = b.matvec(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w.scale(1.0 / norm);
        let new_lambda = next.dot(&b.matvec(&next));
        let rel = (new_lambda - lambda).abs() / new_lambda.abs().max(1e-300);
        v = next;
        lambda = new_lambda;
        if rel < 1e-14 {
            break;
        }
    }
    lambda.max(0.0).sqrt()
}

/// Check that a symmetric matrix is positive definite (λ_min > tol·scale).
pub fn is_spd(s: &Matrix) -> Result<bool, Error> {
    let (lmin, _) = symmetric_eigen_extrema(s)?;
    Ok(lmin > 1e-12 * s.max_abs().max(1e-300))
}

/// P^{-1/2} for symmetric positive definite P, via eigendecomposition.
pub fn inverse_sqrt_spd(p: &Matrix) -> Result<Matrix, Error> {
    let eig = symmetric_eigen(p)?;
    if eig.values[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "matrix for inverse square root".into(),
            min_eigenvalue: eig.values[0],
        });
    }
    let n = p.rows();
    let d = Matrix::diag(&eig.values.iter().map(|l| 1.0 / l.sqrt()).collect::<Vec<_>>());
    Ok(eig.vectors.matmul(&d).matmul(&eig.vectors.transpose()))
        .map(|m| Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
}
