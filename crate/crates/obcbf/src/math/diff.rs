//! Finite-difference Jacobians, used as the oracle for every analytic
//! Jacobian in the crate.

use crate::math::linalg::{Matrix, Vector};

/// Central-difference Jacobian of `f` at `x` with step `h`:
/// column j = (f(x + h e_j) - f(x - h e_j)) / (2h).
pub fn finite_difference_jacobian(
    f: impl Fn(&Vector) -> Vector,
    x: &Vector,
    h: f64,
) -> Matrix {
    debug_assert!(h > 0.0);
    let n = x.dim();
    let rows = f(x).dim();
    let mut jac = Matrix::zeros(rows, n);
    for j in 0..n {
        let mut plus = x.clone();
        plus[j] += h;
        let mut minus = x.clone();
        minus[j] -= h;
        let fp = f(&plus);
        let fm = f(&minus);
        for i in 0..rows {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_field() {
        let jac = finite_difference_jacobian(|x| x.clone(), &Vector::new(vec![0.3, -1.2]), 1e-5);
        assert!((&jac - &Matrix::identity(2)).max_abs() < 1e-9);
    }

    #[test]
    fn linear_field_is_exact() {
        let jac = finite_difference_jacobian(
            |x| Vector::new(vec![x[1], 0.0]),
            &Vector::new(vec![5.0, -2.0]),
            1e-4,
        );
        let expected = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((&jac - &expected).max_abs() < 1e-10);
    }
}
