//! Matrix exponential by scaling and squaring with a truncated Taylor series.

use crate::math::linalg::Matrix;

/// Compute e^{M·scale}.
///
/// The argument is scaled by powers of two until its 1-norm is below 0.5,
/// the series is summed to machine-precision stagnation, and the result is
/// squared back up. Accurate to ~1e-12 relative for ‖M·scale‖ ≤ 50.
pub fn matrix_exponential(m: &Matrix, scale: f64) -> Matrix {
    debug_assert!(m.is_square());
    let n = m.rows();
    let a = m.scale(scale);

    // 1-norm (max column sum) controls the series argument size.
    let mut norm1: f64 = 0.0;
    for j in 0..n {
        let col_sum: f64 = (0..n).map(|i| a[(i, j)].abs()).sum();
        norm1 = norm1.max(col_sum);
    }

    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a.scale(0.5f64.powi(squarings as i32));

    // Taylor series: I + B + B²/2! + ... until terms stagnate.
    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=60 {
        term = term.matmul(&b).scale(1.0 / k as f64);
        result = &result + &term;
        if term.max_abs() <= 1e-17 * result.max_abs() {
            break;
        }
    }

    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::linalg::Vector;
    use crate::math::ode::rk4_integrate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let e = matrix_exponential(&Matrix::zeros(3, 3), 7.0);
        assert!((&e - &Matrix::identity(3)).max_abs() == 0.0);
    }

    #[test]
    fn nilpotent_series_terminates() {
        let m = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e = matrix_exponential(&m, 1.0);
        let expected = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!((&e - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_case() {
        let m = Matrix::diag(&[-1.0, 2.0]);
        let e = matrix_exponential(&m, 0.5);
        assert_relative_eq!(e[(0, 0)], (-0.5f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(e[(1, 1)], 1.0f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(e[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn large_argument_stays_accurate() {
        // diag entries up to 40: e^{40} vs closed form, relative error <= 1e-10.
        let m = Matrix::diag(&[40.0, -40.0]);
        let e = matrix_exponential(&m, 1.0);
        assert_relative_eq!(e[(0, 0)], 40.0f64.exp(), max_relative = 1e-10);
        assert_relative_eq!(e[(1, 1)], (-40.0f64).exp(), max_relative = 1e-10);
    }

    fn small_matrix_strategy() -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-0.7f64..0.7, 9).prop_map(|v| {
            Matrix::from_rows(&[&v[0..3], &v[3..6], &v[6..9]])
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Semigroup property e^{M(s+t)} = e^{Ms} e^{Mt}.
        #[test]
        fn semigroup(m in small_matrix_strategy(), s in 0.1f64..1.5, t in 0.1f64..1.5) {
            let whole = matrix_exponential(&m, s + t);
            let split = matrix_exponential(&m, s).matmul(&matrix_exponential(&m, t));
            prop_assert!((&whole - &split).max_abs() < 1e-8);
        }

        // RK4 on the linear field x' = Mx reproduces e^{Mτ} x0.
        #[test]
        fn matches_rk4_on_linear_field(m in small_matrix_strategy(), tau in 0.1f64..2.0) {
            let x0 = Vector::new(vec![1.0, -0.5, 0.25]);
            let traj = rk4_integrate(|_, x| m.matvec(x), &x0, (0.0, tau), 100).unwrap();
            let expected = matrix_exponential(&m, tau).matvec(&x0);
            let err = (traj.last().unwrap() - &expected).norm();
            prop_assert!(err < 1e-6, "err = {err}");
        }
    }
}
