//! Error-bounded state estimators: the constant-gain linear-correction
//! observer, the continuous-time EKF with its differential Riccati equation,
//! and the estimation-error bound functions δ_x(t, ē₀) that make them
//! "error-bounded" in the sense used by the safety filter.

use std::sync::RwLock;

use crate::dynamics::{LinearSystemSpec, SystemModel};
use crate::error::Error;
use crate::math::{
    finite_difference_jacobian, is_spd, matrix_exponential, solve_lyapunov, spectral_norm,
    symmetric_eigen_extrema, Matrix, Vector,
};

/// Covariance state and noise model of the continuous EKF.
#[derive(Debug, Clone)]
pub struct RiccatiState {
    pub sigma: Matrix,
    pub w: Matrix,
    pub r: Matrix,
}

impl RiccatiState {
    pub fn new(sigma0: Matrix, w: Matrix, r: Matrix) -> Result<Self, Error> {
        for (name, m) in [("initial covariance", &sigma0), ("process noise", &w), ("measurement noise", &r)] {
            if !is_spd(m)? {
                let (lmin, _) = symmetric_eigen_extrema(m)?;
                return Err(Error::NotPositiveDefinite {
                    what: name.into(),
                    min_eigenvalue: lmin,
                });
            }
        }
        Ok(Self { sigma: sigma0, w, r })
    }
}

/// An estimator correction term x̂' = f(x̂) + g(x̂)u + r(t, x̂, y).
///
/// Both variants use a linear correction L (y - z(x̂)); they differ in where
/// the gain comes from. The EKF gain L(t) = Σ(t) Cᵀ R⁻¹ evolves with the
/// Riccati equation, which the simulator integrates alongside the estimate.
pub enum Estimator {
    ConstantGain {
        l: Matrix,
        gain_norm_bound: f64,
    },
    Ekf {
        c: Matrix,
        r_inv: Matrix,
        w: Matrix,
        sigma0: Matrix,
        gain_norm_bound: f64,
    },
}

impl Estimator {
    /// Constant-gain observer for a linear system. Requires Λ = A - LC to be
    /// Hurwitz, verified through the Lyapunov characterization: Λ is Hurwitz
    /// iff ΛᵀP + PΛ = -I has a symmetric positive definite solution.
    pub fn constant_gain(spec: &LinearSystemSpec, l: Matrix) -> Result<Self, Error> {
        let n = spec.a.rows();
        if l.rows() != n || l.cols() != spec.c.rows() {
            return Err(Error::Config("observer gain has wrong dimensions".into()));
        }
        let lambda = &spec.a - &l.matmul(&spec.c);
        assert_hurwitz(&lambda)?;
        let gain_norm_bound = spectral_norm(&l);
        Ok(Self::ConstantGain { l, gain_norm_bound })
    }

    /// Continuous EKF for `sys` with the given covariance/noise model. The
    /// measurement Jacobian is taken at the origin; both bundled scenarios
    /// have linear measurement maps, for which this is exact.
    pub fn ekf(sys: &SystemModel, riccati: &RiccatiState, gain_norm_bound: f64) -> Result<Self, Error> {
        let c = finite_difference_jacobian(|x| sys.measure(x), &Vector::zeros(sys.n), 1e-6);
        let r_inv = riccati.r.inverse()?;
        Ok(Self::Ekf {
            c,
            r_inv,
            w: riccati.w.clone(),
            sigma0: riccati.sigma.clone(),
            gain_norm_bound,
        })
    }

    /// Claimed bound L̄ ≥ ‖L(t)‖; monitored against the realized gain during
    /// simulation.
    pub fn gain_norm_bound(&self) -> f64 {
        match self {
            Self::ConstantGain { gain_norm_bound, .. } => *gain_norm_bound,
            Self::Ekf { gain_norm_bound, .. } => *gain_norm_bound,
        }
    }

    /// Initial covariance for estimators that carry one.
    pub fn initial_sigma(&self) -> Option<Matrix> {
        match self {
            Self::ConstantGain { .. } => None,
            Self::Ekf { sigma0, .. } => Some(sigma0.clone()),
        }
    }

    /// Gain at the current covariance (ignored by the constant-gain observer).
    pub fn gain(&self, sigma: Option<&Matrix>) -> Matrix {
        match self {
            Self::ConstantGain { l, .. } => l.clone(),
            Self::Ekf { c, r_inv, .. } => {
                let sigma = sigma.expect("EKF gain requires a covariance");
                sigma.matmul(&c.transpose()).matmul(r_inv)
            }
        }
    }

    /// Correction term r(t, x̂, y) = L (y - z(x̂)).
    pub fn correction(&self, sys: &SystemModel, sigma: Option<&Matrix>, xhat: &Vector, y: &Vector) -> Vector {
        let innovation = y - &sys.measure(xhat);
        self.gain(sigma).matvec(&innovation)
    }

    /// Riccati rate Σ' = FΣ + ΣFᵀ + W - ΣCᵀR⁻¹CΣ with F the drift Jacobian
    /// at the current estimate.
    pub fn riccati_rate(&self, sys: &SystemModel, sigma: &Matrix, xhat: &Vector) -> Matrix {
        match self {
            Self::ConstantGain { .. } => Matrix::zeros(sigma.rows(), sigma.cols()),
            Self::Ekf { c, r_inv, w, .. } => {
                let f = sys.drift_jacobian(xhat);
                let fs = f.matmul(sigma);
                let correction = sigma
                    .matmul(&c.transpose())
                    .matmul(r_inv)
                    .matmul(c)
                    .matmul(sigma);
                &(&(&fs + &fs.transpose()) + w) - &correction
            }
        }
    }
}

/// Hurwitz test via the Lyapunov equation; reports eigenvalues exactly for
/// 2x2 matrices, otherwise the Lyapunov diagnostic.
fn assert_hurwitz(lambda: &Matrix) -> Result<(), Error> {
    let fail = |details: String| Err(Error::NotHurwitz { details });
    let describe = || {
        if lambda.rows() == 2 {
            let tr = lambda[(0, 0)] + lambda[(1, 1)];
            let det = lambda[(0, 0)] * lambda[(1, 1)] - lambda[(0, 1)] * lambda[(1, 0)];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                let r = disc.sqrt();
                format!("eigenvalues {:.6}, {:.6}", (tr + r) / 2.0, (tr - r) / 2.0)
            } else {
                let im = (-disc).sqrt() / 2.0;
                format!("eigenvalues {:.6} ± {:.6}i", tr / 2.0, im)
            }
        } else {
            "Lyapunov equation test failed".to_string()
        }
    };
    match solve_lyapunov(lambda, &Matrix::identity(lambda.rows())) {
        Err(_) => fail(describe()),
        Ok(p) => {
            let (lmin, _) = symmetric_eigen_extrema(&p)?;
            if lmin > 0.0 {
                Ok(())
            } else {
                fail(format!("{} (Lyapunov solution min eigenvalue {lmin:.3e})", describe()))
            }
        }
    }
}

/// Time-indexed estimation-error bound δ_x(t, ē₀) plus the region bounds the
/// safety filter needs (ē₀ at the start, ē_b inside the backup set).
pub struct ErrorBoundProfile {
    pub initial_bound: f64,
    pub backup_region_bound: f64,
    kind: BoundKind,
}

enum BoundKind {
    Linear(LinearErrorBound),
    Exponential { beta: f64, kappa: f64 },
}

impl ErrorBoundProfile {
    pub fn linear(e0: f64, eb: f64, lambda: Matrix, l: Matrix, vbar: f64) -> Result<Self, Error> {
        assert_hurwitz(&lambda)?;
        Ok(Self {
            initial_bound: e0,
            backup_region_bound: eb,
            kind: BoundKind::Linear(LinearErrorBound::new(lambda, l, vbar)),
        })
    }

    /// Assumed exponentially decaying bound ē₀ - β(1 - e^{-κt}); the
    /// simulator verifies it against the realized error, it is not proven.
    pub fn exponential(e0: f64, eb: f64, beta: f64, kappa: f64) -> Result<Self, Error> {
        if !(beta >= 0.0 && beta < e0) || kappa <= 0.0 {
            return Err(Error::Config(
                "exponential error bound requires 0 <= beta < e0 and kappa > 0".into(),
            ));
        }
        Ok(Self {
            initial_bound: e0,
            backup_region_bound: eb,
            kind: BoundKind::Exponential { beta, kappa },
        })
    }

    /// δ_x(t, ē₀).
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.kind {
            BoundKind::Linear(lin) => lin.eval(t, self.initial_bound),
            BoundKind::Exponential { beta, kappa } => {
                self.initial_bound - beta * (1.0 - (-kappa * t).exp())
            }
        }
    }
}

/// Analytical bound for constant-gain linear observers:
/// δ_x(t) = ē₀ ‖e^{Λt}‖ + v̄ ∫₀ᵗ ‖e^{Λs} L‖ ds.
///
/// The integrand is independent of the query time after the substitution
/// s = t - θ, so the integral is a cumulative prefix evaluated by composite
/// Simpson quadrature on a cached grid.
pub struct LinearErrorBound {
    lambda: Matrix,
    l: Matrix,
    vbar: f64,
    step: f64,
    /// prefix[k] = ∫₀^{k·step} ‖e^{Λs}L‖ ds, extended lazily.
    prefix: RwLock<Vec<f64>>,
    /// node_g[k] = ‖e^{Λ k·step} L‖.
    node_g: RwLock<Vec<f64>>,
}

impl LinearErrorBound {
    pub fn new(lambda: Matrix, l: Matrix, vbar: f64) -> Self {
        let g0 = spectral_norm(&l);
        Self {
            lambda,
            l,
            vbar,
            step: 0.01,
            prefix: RwLock::new(vec![0.0]),
            node_g: RwLock::new(vec![g0]),
        }
    }

    fn integrand(&self, s: f64) -> f64 {
        spectral_norm(&matrix_exponential(&self.lambda, s).matmul(&self.l))
    }

    fn ensure_grid(&self, upto: usize) {
        {
            let prefix = self.prefix.read().unwrap();
            if prefix.len() > upto {
                return;
            }
        }
        let mut prefix = self.prefix.write().unwrap();
        let mut node_g = self.node_g.write().unwrap();
        while prefix.len() <= upto {
            let k = prefix.len();
            let left = (k - 1) as f64 * self.step;
            let g_left = node_g[k - 1];
            let g_mid = self.integrand(left + 0.5 * self.step);
            let g_right = self.integrand(left + self.step);
            let inc = self.step / 6.0 * (g_left + 4.0 * g_mid + g_right);
            let total = prefix[k - 1] + inc;
            prefix.push(total);
            node_g.push(g_right);
        }
    }

    pub fn eval(&self, t: f64, e0: f64) -> f64 {
        let decay = e0 * spectral_norm(&matrix_exponential(&self.lambda, t));
        if self.vbar == 0.0 {
            return decay;
        }
        let k = (t / self.step).floor() as usize;
        self.ensure_grid(k);
        let base = {
            let prefix = self.prefix.read().unwrap();
            prefix[k]
        };
        let t_left = k as f64 * self.step;
        let rem = t - t_left;
        let partial = if rem > 1e-12 {
            let g_left = self.node_g.read().unwrap()[k];
            let g_mid = self.integrand(t_left + 0.5 * rem);
            let g_right = self.integrand(t);
            rem / 6.0 * (g_left + 4.0 * g_mid + g_right)
        } else {
            0.0
        };
        decay + self.vbar * (base + partial)
    }
}

/// Free-function form of the analytical linear bound. Builds a throwaway
/// quadrature grid; scenario code holds an [`ErrorBoundProfile`] instead.
pub fn error_bound_linear(t: f64, e0: f64, lambda: &Matrix, l: &Matrix, vbar: f64) -> f64 {
    LinearErrorBound::new(lambda.clone(), l.clone(), vbar).eval(t, e0)
}

/// The assumed exponential profile ē₀ - β(1 - e^{-κt}).
pub fn error_bound_exponential(t: f64, e0: f64, beta: f64, kappa: f64) -> f64 {
    e0 - beta * (1.0 - (-kappa * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::double_integrator_spec;
    use crate::math::rk4_integrate;
    use approx::assert_relative_eq;

    #[test]
    fn consistent_measurement_gives_zero_correction() {
        let spec = double_integrator_spec();
        let sys = crate::dynamics::make_linear(&spec);
        let l = Matrix::from_rows(&[&[2.0], &[2.0]]);
        let est = Estimator::constant_gain(&spec, l).unwrap();
        let xhat = Vector::new(vec![0.4, -0.2]);
        let y = sys.measure(&xhat);
        let r = est.correction(&sys, None, &xhat, &y);
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn case_study_gain_accepted() {
        // Λ = [[-2, 1], [-2, 0]], eigenvalues -1 ± i: Hurwitz.
        let spec = double_integrator_spec();
        let est = Estimator::constant_gain(&spec, Matrix::from_rows(&[&[2.0], &[2.0]]));
        assert!(est.is_ok());
        let est = est.unwrap();
        assert_relative_eq!(
            est.gain_norm_bound(),
            (8.0f64).sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn marginal_gain_rejected() {
        // L = 0 with A having a zero eigenvalue: Λ not Hurwitz.
        let spec = double_integrator_spec();
        let res = Estimator::constant_gain(&spec, Matrix::from_rows(&[&[0.0], &[0.0]]));
        assert!(matches!(res, Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn ekf_scalar_riccati_closed_form() {
        // F = 0, C = I, W = 0, R = 1, Σ₀ = 1 gives Σ(t) = 1/(1+t).
        let spec = LinearSystemSpec::new(
            Matrix::from_rows(&[&[0.0]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let sys = crate::dynamics::make_linear(&spec);
        let riccati = RiccatiState::new(
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1e-300]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let est = Estimator::ekf(&sys, &riccati, 10.0).unwrap();
        let xhat = Vector::zeros(1);
        let traj = rk4_integrate(
            |_, s| {
                let sigma = Matrix::from_rows(&[&[s[0]]]);
                let rate = est.riccati_rate(&sys, &sigma, &xhat);
                Vector::new(vec![rate[(0, 0)]])
            },
            &Vector::new(vec![1.0]),
            (0.0, 3.0),
            300,
        )
        .unwrap();
        assert_relative_eq!(traj.last().unwrap()[0], 1.0 / 4.0, epsilon = 1e-8);
    }

    #[test]
    fn ekf_scalar_riccati_steady_state() {
        // F = 0: steady state of σ' = w - σ²/r is σ = sqrt(w r).
        let spec = LinearSystemSpec::new(
            Matrix::from_rows(&[&[0.0]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let sys = crate::dynamics::make_linear(&spec);
        let w = 0.04;
        let r = 0.25;
        let riccati = RiccatiState::new(
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[w]]),
            Matrix::from_rows(&[&[r]]),
        )
        .unwrap();
        let est = Estimator::ekf(&sys, &riccati, 10.0).unwrap();
        let xhat = Vector::zeros(1);
        let traj = rk4_integrate(
            |_, s| {
                let sigma = Matrix::from_rows(&[&[s[0]]]);
                Vector::new(vec![est.riccati_rate(&sys, &sigma, &xhat)[(0, 0)]])
            },
            &Vector::new(vec![1.0]),
            (0.0, 40.0),
            4000,
        )
        .unwrap();
        assert_relative_eq!(traj.last().unwrap()[0], (w * r).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn riccati_preserves_symmetry() {
        let j = Matrix::diag(&[0.5186, 0.8006, 0.8006]);
        let sys = crate::dynamics::make_spacecraft(&j).unwrap();
        let riccati = RiccatiState::new(
            Matrix::diag(&[4e-4, 4e-4, 4e-4]),
            Matrix::diag(&[1.8e-5, 1.8e-5, 1.8e-5]),
            Matrix::diag(&[2e-4, 2e-4, 2e-4]),
        )
        .unwrap();
        let est = Estimator::ekf(&sys, &riccati, 10.0).unwrap();
        let xhat = Vector::new(vec![0.05, -0.02, 0.03]);
        let mut sigma = riccati.sigma.clone();
        let h = 0.01;
        for _ in 0..100 {
            // RK4 on the matrix ODE, flattened.
            let flat = |m: &Matrix| Vector::from_fn(9, |i| m[(i / 3, i % 3)]);
            let unflat = |v: &Vector| Matrix::from_fn(3, 3, |i, j| v[i * 3 + j]);
            let rate = |s: &Vector| flat(&est.riccati_rate(&sys, &unflat(s), &xhat));
            let traj = rk4_integrate(|_, s| rate(s), &flat(&sigma), (0.0, h), 1).unwrap();
            sigma = unflat(traj.last().unwrap());
        }
        assert!(sigma.asymmetry() < 1e-10);
        let (lmin, _) = symmetric_eigen_extrema(&sigma).unwrap();
        assert!(lmin > 0.0);
    }

    #[test]
    fn linear_bound_at_zero_is_e0() {
        let lambda = Matrix::from_rows(&[&[-2.0, 1.0], &[-2.0, 0.0]]);
        let l = Matrix::from_rows(&[&[2.0], &[2.0]]);
        let b = error_bound_linear(0.0, 0.2, &lambda, &l, 0.02);
        assert_relative_eq!(b, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn linear_bound_scalar_closed_form() {
        // Λ = -1, L = 1: δ(t) = 0.2 e^{-t} + 0.02 (1 - e^{-t}); at ln 2: 0.11.
        let lambda = Matrix::from_rows(&[&[-1.0]]);
        let l = Matrix::from_rows(&[&[1.0]]);
        let bound = LinearErrorBound::new(lambda, l, 0.02);
        let t = 2.0f64.ln();
        assert_relative_eq!(bound.eval(t, 0.2), 0.11, epsilon = 1e-9);
        // A second, off-grid point exercising the cached prefix.
        let t2: f64 = 1.7123;
        let expected = 0.2 * (-t2).exp() + 0.02 * (1.0 - (-t2).exp());
        assert_relative_eq!(bound.eval(t2, 0.2), expected, epsilon = 1e-9);
    }

    #[test]
    fn noise_free_bound_decays() {
        let lambda = Matrix::from_rows(&[&[-2.0, 1.0], &[-2.0, 0.0]]);
        let l = Matrix::from_rows(&[&[2.0], &[2.0]]);
        let b0 = error_bound_linear(0.0, 0.2, &lambda, &l, 0.0);
        let b5 = error_bound_linear(5.0, 0.2, &lambda, &l, 0.0);
        let b10 = error_bound_linear(10.0, 0.2, &lambda, &l, 0.0);
        assert!(b5 < b0 && b10 < b5);
        assert!(b10 < 1e-3);
    }

    #[test]
    fn linear_bound_is_continuous_on_grid() {
        let lambda = Matrix::from_rows(&[&[-2.0, 1.0], &[-2.0, 0.0]]);
        let l = Matrix::from_rows(&[&[2.0], &[2.0]]);
        let bound = LinearErrorBound::new(lambda, l, 0.02);
        let mut prev = bound.eval(0.0, 0.2);
        for k in 1..=300 {
            let t = k as f64 * 0.01;
            let cur = bound.eval(t, 0.2);
            assert!((cur - prev).abs() < 0.1 * 0.01 * 20.0, "jump at t = {t}");
            prev = cur;
        }
    }

    #[test]
    fn exponential_profile_values() {
        assert_relative_eq!(error_bound_exponential(0.0, 0.02, 0.017, 0.2), 0.02);
        // Limit t -> ∞ is ē₀ - β.
        let far = error_bound_exponential(1e9, 0.02, 0.017, 0.2);
        assert_relative_eq!(far, 0.003, epsilon = 1e-12);
        // β = 0 keeps the bound constant.
        assert_relative_eq!(error_bound_exponential(7.0, 0.02, 0.0, 0.2), 0.02);
    }
}
