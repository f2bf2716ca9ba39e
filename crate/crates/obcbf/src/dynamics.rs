//! Control-affine system models x' = f(x) + g(x)u with measurement maps
//! y = z(x) + v, plus the concrete plants used by the bundled scenarios:
//! the double integrator, rigid-body spacecraft rotation, and generic
//! linear time-invariant systems.

use std::sync::Arc;

use crate::error::Error;
use crate::math::{
    finite_difference_jacobian, spectral_norm, symmetric_eigen_extrema, Matrix, Vector,
};

type VecFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type MatFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type DirJacFn = Arc<dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync>;

/// A control-affine plant with analytic Jacobians and a measurement map.
#[derive(Clone)]
pub struct SystemModel {
    pub n: usize,
    pub m: usize,
    pub y_dim: usize,
    drift: VecFn,
    input_map: MatFn,
    drift_jacobian: MatFn,
    /// x, u ↦ ∂(g(x)u)/∂x; identically zero for constant input maps.
    input_map_directional_jacobian: DirJacFn,
    measure: VecFn,
    /// Lipschitz constant of the measurement map.
    pub measure_lipschitz: f64,
}

impl SystemModel {
    pub fn drift(&self, x: &Vector) -> Vector {
        (self.drift)(x)
    }

    pub fn input_map(&self, x: &Vector) -> Matrix {
        (self.input_map)(x)
    }

    pub fn drift_jacobian(&self, x: &Vector) -> Matrix {
        (self.drift_jacobian)(x)
    }

    pub fn input_map_directional_jacobian(&self, x: &Vector, u: &Vector) -> Matrix {
        (self.input_map_directional_jacobian)(x, u)
    }

    pub fn measure(&self, x: &Vector) -> Vector {
        (self.measure)(x)
    }

    /// x' = f(x) + g(x) u.
    pub fn dynamics(&self, x: &Vector, u: &Vector) -> Vector {
        let mut dx = self.drift(x);
        dx.axpy(1.0, &self.input_map(x).matvec(u));
        dx
    }
}

/// Axis-aligned admissible input set [lower, upper] componentwise.
#[derive(Debug, Clone)]
pub struct InputBox {
    pub lower: Vector,
    pub upper: Vector,
}

impl InputBox {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self, Error> {
        if lower.dim() != upper.dim() {
            return Err(Error::Config("input box bounds have mismatched dimensions".into()));
        }
        for i in 0..lower.dim() {
            if lower[i] > upper[i] {
                return Err(Error::Config(format!(
                    "input box component {i} has lower {} > upper {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box [-u_max, u_max]^m.
    pub fn symmetric(u_max: f64, m: usize) -> Self {
        Self {
            lower: Vector::from_fn(m, |_| -u_max),
            upper: Vector::from_fn(m, |_| u_max),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn contains(&self, u: &Vector, tol: f64) -> bool {
        (0..self.dim()).all(|i| u[i] >= self.lower[i] - tol && u[i] <= self.upper[i] + tol)
    }

    pub fn clamp(&self, u: &Vector) -> Vector {
        Vector::from_fn(self.dim(), |i| u[i].clamp(self.lower[i], self.upper[i]))
    }
}

/// Linear time-invariant system x' = Ax + Bu, y = Cx.
#[derive(Debug, Clone)]
pub struct LinearSystemSpec {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl LinearSystemSpec {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self, Error> {
        let n = a.rows();
        if !a.is_square() || b.rows() != n || c.cols() != n {
            return Err(Error::Config("linear system matrices have inconsistent dimensions".into()));
        }
        let spec = Self { a, b, c };
        let rank = spec.observability_rank();
        if rank < n {
            return Err(Error::NotObservable { rank, n });
        }
        Ok(spec)
    }

    /// Rank of [C; CA; ...; CA^{n-1}] from the eigenvalues of OᵀO.
    fn observability_rank(&self) -> usize {
        let n = self.a.rows();
        let y = self.c.rows();
        let mut obs = Matrix::zeros(n * y, n);
        let mut block = self.c.clone();
        for k in 0..n {
            for i in 0..y {
                for j in 0..n {
                    obs[(k * y + i, j)] = block[(i, j)];
                }
            }
            block = block.matmul(&self.a);
        }
        let gram = obs.transpose().matmul(&obs);
        let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
        let eig = crate::math::symmetric_eigen(&sym).expect("gram matrix is symmetric");
        let lmax = eig.values.last().copied().unwrap_or(0.0).max(1e-300);
        eig.values.iter().filter(|&&l| l > 1e-10 * lmax).count()
    }
}

/// Double integrator: f(x) = (x2, 0), g = [0; 1], y = x1.
pub fn make_double_integrator() -> SystemModel {
    let spec = double_integrator_spec();
    make_linear(&spec)
}

/// The (A, B, C) triple of the double integrator.
pub fn double_integrator_spec() -> LinearSystemSpec {
    LinearSystemSpec::new(
        Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
        Matrix::from_rows(&[&[0.0], &[1.0]]),
        Matrix::from_rows(&[&[1.0, 0.0]]),
    )
    .expect("double integrator is observable")
}

/// Rigid-body rotation: ω' = J⁻¹(-ω × Jω + u), measured ω directly.
///
/// The inertia tensor must be symmetric positive definite.
pub fn make_spacecraft(j: &Matrix) -> Result<SystemModel, Error> {
    if !j.is_square() || j.rows() != 3 {
        return Err(Error::Config("inertia tensor must be 3x3".into()));
    }
    let (lmin, _) = symmetric_eigen_extrema(j)?;
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "inertia tensor".into(),
            min_eigenvalue: lmin,
        });
    }
    let j_inv = j.inverse()?;
    let j_own = j.clone();
    let ji_drift = j_inv.clone();
    let ji_jac = j_inv.clone();
    let j_jac = j.clone();
    let ji_g = j_inv.clone();

    Ok(SystemModel {
        n: 3,
        m: 3,
        y_dim: 3,
        drift: Arc::new(move |w: &Vector| {
            let jw = j_own.matvec(w);
            ji_drift.matvec(&cross(w, &jw).scale(-1.0))
        }),
        input_map: Arc::new(move |_| ji_g.clone()),
        // ∂/∂ω [J⁻¹(-ω × Jω)] = J⁻¹(-[ω]× J + [Jω]×)
        drift_jacobian: Arc::new(move |w: &Vector| {
            let jw = j_jac.matvec(w);
            let m = &skew(&jw) - &skew(w).matmul(&j_jac);
            ji_jac.matmul(&m)
        }),
        input_map_directional_jacobian: Arc::new(|_, _| Matrix::zeros(3, 3)),
        measure: Arc::new(|w: &Vector| w.clone()),
        measure_lipschitz: 1.0,
    })
}

/// LTI model from an (A, B, C) spec.
pub fn make_linear(spec: &LinearSystemSpec) -> SystemModel {
    let n = spec.a.rows();
    let m = spec.b.cols();
    let y_dim = spec.c.rows();
    let a = spec.a.clone();
    let a_jac = spec.a.clone();
    let b = spec.b.clone();
    let c = spec.c.clone();
    let lz = spectral_norm(&spec.c);
    SystemModel {
        n,
        m,
        y_dim,
        drift: Arc::new(move |x: &Vector| a.matvec(x)),
        input_map: Arc::new(move |_| b.clone()),
        drift_jacobian: Arc::new(move |_| a_jac.clone()),
        input_map_directional_jacobian: Arc::new(move |_, _| Matrix::zeros(n, n)),
        measure: Arc::new(move |x: &Vector| c.matvec(x)),
        measure_lipschitz: lz,
    }
}

/// Cross product in R³.
pub fn cross(a: &Vector, b: &Vector) -> Vector {
    debug_assert!(a.dim() == 3 && b.dim() == 3);
    Vector::new(vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

/// Skew-symmetric matrix [v]× with [v]× w = v × w.
pub fn skew(v: &Vector) -> Matrix {
    debug_assert!(v.dim() == 3);
    Matrix::from_rows(&[
        &[0.0, -v[2], v[1]],
        &[v[2], 0.0, -v[0]],
        &[-v[1], v[0], 0.0],
    ])
}

/// A differentiable state-feedback controller used to close the loop.
#[derive(Clone)]
pub struct Controller {
    control: VecFn,
    jacobian: MatFn,
}

impl Controller {
    pub fn new(
        control: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jacobian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            control: Arc::new(control),
            jacobian: Arc::new(jacobian),
        }
    }

    /// Controller with a finite-difference Jacobian fallback.
    pub fn from_control_fn(control: impl Fn(&Vector) -> Vector + Send + Sync + Clone + 'static) -> Self {
        let for_jac = control.clone();
        Self {
            control: Arc::new(control),
            jacobian: Arc::new(move |x| finite_difference_jacobian(|y| for_jac(y), x, 1e-6)),
        }
    }

    pub fn control(&self, x: &Vector) -> Vector {
        (self.control)(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }
}

/// Closed-loop field x ↦ f(x) + g(x)k(x) and its Jacobian
/// F_cl(x) = ∂f/∂x + ∂(g(x)k(x))/∂x.
pub struct ClosedLoopField {
    sys: SystemModel,
    controller: Controller,
}

impl ClosedLoopField {
    pub fn new(sys: SystemModel, controller: Controller) -> Self {
        Self { sys, controller }
    }

    pub fn field(&self, x: &Vector) -> Vector {
        self.sys.dynamics(x, &self.controller.control(x))
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let u = self.controller.control(x);
        let gk_jac = self.sys.input_map(x).matmul(&self.controller.jacobian(x));
        let dir = self.sys.input_map_directional_jacobian(x, &u);
        &(&self.sys.drift_jacobian(x) + &dir) + &gk_jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::rk4_integrate;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vector {
        Vector::from_fn(n, |_| rng.gen_range(-scale..scale))
    }

    #[test]
    fn double_integrator_fields() {
        let sys = make_double_integrator();
        let f = sys.drift(&Vector::new(vec![1.0, 2.0]));
        assert_eq!(f.as_slice(), &[2.0, 0.0]);
        let z = sys.measure(&Vector::new(vec![1.5, -3.0]));
        assert_eq!(z.as_slice(), &[1.5]);
        assert_relative_eq!(sys.measure_lipschitz, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn spacecraft_equilibrium_and_cross_oracle() {
        let j = Matrix::diag(&[0.5186, 0.8006, 0.8006]);
        let sys = make_spacecraft(&j).unwrap();
        let f0 = sys.drift(&Vector::zeros(3));
        assert!(f0.norm() < 1e-15);

        // Componentwise cross-product oracle at a generic point.
        let w = Vector::new(vec![0.1, 0.1, 0.0]);
        let jw = j.matvec(&w);
        let expected = j.inverse().unwrap().matvec(&Vector::new(vec![
            -(w[1] * jw[2] - w[2] * jw[1]),
            -(w[2] * jw[0] - w[0] * jw[2]),
            -(w[0] * jw[1] - w[1] * jw[0]),
        ]));
        let got = sys.drift(&w);
        assert!((&got - &expected).norm() < 1e-14);
    }

    #[test]
    fn spacecraft_rejects_non_spd_inertia() {
        let j = Matrix::diag(&[1.0, -0.5, 1.0]);
        assert!(make_spacecraft(&j).is_err());
        let asym = Matrix::from_rows(&[&[1.0, 0.2, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(make_spacecraft(&asym).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let j = Matrix::diag(&[0.5186, 0.8006, 0.8006]);
        let systems: Vec<(SystemModel, f64)> = vec![
            (make_double_integrator(), 2.0),
            (make_spacecraft(&j).unwrap(), 0.2),
        ];
        for (sys, scale) in &systems {
            for _ in 0..20 {
                let x = random_vector(&mut rng, sys.n, *scale);
                let analytic = sys.drift_jacobian(&x);
                let fd = finite_difference_jacobian(|y| sys.drift(y), &x, 1e-5);
                assert!(
                    (&analytic - &fd).max_abs() < 1e-5,
                    "drift jacobian mismatch at {x}"
                );
            }
        }
    }

    #[test]
    fn linear_reproduces_double_integrator() {
        let sys_a = make_double_integrator();
        let sys_b = make_linear(&double_integrator_spec());
        let x = Vector::new(vec![0.7, -0.4]);
        assert!((&sys_a.drift(&x) - &sys_b.drift(&x)).norm() < 1e-15);
        assert!((&sys_a.measure(&x) - &sys_b.measure(&x)).norm() < 1e-15);
    }

    #[test]
    fn unobservable_pair_rejected() {
        // C = [0 1] cannot observe x1 of an integrator chain driven the other way.
        let res = LinearSystemSpec::new(
            Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
            Matrix::from_rows(&[&[1.0], &[0.0]]),
            Matrix::from_rows(&[&[0.0, 1.0]]),
        );
        assert!(res.is_ok());
        let res = LinearSystemSpec::new(
            Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]),
            Matrix::from_rows(&[&[1.0], &[0.0]]),
            Matrix::from_rows(&[&[1.0, 0.0]]),
        );
        assert!(matches!(res, Err(Error::NotObservable { .. })));
    }

    #[test]
    fn closed_loop_field_zero_controller_is_drift() {
        let sys = make_double_integrator();
        let cl = ClosedLoopField::new(sys.clone(), Controller::new(
            |_| Vector::zeros(1),
            |_| Matrix::zeros(1, 2),
        ));
        let x = Vector::new(vec![0.3, 0.9]);
        assert!((&cl.field(&x) - &sys.drift(&x)).norm() < 1e-15);
    }

    #[test]
    fn closed_loop_linear_feedback() {
        let spec = double_integrator_spec();
        let sys = make_linear(&spec);
        let k = Matrix::from_rows(&[&[1.535, 1.382]]);
        let k_ctl = k.clone();
        let k_jac = k.clone();
        let cl = ClosedLoopField::new(
            sys,
            Controller::new(
                move |x| k_ctl.matvec(x).scale(-1.0),
                move |_| k_jac.scale(-1.0),
            ),
        );
        let a_cl = &spec.a - &spec.b.matmul(&k);
        let x = Vector::new(vec![-0.8, 0.45]);
        assert!((&cl.field(&x) - &a_cl.matvec(&x)).norm() < 1e-14);
        assert!((&cl.jacobian(&x) - &a_cl).max_abs() < 1e-14);

        // FD cross-check of the composed Jacobian.
        let fd = finite_difference_jacobian(|y| cl.field(y), &x, 1e-5);
        assert!((&cl.jacobian(&x) - &fd).max_abs() < 1e-5);
    }

    #[test]
    fn spacecraft_backup_cancellation() {
        // k_b(ω) = -K_b Jω + ω × Jω makes the closed loop exactly -K_b ω.
        let j = Matrix::diag(&[0.5186, 0.8006, 0.8006]);
        let sys = make_spacecraft(&j).unwrap();
        let kb = 0.2746;
        let j_ctl = j.clone();
        let cl = ClosedLoopField::new(
            sys,
            Controller::from_control_fn(move |w: &Vector| {
                let jw = j_ctl.matvec(w);
                &jw.scale(-kb) + &cross(w, &jw)
            }),
        );
        let w = Vector::new(vec![0.05, -0.03, 0.08]);
        assert!((&cl.field(&w) - &w.scale(-kb)).norm() < 1e-12);

        // The contraction means the backup flow norm decays exactly like e^{-kb τ}.
        let traj = rk4_integrate(|_, x| cl.field(x), &w, (0.0, 2.0), 200).unwrap();
        let expected = w.norm() * (-kb * 2.0f64).exp();
        assert_relative_eq!(traj.last().unwrap().norm(), expected, epsilon = 1e-9);
    }

    #[test]
    fn spacecraft_drift_conserves_rotational_energy() {
        let j = Matrix::diag(&[0.5186, 0.8006, 0.8006]);
        let sys = make_spacecraft(&j).unwrap();
        let w0 = Vector::new(vec![0.09, -0.04, 0.06]);
        let energy = |w: &Vector| 0.5 * w.dot(&j.matvec(w));
        let traj = rk4_integrate(|_, w| sys.drift(w), &w0, (0.0, 5.0), 500).unwrap();
        let e0 = energy(&w0);
        for pair in traj.windows(2) {
            assert!((energy(&pair[1]) - energy(&pair[0])).abs() < 1e-8);
        }
        assert!((energy(traj.last().unwrap()) - e0).abs() < 1e-8);
    }
}
