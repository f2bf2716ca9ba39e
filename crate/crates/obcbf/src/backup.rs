//! Backup sets and controllers, their certification inequalities, and
//! propagation of the open-loop estimated backup flow together with its
//! sensitivity matrix.

use std::sync::Arc;

use crate::dynamics::{cross, skew, Controller, SystemModel};
use crate::error::Error;
use crate::math::{
    inverse_sqrt_spd, rk4_step, spectral_norm, symmetric_eigen_extrema, Matrix, Vector,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A barrier function h with its 0-superlevel set. `QuadraticCentered`
/// barriers are h(x) = γ - xᵀPx with symmetric positive semidefinite P;
/// the exact tightening rule relies on that structure.
#[derive(Clone)]
pub enum BarrierKind {
    Linear,
    QuadraticCentered { p: Matrix, gamma: f64 },
    General,
}

#[derive(Clone)]
pub struct Barrier {
    pub kind: BarrierKind,
    value: Arc<dyn Fn(&Vector) -> f64 + Send + Sync>,
    gradient: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
    /// Lipschitz constant of h on the centered ball of a given radius.
    lipschitz_on: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Barrier {
    /// Affine barrier h(x) = normal·x + offset.
    pub fn linear(normal: Vector, offset: f64) -> Self {
        let norm = normal.norm();
        let n1 = normal.clone();
        let n2 = normal.clone();
        Self {
            kind: BarrierKind::Linear,
            value: Arc::new(move |x| n1.dot(x) + offset),
            gradient: Arc::new(move |_| n2.clone()),
            lipschitz_on: Arc::new(move |_| norm),
        }
    }

    /// Quadratic barrier h(x) = γ - xᵀPx for symmetric positive semidefinite
    /// P (nonzero). The safe-set barriers of both bundled scenarios take this
    /// form, one of them with a singular P.
    pub fn quadratic(p: Matrix, gamma: f64) -> Result<Self, Error> {
        let (lmin, lmax) = symmetric_eigen_extrema(&p)?;
        if lmin < -1e-12 * lmax.abs().max(1e-300) || lmax <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                what: "quadratic barrier matrix (positive semidefinite required)".into(),
                min_eigenvalue: lmin,
            });
        }
        let p_norm = spectral_norm(&p);
        let p1 = p.clone();
        let p2 = p.clone();
        Ok(Self {
            kind: BarrierKind::QuadraticCentered { p, gamma },
            value: Arc::new(move |x| gamma - x.dot(&p1.matvec(x))),
            gradient: Arc::new(move |x| p2.matvec(x).scale(-2.0)),
            lipschitz_on: Arc::new(move |r| 2.0 * p_norm * r),
        })
    }

    pub fn general(
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        lipschitz_on: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: BarrierKind::General,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            lipschitz_on: Arc::new(lipschitz_on),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }

    pub fn lipschitz_on(&self, radius: f64) -> f64 {
        (self.lipschitz_on)(radius)
    }
}

/// The backup controller k_b with the constants the flow bounds need:
/// its Lipschitz constant and its sup norm over the operating domain.
#[derive(Clone)]
pub struct BackupPolicy {
    controller: Controller,
    /// ℒ_kb over the configured domain ball.
    pub lipschitz: f64,
    /// ū ≥ ‖k_b(x̂)‖ over the configured domain ball.
    pub sup_norm: f64,
}

impl BackupPolicy {
    pub fn control(&self, xhat: &Vector) -> Vector {
        self.controller.control(xhat)
    }

    pub fn control_jacobian(&self, xhat: &Vector) -> Matrix {
        self.controller.jacobian(xhat)
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    /// Saturation-free linear policy k_b(x̂) = -K x̂.
    pub fn linear(k: &Matrix, domain_radius: f64) -> Self {
        let k1 = k.clone();
        let k2 = k.clone();
        let controller = Controller::new(
            move |x| k1.matvec(x).scale(-1.0),
            move |_| k2.scale(-1.0),
        );
        let lipschitz = spectral_norm(k);
        let sup_norm = lipschitz * domain_radius;
        Self { controller, lipschitz, sup_norm }
    }

    /// Smoothly saturated linear policy k_b(x̂) = u_max tanh(-K x̂ / u_max),
    /// componentwise.
    pub fn saturated_linear(k: &Matrix, u_max: f64, domain_radius: f64) -> Self {
        let n = k.cols();
        let m = k.rows();
        let k1 = k.clone();
        let k2 = k.clone();
        let controller = Controller::new(
            move |x| {
                let s = k1.matvec(x).scale(-1.0 / u_max);
                Vector::from_fn(m, |i| u_max * s[i].tanh())
            },
            move |x| {
                let s = k2.matvec(x).scale(-1.0 / u_max);
                Matrix::from_fn(m, n, |i, j| -(1.0 - s[i].tanh().powi(2)) * k2[(i, j)])
            },
        );
        let (lipschitz, sup_norm) = estimate_policy_constants(&controller, n, domain_radius);
        Self { controller, lipschitz, sup_norm }
    }

    /// Feedback-linearizing spacecraft policy
    /// k_b(ω̂) = -K_b J ω̂ + ω̂ × J ω̂.
    pub fn spacecraft(j: &Matrix, kb: f64, domain_radius: f64) -> Self {
        let j1 = j.clone();
        let j2 = j.clone();
        let controller = Controller::new(
            move |w| {
                let jw = j1.matvec(w);
                &jw.scale(-kb) + &cross(w, &jw)
            },
            move |w| {
                let jw = j2.matvec(w);
                // d/dω (ω × Jω) = -[Jω]× + [ω]× J
                let cross_jac = &skew(&jw).scale(-1.0) + &skew(w).matmul(&j2);
                &j2.scale(-kb) + &cross_jac
            },
        );
        let (lipschitz, sup_norm) = estimate_policy_constants(&controller, 3, domain_radius);
        Self { controller, lipschitz, sup_norm }
    }
}

/// Estimate (ℒ_kb, ū) by dense sampling over the centered ball, doubling the
/// sample count until both estimates move by less than 1%.
fn estimate_policy_constants(controller: &Controller, n: usize, radius: f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6261_636b); // fixed: estimates must be reproducible
    let mut points = 256usize;
    let mut prev: Option<(f64, f64)> = None;
    loop {
        let mut lip: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for _ in 0..points {
            let x = sample_ball(&mut rng, n, radius);
            lip = lip.max(spectral_norm(&controller.jacobian(&x)));
            sup = sup.max(controller.control(&x).norm());
        }
        if let Some((pl, ps)) = prev {
            let lip_new = lip.max(pl);
            let sup_new = sup.max(ps);
            let moved = ((lip_new - pl) / pl.max(1e-12)).max((sup_new - ps) / ps.max(1e-12));
            if moved < 0.01 || points > 1 << 16 {
                return (lip_new, sup_new);
            }
            prev = Some((lip_new, sup_new));
        } else {
            prev = Some((lip, sup));
        }
        points *= 2;
    }
}

/// Uniform-ish deterministic sample in the centered ball: Gaussian direction
/// with radius biased toward the boundary, where the suprema live.
fn sample_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vector {
    let dir = Vector::from_fn(n, |_| {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    });
    let norm = dir.norm().max(1e-12);
    let r: f64 = radius * rng.gen_range(0.0f64..1.0).powf(0.25);
    dir.scale(r / norm)
}

/// Sampled open-loop estimated backup flow and its sensitivity matrices on
/// the grid τ ∈ {0, Δ, ..., T}.
#[derive(Debug, Clone)]
pub struct FlowGrid {
    pub taus: Vec<f64>,
    pub states: Vec<Vector>,
    pub sensitivities: Vec<Matrix>,
}

impl FlowGrid {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.taus.last().unwrap()
    }
}

/// Jointly integrate the estimated backup flow φ̂(τ) and its sensitivity
/// Φ̂(τ) = ∂φ̂/∂x̂ as one augmented ODE:
///
///   φ̂' = f_cl(φ̂),  Φ̂' = F_cl(φ̂) Φ̂,  φ̂(0) = x̂,  Φ̂(0) = I.
///
/// `substeps` RK4 steps are taken per grid interval Δ.
pub fn propagate_flow(
    sys: &SystemModel,
    policy: &BackupPolicy,
    xhat: &Vector,
    horizon: f64,
    delta: f64,
    substeps: usize,
) -> Result<FlowGrid, Error> {
    debug_assert!(substeps >= 1);
    let n = sys.n;
    if horizon == 0.0 {
        return Ok(FlowGrid {
            taus: vec![0.0],
            states: vec![xhat.clone()],
            sensitivities: vec![Matrix::identity(n)],
        });
    }
    if horizon < 0.0 || delta <= 0.0 {
        return Err(Error::Config("flow horizon and grid step must be positive".into()));
    }
    let steps_f = horizon / delta;
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-9 || steps == 0 {
        return Err(Error::Config(format!(
            "horizon {horizon} must be an integer multiple of the grid step {delta}"
        )));
    }

    let field = |tau: f64, s: &Vector| -> Vector {
        let phi = Vector::from_fn(n, |i| s[i]);
        let u = policy.control(&phi);
        let dphi = sys.dynamics(&phi, &u);
        let f_cl = {
            let gk = sys.input_map(&phi).matmul(&policy.control_jacobian(&phi));
            let dir = sys.input_map_directional_jacobian(&phi, &u);
            &(&sys.drift_jacobian(&phi) + &dir) + &gk
        };
        let _ = tau;
        let mut out = Vec::with_capacity(n + n * n);
        out.extend_from_slice(dphi.as_slice());
        // Φ' = F_cl Φ, with Φ stored row-major after the state.
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += f_cl[(i, k)] * s[n + k * n + j];
                }
                out.push(v);
            }
        }
        Vector::new(out)
    };

    let mut aug = Vec::with_capacity(n + n * n);
    aug.extend_from_slice(xhat.as_slice());
    let identity = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            aug.push(identity[(i, j)]);
        }
    }
    let mut aug = Vector::new(aug);

    let mut taus = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut sensitivities = Vec::with_capacity(steps + 1);
    let push = |taus: &mut Vec<f64>,
                states: &mut Vec<Vector>,
                sens: &mut Vec<Matrix>,
                tau: f64,
                s: &Vector| {
        taus.push(tau);
        states.push(Vector::from_fn(n, |i| s[i]));
        sens.push(Matrix::from_fn(n, n, |i, j| s[n + i * n + j]));
    };
    push(&mut taus, &mut states, &mut sensitivities, 0.0, &aug);

    let h = delta / substeps as f64;
    for k in 0..steps {
        for sub in 0..substeps {
            let tau = k as f64 * delta + sub as f64 * h;
            aug = rk4_step(&field, tau, &aug, h)?;
        }
        push(&mut taus, &mut states, &mut sensitivities, (k + 1) as f64 * delta, &aug);
    }

    Ok(FlowGrid { taus, states, sensitivities })
}

/// Certificate for the linear-quadratic backup design: forms
/// Q = -((A-BK)ᵀP + P(A-BK)) and evaluates both gain conditions, the exact
/// one (λ_min(Q) ≥ 2 ē_b sqrt(λ_min(P)/γ) ‖PBK‖) and the conservative
/// variant using ‖P‖‖B‖‖K‖.
#[derive(Debug, Clone)]
pub struct BackupGainCertificate {
    pub certified: bool,
    pub q: Matrix,
    pub lambda_min_q: f64,
    pub rhs: f64,
    pub rhs_conservative: f64,
}

pub fn certify_linear_backup_gain(
    p: &Matrix,
    gamma: f64,
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    eb: f64,
) -> Result<BackupGainCertificate, Error> {
    if gamma <= 0.0 {
        return Err(Error::Config("backup level gamma must be positive".into()));
    }
    let (p_min, _) = symmetric_eigen_extrema(p)?;
    if p_min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "backup set matrix P".into(),
            min_eigenvalue: p_min,
        });
    }
    let a_cl = a - &b.matmul(k);
    let at_p = a_cl.transpose().matmul(p);
    let q = (&(&at_p + &at_p.transpose())).scale(-1.0);
    let (q_min, _) = symmetric_eigen_extrema(&q)?;
    let pbk = p.matmul(b).matmul(k);
    let scale = 2.0 * eb * (p_min / gamma).sqrt();
    let rhs = scale * spectral_norm(&pbk);
    let rhs_conservative = scale * spectral_norm(p) * spectral_norm(b) * spectral_norm(k);
    let certified = q_min > 0.0 && q_min >= rhs;
    Ok(BackupGainCertificate {
        certified,
        q,
        lambda_min_q: q_min,
        rhs,
        rhs_conservative,
    })
}

/// Saturation check for the saturated-linear backup controller:
/// sqrt(γ)‖K P^{-1/2}‖ + ‖K‖ ē_b ≤ u_max means k_b never saturates on the
/// backup set. Returns (satisfied, lhs).
pub fn certify_no_saturation_linear(
    k: &Matrix,
    p: &Matrix,
    gamma: f64,
    eb: f64,
    u_max: f64,
) -> Result<(bool, f64), Error> {
    let p_inv_sqrt = inverse_sqrt_spd(p)?;
    let lhs = gamma.sqrt() * spectral_norm(&k.matmul(&p_inv_sqrt)) + spectral_norm(k) * eb;
    Ok((lhs <= u_max, lhs))
}

/// Minimum certifiable spacecraft backup gain:
///
///   K_b ≥ 2 λ_max(J)‖J‖‖J⁻¹‖ ē_b ω_max
///         / (sqrt(2 γ λ_min(J)) - λ_max(J)‖J‖‖J⁻¹‖ ē_b).
///
/// Errors when the denominator is nonpositive: the backup set is too small
/// for this error bound.
pub fn spacecraft_gain_floor(j: &Matrix, gamma: f64, eb: f64, omega_max: f64) -> Result<f64, Error> {
    let (j_min, j_max) = symmetric_eigen_extrema(j)?;
    if j_min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "inertia tensor".into(),
            min_eigenvalue: j_min,
        });
    }
    let j_norm = spectral_norm(j);
    let j_inv_norm = spectral_norm(&j.inverse()?);
    let coupling = j_max * j_norm * j_inv_norm * eb;
    let denominator = (2.0 * gamma * j_min).sqrt() - coupling;
    if denominator <= 0.0 {
        return Err(Error::CertificationFailed {
            name: "spacecraft backup gain floor (backup set too small for this error bound)".into(),
            lhs: (2.0 * gamma * j_min).sqrt(),
            rhs: coupling,
        });
    }
    Ok(2.0 * coupling * omega_max / denominator)
}

/// Largest gain that keeps the spacecraft backup controller inside the input
/// box on the safe set: K_b ≤ u_max / (‖J‖ ω_max) - ω_max.
pub fn spacecraft_gain_ceiling(j: &Matrix, omega_max: f64, u_max: f64) -> f64 {
    u_max / (spectral_norm(j) * omega_max) - omega_max
}
