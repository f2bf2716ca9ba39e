//! Fixed-step classical Runge–Kutta integration.
//!
//! Backup horizons in this crate are short (a few seconds) and determinism
//! matters for regression tests, so there is no step-size adaptation.

use crate::error::Error;
use crate::math::linalg::Vector;

/// Integrate dx/dτ = field(τ, x) from `tau_start` to `tau_end` with `steps`
/// RK4 steps, returning the trajectory sampled at every substep boundary
/// (`steps + 1` points, the first being `x0`).
pub fn rk4_integrate(
    field: impl Fn(f64, &Vector) -> Vector,
    x0: &Vector,
    span: (f64, f64),
    steps: usize,
) -> Result<Vec<Vector>, Error> {
    debug_assert!(steps >= 1);
    let (tau_start, tau_end) = span;
    let h = (tau_end - tau_start) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..steps {
        let tau = tau_start + k as f64 * h;
        x = rk4_step(&field, tau, &x, h)?;
        out.push(x.clone());
    }
    Ok(out)
}

/// One classical RK4 step of size `h` starting at (tau, x).
pub fn rk4_step(
    field: &impl Fn(f64, &Vector) -> Vector,
    tau: f64,
    x: &Vector,
    h: f64,
) -> Result<Vector, Error> {
    let eval = |t: f64, y: &Vector| -> Result<Vector, Error> {
        let v = field(t, y);
        if !v.is_finite() {
            return Err(Error::NonFiniteField { tau: t });
        }
        Ok(v)
    };
    let k1 = eval(tau, x)?;
    let mut x2 = x.clone();
    x2.axpy(0.5 * h, &k1);
    let k2 = eval(tau + 0.5 * h, &x2)?;
    let mut x3 = x.clone();
    x3.axpy(0.5 * h, &k2);
    let k3 = eval(tau + 0.5 * h, &x3)?;
    let mut x4 = x.clone();
    x4.axpy(h, &k3);
    let k4 = eval(tau + h, &x4)?;
    let mut next = x.clone();
    next.axpy(h / 6.0, &k1);
    next.axpy(h / 3.0, &k2);
    next.axpy(h / 3.0, &k3);
    next.axpy(h / 6.0, &k4);
    if !next.is_finite() {
        return Err(Error::NonFiniteField { tau: tau + h });
    }
    Ok(next)
}
