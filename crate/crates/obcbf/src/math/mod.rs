//! Dense small-dimension numerical kernels: vectors/matrices, fixed-step RK4,
//! the matrix exponential, symmetric eigensolves, spectral norms, and
//! finite-difference Jacobians.
//!
//! All matrix and vector norms used by the bound formulas elsewhere in the
//! crate are the Euclidean/spectral norm.

pub mod diff;
pub mod eigen;
pub mod expm;
pub mod linalg;
pub mod ode;

pub use diff::finite_difference_jacobian;
pub use eigen::{
    inverse_sqrt_spd, is_spd, spectral_norm, symmetric_eigen, symmetric_eigen_extrema,
    SymmetricEigen,
};
pub use expm::matrix_exponential;
pub use linalg::{solve_lyapunov, Matrix, Vector};
pub use ode::{rk4_integrate, rk4_step};
