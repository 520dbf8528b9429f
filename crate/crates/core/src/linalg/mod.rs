//! Dense matrix kernels sized for small control models (state dimensions up
//! to a dozen): arithmetic, linear solves, the matrix exponential, zero-order
//! hold discretisation, a CARE solver built on the matrix sign function,
//! extremal singular/eigen values and an RK4 integrator.

mod care;
mod eig;
mod exp;
mod matrix;
mod ode;

pub use care::{matrix_sign, solve_care};
pub use eig::{max_singular_value, sym_eig_extremes, EigExtremes};
pub use exp::{expm, zoh_discretize};
pub use matrix::Matrix;
pub use ode::rk4_step;

use thiserror::Error;

/// Relative accuracy target for [`expm`].
pub const EXPM_REL_TOL: f64 = 1e-9;
/// Residual norm accepted from [`solve_care`].
pub const CARE_RESIDUAL_TOL: f64 = 1e-8;
/// Relative convergence tolerance for the power iteration.
pub const POWER_ITER_TOL: f64 = 1e-10;
/// Iteration cap for the power iteration.
pub const POWER_ITER_CAP: usize = 100_000;
/// Off-diagonal norm at which the Jacobi eigenvalue sweep stops.
pub const JACOBI_OFF_TOL: f64 = 1e-11;
/// Symmetry mismatch tolerated by [`sym_eig_extremes`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("matrix sign iteration did not converge after {0} steps")]
    SignDiverged(usize),
    #[error("Riccati residual {0:.3e} exceeds tolerance; (A,B) may not be stabilizable")]
    RiccatiResidual(f64),
    #[error("Riccati solution is not positive definite (min eigenvalue {0:.3e})")]
    RiccatiNotPositive(f64),
    #[error("closed-loop matrix is not Hurwitz")]
    NotHurwitz,
    #[error("weight k must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("power iteration stalled after {cap} steps (last estimate {estimate:.6e})")]
    PowerIterationStall { cap: usize, estimate: f64 },
    #[error("Jacobi sweep did not reach off-diagonal tolerance after {0} sweeps")]
    JacobiStall(usize),
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("non-finite value produced during {0}")]
    NonFinite(&'static str),
}
