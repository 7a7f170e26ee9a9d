//! Fast solvers for the Toeplitz-plus-diagonal complex systems produced by
//! linearly implicit conservative schemes for space-fractional nonlinear
//! Schrödinger equations.
//!
//! Each time level requires `(D - T + iI) u = b` with `T` a symmetric
//! Toeplitz matrix from the fractional centered difference and `D` a
//! nonnegative diagonal. The crate provides the real block form of that
//! system, the NASS stationary iteration, the NASS and circulant (CNAS)
//! preconditioners, full GMRES, and the time stepper with mass and energy
//! diagnostics.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

pub mod blocksys;
pub mod dense;
mod error;
pub mod fracdiff;
pub mod krylov;
pub mod licd;
pub mod nass_iter;
pub mod precond;
mod scalar;
pub mod solver;
pub mod structured;

pub use error::{Error, Result};
pub use scalar::{axpy, dot, max_abs, norm2, Real};

pub use blocksys::{BlockSystem, DiagonalNonneg};
pub use krylov::{gmres, GmresOptions, SolveReport};
pub use licd::{evolve, EvolveConfig, GridSpec, InitialData, Licd, WaveState};
pub use nass_iter::{nass_solve, optimal_omega, sigma_bound, ExtentMethod, InnerSolveConfig, NassParams};
pub use precond::{build_cnas, build_nass, CnasPrecond, NassPrecond};
pub use solver::{LinearSolver, OmegaChoice, SolverKind};
pub use structured::{CirculantKind, CirculantSym, ToeplitzSym};

/// Double precision aliases.
pub type Toeplitz = ToeplitzSym<f64>;
pub type Circulant = CirculantSym<f64>;
pub type Diagonal = DiagonalNonneg<f64>;
pub type System = BlockSystem<f64>;
pub type Cnas = CnasPrecond<f64>;
pub type Nass = NassPrecond<f64>;
pub type Report = SolveReport<f64>;
pub type State = WaveState<f64>;
