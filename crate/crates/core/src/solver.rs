//! A configurable solver for the per-level complex system `(D - T + iI) u = b`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex;

use crate::blocksys::{block_to_complex, BlockSystem, DiagonalNonneg};
use crate::error::{invalid, Result};
use crate::krylov::{gmres, operator, GmresOptions, LinearOperator, Preconditioner, SolveReport};
use crate::nass_iter::{lambda_max, nass_solve, optimal_omega, ExtentMethod, InnerSolveConfig, NassParams};
use crate::precond::{build_cnas, build_nass, InnerCg};
use crate::scalar::{norm2, Real};
use crate::structured::{CirculantKind, ToeplitzSym};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Unpreconditioned GMRES.
    Gmres,
    CnasGmres,
    NassGmres,
    /// The stationary NASS iteration.
    NassIteration,
    /// Complex Gaussian elimination (`f64`, `O(M^3)`).
    Dense,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gmres => "gmres",
            SolverKind::CnasGmres => "cnas-gmres",
            SolverKind::NassGmres => "nass-gmres",
            SolverKind::NassIteration => "nass-iter",
            SolverKind::Dense => "dense",
        }
    }

    fn uses_omega(self) -> bool {
        matches!(self, SolverKind::CnasGmres | SolverKind::NassGmres | SolverKind::NassIteration)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        [SolverKind::Gmres, SolverKind::CnasGmres, SolverKind::NassGmres, SolverKind::NassIteration, SolverKind::Dense]
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid("solver", format!("unknown solver `{s}`")))
    }
}

/// Shift parameter selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OmegaChoice {
    Fixed(f64),
    /// `ω* = sqrt(λ_max² + 1)` with `λ_max` from the given estimate.
    Auto(ExtentMethod),
}

#[derive(Clone, Debug)]
pub struct LinearSolver {
    pub kind: SolverKind,
    pub circulant: CirculantKind,
    pub omega: OmegaChoice,
    pub tol: f64,
    pub max_it: usize,
}

impl LinearSolver {
    pub fn new(kind: SolverKind, omega: OmegaChoice, tol: f64, max_it: usize) -> Self {
        Self { kind, circulant: CirculantKind::Strang, omega, tol, max_it }
    }

    pub fn with_tol(&self, tol: f64) -> Self {
        Self { tol, ..self.clone() }
    }

    pub fn with_circulant(&self, circulant: CirculantKind) -> Self {
        Self { circulant, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol", format!("{} is outside (0, 1)", self.tol)));
        }
        if let OmegaChoice::Fixed(w) = self.omega {
            if !(w > 0.0) || !w.is_finite() {
                return Err(invalid("omega", format!("{w} must be positive")));
            }
        }
        Ok(())
    }

    /// The shift that will be used for `t`.
    pub fn resolve_omega<T: Real>(&self, t: &ToeplitzSym<T>) -> Result<T> {
        match self.omega {
            OmegaChoice::Fixed(w) => Ok(T::lit(w)),
            OmegaChoice::Auto(method) => optimal_omega(lambda_max(t, method)?),
        }
    }

    /// Solves `(D - T + iI) u = b`. Non-convergence is reported, not raised.
    pub fn solve<T: Real>(
        &self,
        t: &ToeplitzSym<T>,
        d: &DiagonalNonneg<T>,
        b: &[Complex<T>],
    ) -> Result<(Vec<Complex<T>>, SolveReport<T>)> {
        self.validate()?;
        let omega = if self.kind.uses_omega() { self.resolve_omega(t)? } else { T::one() };
        self.solve_with_omega(t, d, b, omega)
    }

    /// As [`LinearSolver::solve`] with an already resolved shift.
    pub fn solve_with_omega<T: Real>(
        &self,
        t: &ToeplitzSym<T>,
        d: &DiagonalNonneg<T>,
        b: &[Complex<T>],
        omega: T,
    ) -> Result<(Vec<Complex<T>>, SolveReport<T>)> {
        let start = Instant::now();
        let tol = T::lit(self.tol);
        if self.kind == SolverKind::Dense {
            let u = crate::dense::solve_complex_system(t, d, b)?;
            let r = crate::blocksys::apply_complex(t, d, &u)?;
            let res: Vec<T> = r.iter().zip(b).flat_map(|(p, q)| [q.re - p.re, q.im - p.im]).collect();
            let bn: Vec<T> = b.iter().flat_map(|z| [z.re, z.im]).collect();
            let bnorm = norm2(&bn);
            let relres = if bnorm > T::zero() { norm2(&res) / bnorm } else { norm2(&res) };
            let report = SolveReport {
                iterations: 0,
                converged: true,
                final_relres: relres,
                residual_history: vec![relres],
                wall_time: start.elapsed(),
                orthogonality_loss: None,
            };
            return Ok((u, report));
        }

        let sys = BlockSystem::from_complex(t.clone(), d.clone(), b)?;
        let a = operator(sys.dim(), |x: &[T], y: &mut [T]| sys.apply_r_into(x, y));
        let opts = GmresOptions::new(tol, self.max_it);
        let (x, mut report) = match self.kind {
            SolverKind::Gmres => gmres(&a as &dyn LinearOperator<T>, None, sys.rhs(), &opts)?,
            SolverKind::CnasGmres => {
                let p = build_cnas(t, d, omega, self.circulant)?;
                gmres(&a, Some(&p as &dyn Preconditioner<T>), sys.rhs(), &opts)?
            }
            SolverKind::NassGmres => {
                let cg = InnerCg { circulant: self.circulant, ..InnerCg::default() };
                let p = build_nass(t, d, omega, cg)?;
                gmres(&a, Some(&p as &dyn Preconditioner<T>), sys.rhs(), &opts)?
            }
            SolverKind::NassIteration => {
                let inner = InnerSolveConfig { circulant: self.circulant, ..InnerSolveConfig::default() };
                let params = NassParams { omega, tol, max_iters: self.max_it };
                let (x, rep) = nass_solve(&sys, &inner, &params, &vec![T::zero(); sys.dim()])?;
                let relres = *rep.residual_history.last().expect("nonempty history");
                let report = SolveReport {
                    iterations: rep.iterations,
                    converged: rep.converged,
                    final_relres: relres,
                    residual_history: rep.residual_history,
                    wall_time: start.elapsed(),
                    orthogonality_loss: None,
                };
                (x, report)
            }
            SolverKind::Dense => unreachable!("handled above"),
        };
        report.wall_time = start.elapsed();
        Ok((block_to_complex(&x), report))
    }
}
