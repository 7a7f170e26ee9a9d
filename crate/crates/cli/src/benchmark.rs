//! The benchmark linear systems: the `u` and `v` systems at the second time
//! level, built after a startup step.

use std::time::Duration;

use fracnls::blocksys::assemble_rhs;
use fracnls::licd::{GridSpec, InitialData, Licd};
use fracnls::{DiagonalNonneg, LinearSolver, OmegaChoice, SolverKind, ToeplitzSym};
use num_complex::Complex;
use rayon::prelude::*;

use crate::config::Model;
use crate::CliError;

/// Startup solver: CNAS-GMRES at a fixed shift.
const STARTUP_OMEGA: f64 = 1.0;
const STARTUP_TOL: f64 = 1e-13;
const STARTUP_MAX_IT: usize = 3000;

/// One system `(D - T + iI) x = b`.
#[derive(Clone, Debug)]
pub struct LevelSystem {
    pub label: &'static str,
    pub d: DiagonalNonneg<f64>,
    pub b: Vec<Complex<f64>>,
}

/// `T` with the systems to solve (`u` only for the single equation).
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub grid: GridSpec,
    pub t: ToeplitzSym<f64>,
    pub systems: Vec<LevelSystem>,
}

impl Benchmark {
    pub fn build(grid: &GridSpec, init: &InitialData, model: Model) -> Result<Self, CliError> {
        let licd = Licd::<f64>::new(grid.clone())?;
        let startup =
            LinearSolver::new(SolverKind::CnasGmres, OmegaChoice::Fixed(STARTUP_OMEGA), STARTUP_TOL, STARTUP_MAX_IT);
        let (s, _) = licd.startup_step(init, &startup)?;
        let t = licd.toeplitz().clone();
        let du = licd.diagonal(&s.u_curr, &s.v_curr)?;
        let bu = assemble_rhs(&s.u_prev, &t, &du)?;
        let mut systems = vec![LevelSystem { label: "u", d: du, b: bu }];
        if model == Model::Cnls {
            let dv = licd.diagonal(&s.v_curr, &s.u_curr)?;
            let bv = assemble_rhs(&s.v_prev, &t, &dv)?;
            systems.push(LevelSystem { label: "v", d: dv, b: bv });
        }
        Ok(Self { grid: grid.clone(), t, systems })
    }

    pub fn m(&self) -> usize {
        self.t.dim()
    }
}

/// Outcome of one solve.
#[derive(Clone, Debug)]
pub struct SolveRecord {
    pub label: &'static str,
    /// `None` for solvers without a shift.
    pub omega: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub relres: f64,
    pub wall: Duration,
    pub history: Vec<f64>,
    pub x: Vec<Complex<f64>>,
}

/// Solves one system; the shift is resolved by the solver.
pub fn solve_system(t: &ToeplitzSym<f64>, sys: &LevelSystem, solver: &LinearSolver) -> Result<SolveRecord, CliError> {
    let omega = match solver.kind {
        SolverKind::Gmres | SolverKind::Dense => None,
        _ => Some(solver.resolve_omega(t)?),
    };
    let (x, rep) = match omega {
        Some(w) => solver.solve_with_omega(t, &sys.d, &sys.b, w)?,
        None => solver.solve(t, &sys.d, &sys.b)?,
    };
    Ok(SolveRecord {
        label: sys.label,
        omega,
        iterations: rep.iterations,
        converged: rep.converged,
        relres: rep.final_relres,
        wall: rep.wall_time,
        history: rep.residual_history,
        x,
    })
}

/// Iteration counts per system at one shift.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub omega: f64,
    /// `(iterations, converged, wall)` per system, in system order.
    pub runs: Vec<(usize, bool, Duration)>,
}

impl SweepRow {
    pub fn total(&self) -> usize {
        self.runs.iter().map(|r| r.0).sum()
    }

    pub fn converged(&self) -> bool {
        self.runs.iter().all(|r| r.1)
    }
}

/// Solves every system at every shift; rows come back in shift order.
pub fn sweep(bench: &Benchmark, solver: &LinearSolver, omegas: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    omegas
        .par_iter()
        .map(|&omega| {
            let s = LinearSolver { omega: OmegaChoice::Fixed(omega), ..solver.clone() };
            let runs = bench
                .systems
                .iter()
                .map(|sys| {
                    let r = solve_system(&bench.t, sys, &s)?;
                    Ok((r.iterations, r.converged, r.wall))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(SweepRow { omega, runs })
        })
        .collect()
}

/// Shifts attaining the minimal converged iteration count of `key`.
pub fn argmin_set(rows: &[SweepRow], key: impl Fn(&SweepRow) -> Option<usize>) -> (Option<usize>, Vec<f64>) {
    let best = rows.iter().filter_map(&key).min();
    let set = rows.iter().filter(|r| best.is_some() && key(r) == best).map(|r| r.omega).collect();
    (best, set)
}

/// Iteration count of system `i` when it converged.
pub fn system_key(i: usize) -> impl Fn(&SweepRow) -> Option<usize> {
    move |r: &SweepRow| r.runs.get(i).filter(|x| x.1).map(|x| x.0)
}
