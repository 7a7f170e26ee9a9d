//! Linearly implicit conservative time stepping for the coupled fractional
//! Schrödinger system
//!
//! ```text
//! i u_t - γ (-Δ)^{α/2} u + ρ (|u|² + β|v|²) u = 0
//! i v_t - γ (-Δ)^{α/2} v + ρ (|v|² + β|u|²) v = 0
//! ```
//!
//! on `[a, b]` with homogeneous Dirichlet data. Each level needs two
//! independent solves of `(D - T + iI) w^{n+1} = (T - D + iI) w^{n-1}`.

use std::time::{Duration, Instant};

use num_complex::Complex;

use crate::blocksys::{assemble_rhs, DiagonalNonneg};
use crate::error::{invalid, Error, Result};
use crate::fracdiff::coefficients;
use crate::krylov::SolveReport;
use crate::scalar::Real;
use crate::solver::{LinearSolver, OmegaChoice};
use crate::structured::ToeplitzSym;

/// Domain, mesh and model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    /// Interior nodes.
    pub m: usize,
    /// Time steps.
    pub n_steps: usize,
    pub t_final: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > self.a) {
            return Err(invalid("b", format!("domain [{}, {}] is empty", self.a, self.b)));
        }
        if self.m < 2 || self.m % 2 == 1 {
            return Err(invalid("M", format!("{} must be even and at least 2", self.m)));
        }
        if self.n_steps < 1 {
            return Err(invalid("N", "at least one time step is required"));
        }
        if !(self.t_final > 0.0) {
            return Err(invalid("t_final", format!("{} must be positive", self.t_final)));
        }
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(invalid("alpha", format!("{} is outside (1, 2]", self.alpha)));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", format!("{} must be positive", self.gamma)));
        }
        if !(self.rho >= 0.0) {
            return Err(invalid("rho", format!("{} must be nonnegative", self.rho)));
        }
        if !(self.beta >= 0.0) {
            return Err(invalid("beta", format!("{} must be nonnegative", self.beta)));
        }
        Ok(())
    }

    /// Smallest even `M` whose spacing does not exceed `h`.
    pub fn interior_nodes_for_spacing(a: f64, b: f64, h: f64) -> usize {
        let m = ((b - a) / h).round() as usize - 1;
        m + m % 2
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.m as f64 + 1.0)
    }

    /// `μ = γτ / h^α`.
    pub fn mu(&self) -> f64 {
        self.gamma * self.tau() / self.h().powf(self.alpha)
    }

    /// Interior nodes `x_j = a + j h`, `j = 1..=M`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.m).map(|j| self.a + j as f64 * h).collect()
    }

    /// `T = μ toeplitz(c_0, ..., c_{M-1})`.
    pub fn toeplitz<T: Real>(&self) -> Result<ToeplitzSym<T>> {
        self.validate()?;
        let c = coefficients(T::lit(self.alpha), self.m)?;
        ToeplitzSym::from_coeffs(&c, self.m, T::lit(self.mu()))
    }

    /// The unscaled stencil `toeplitz(c_0, ..., c_{M-1})`.
    pub fn stencil<T: Real>(&self) -> Result<ToeplitzSym<T>> {
        self.validate()?;
        let c = coefficients(T::lit(self.alpha), self.m)?;
        ToeplitzSym::from_coeffs(&c, self.m, T::one())
    }
}

/// Initial values sampled on the interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub u0: Vec<Complex<f64>>,
    pub v0: Vec<Complex<f64>>,
}

impl InitialData {
    pub fn from_fns(grid: &GridSpec, u0: impl Fn(f64) -> Complex<f64>, v0: impl Fn(f64) -> Complex<f64>) -> Self {
        let x = grid.nodes();
        Self { u0: x.iter().map(|&x| u0(x)).collect(), v0: x.iter().map(|&x| v0(x)).collect() }
    }

    pub fn zero(m: usize) -> Self {
        Self { u0: vec![Complex::default(); m], v0: vec![Complex::default(); m] }
    }

    /// `u0 = sech(x) e^{2ix}`, `v0 = 0`.
    pub fn dnls(grid: &GridSpec) -> Self {
        Self::from_fns(grid, |x| Complex::from_polar(1.0 / x.cosh(), 2.0 * x), |_| Complex::default())
    }

    /// `u0 = sech(x+5) e^{3ix}`, `v0 = sech(x-5) e^{-3ix}`.
    pub fn cnls(grid: &GridSpec) -> Self {
        Self::from_fns(
            grid,
            |x| Complex::from_polar(1.0 / (x + 5.0).cosh(), 3.0 * x),
            |x| Complex::from_polar(1.0 / (x - 5.0).cosh(), -3.0 * x),
        )
    }
}

/// Two consecutive time levels of both components.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState<T> {
    pub u_prev: Vec<Complex<T>>,
    pub u_curr: Vec<Complex<T>>,
    pub v_prev: Vec<Complex<T>>,
    pub v_curr: Vec<Complex<T>>,
    /// Index of the `curr` level.
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct StartupReport<T> {
    pub sweeps: usize,
    pub last_change: T,
    pub iterations: usize,
}

fn to_t<T: Real>(z: &[Complex<f64>]) -> Vec<Complex<T>> {
    z.iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect()
}

fn nonlinear_diag<T: Real>(scale: T, beta: T, own: &[Complex<T>], other: &[Complex<T>]) -> Result<DiagonalNonneg<T>> {
    DiagonalNonneg::new(own.iter().zip(other).map(|(a, b)| scale * (a.norm_sqr() + beta * b.norm_sqr())).collect())
}

fn max_diff<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (x, y)| m.max((*x - *y).norm()))
}

fn max_norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.norm()))
}

/// A solve is accepted when it converged or when its true relative residual
/// is still within `floor` (a stalled Krylov solve close to round-off).
fn check_report<T: Real>(level: usize, rep: &SolveReport<T>, floor: f64) -> Result<()> {
    if rep.converged || rep.final_relres.as_f64() <= floor {
        Ok(())
    } else {
        Err(Error::TimeLevel { level, iterations: rep.iterations, relres: rep.final_relres.as_f64() })
    }
}

/// Time stepper for one grid; holds `T` and the unscaled stencil.
#[derive(Clone, Debug)]
pub struct Licd<T: Real> {
    grid: GridSpec,
    t: ToeplitzSym<T>,
    stencil: ToeplitzSym<T>,
    residual_floor: f64,
}

/// Fixed-point settings for the startup step.
pub const STARTUP_TOL: f64 = 1e-12;
pub const STARTUP_MAX_SWEEPS: usize = 50;
/// Upper bound on the linear tolerance inside the startup sweeps.
pub const STARTUP_LINEAR_TOL: f64 = 1e-13;

impl<T: Real> Licd<T> {
    pub fn new(grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        let t = grid.toeplitz()?;
        let stencil = grid.stencil()?;
        Ok(Self { grid, t, stencil, residual_floor: 0.0 })
    }

    /// Accept non-converged level solves whose true relative residual is at
    /// most `floor`.
    pub fn with_residual_floor(mut self, floor: f64) -> Self {
        self.residual_floor = floor;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn toeplitz(&self) -> &ToeplitzSym<T> {
        &self.t
    }

    /// `D` for the `u` system built from level-`n` values: `ρτ(|u|² + β|v|²)`.
    pub fn diagonal(&self, own: &[Complex<T>], other: &[Complex<T>]) -> Result<DiagonalNonneg<T>> {
        nonlinear_diag(T::lit(self.grid.rho * self.grid.tau()), T::lit(self.grid.beta), own, other)
    }

    /// Crank-Nicolson step for level 1, with the nonlinear coefficient frozen
    /// at `ū = (u¹ + u⁰)/2` during each sweep:
    /// `(D'/2 - T/2 + iI) u¹ = (T/2 - D'/2 + iI) u⁰`.
    pub fn startup_step(&self, init: &InitialData, solver: &LinearSolver) -> Result<(WaveState<T>, StartupReport<T>)> {
        let m = self.grid.m;
        crate::error::check_len(m, init.u0.len())?;
        crate::error::check_len(m, init.v0.len())?;
        let u0: Vec<Complex<T>> = to_t(&init.u0);
        let v0: Vec<Complex<T>> = to_t(&init.v0);
        let half = T::lit(0.5);
        let t_half = self.t.scaled(half)?;
        let lin = solver.with_tol(solver.tol.min(STARTUP_LINEAR_TOL));
        let omega = self.fixed_omega(&lin, &t_half)?;
        let fp_tol = T::lit(STARTUP_TOL).max(T::lit(100.0) * T::epsilon());
        let scale = T::lit(0.5 * self.grid.rho * self.grid.tau());
        let beta = T::lit(self.grid.beta);

        let mut u1 = u0.clone();
        let mut v1 = v0.clone();
        let mut iterations = 0;
        let mut change = T::zero();
        for sweep in 1..=STARTUP_MAX_SWEEPS {
            let ubar: Vec<Complex<T>> = u1.iter().zip(&u0).map(|(a, b)| (*a + *b) * half).collect();
            let vbar: Vec<Complex<T>> = v1.iter().zip(&v0).map(|(a, b)| (*a + *b) * half).collect();
            let du = nonlinear_diag(scale, beta, &ubar, &vbar)?;
            let dv = nonlinear_diag(scale, beta, &vbar, &ubar)?;
            let (ru, rv) = rayon::join(
                || -> Result<_> { omega.solve(&t_half, &du, &assemble_rhs(&u0, &t_half, &du)?) },
                || -> Result<_> { omega.solve(&t_half, &dv, &assemble_rhs(&v0, &t_half, &dv)?) },
            );
            let (nu, rep_u) = ru?;
            let (nv, rep_v) = rv?;
            check_report(1, &rep_u, STARTUP_TOL)?;
            check_report(1, &rep_v, STARTUP_TOL)?;
            iterations += rep_u.iterations + rep_v.iterations;
            let size = max_norm(&nu).max(max_norm(&nv)).max(T::min_positive_value());
            change = max_diff(&nu, &u1).max(max_diff(&nv, &v1)) / size;
            u1 = nu;
            v1 = nv;
            if change <= fp_tol {
                let state = WaveState { u_prev: u0, u_curr: u1, v_prev: v0, v_curr: v1, n: 1 };
                return Ok((state, StartupReport { sweeps: sweep, last_change: change, iterations }));
            }
        }
        Err(Error::FixedPoint { sweeps: STARTUP_MAX_SWEEPS, change: change.as_f64() })
    }

    /// Resolves an automatic shift once for a fixed Toeplitz matrix.
    fn fixed_omega(&self, solver: &LinearSolver, t: &ToeplitzSym<T>) -> Result<LinearSolver> {
        let mut s = solver.clone();
        if let OmegaChoice::Auto(_) = solver.omega {
            s.omega = OmegaChoice::Fixed(solver.resolve_omega(t)?.as_f64());
        }
        Ok(s)
    }

    /// Advances `(n-1, n)` to `(n, n+1)`; the `u` and `v` systems are solved
    /// concurrently.
    pub fn licd_step(&self, state: &WaveState<T>, solver: &LinearSolver) -> Result<(WaveState<T>, [SolveReport<T>; 2])> {
        let du = self.diagonal(&state.u_curr, &state.v_curr)?;
        let dv = self.diagonal(&state.v_curr, &state.u_curr)?;
        let (ru, rv) = rayon::join(
            || -> Result<_> { solver.solve(&self.t, &du, &assemble_rhs(&state.u_prev, &self.t, &du)?) },
            || -> Result<_> { solver.solve(&self.t, &dv, &assemble_rhs(&state.v_prev, &self.t, &dv)?) },
        );
        let (u_next, rep_u) = ru?;
        let (v_next, rep_v) = rv?;
        let level = state.n + 1;
        check_report(level, &rep_u, self.residual_floor)?;
        check_report(level, &rep_v, self.residual_floor)?;
        let next = WaveState {
            u_prev: state.u_curr.clone(),
            u_curr: u_next,
            v_prev: state.v_curr.clone(),
            v_curr: v_next,
            n: level,
        };
        Ok((next, [rep_u, rep_v]))
    }

    /// `E^n` for the state holding levels `n` (`prev`) and `n+1` (`curr`).
    pub fn energy(&self, state: &WaveState<T>) -> Result<T> {
        energy(state, &self.grid, &self.stencil)
    }
}

/// `h Σ_j |u_j|²` over all interior nodes.
pub fn norm_sq<T: Real>(u: &[Complex<T>], h: T) -> T {
    h * u.iter().map(|z| z.norm_sqr()).sum::<T>()
}

/// `Q^n = (||u^{n+1}||² + ||u^n||²) / 2`.
pub fn mass<T: Real>(u_curr: &[Complex<T>], u_prev: &[Complex<T>], h: T) -> T {
    (norm_sq(u_curr, h) + norm_sq(u_prev, h)) * T::lit(0.5)
}

fn quadratic_form<T: Real>(stencil: &ToeplitzSym<T>, u: &[Complex<T>]) -> Result<T> {
    let au = stencil.matvec_complex(u)?;
    Ok(u.iter().zip(&au).map(|(a, b)| (a.conj() * *b).re).sum())
}

/// Discrete energy of a state holding levels `n` and `n+1`; `stencil` is the
/// unscaled fractional difference matrix.
pub fn energy<T: Real>(state: &WaveState<T>, grid: &GridSpec, stencil: &ToeplitzSym<T>) -> Result<T> {
    let h = grid.h();
    let kinetic = quadratic_form(stencil, &state.u_curr)?
        + quadratic_form(stencil, &state.u_prev)?
        + quadratic_form(stencil, &state.v_curr)?
        + quadratic_form(stencil, &state.v_prev)?;
    let beta = T::lit(grid.beta);
    let mut potential = T::zero();
    for j in 0..state.u_curr.len() {
        let (un, un1) = (state.u_prev[j].norm_sqr(), state.u_curr[j].norm_sqr());
        let (vn, vn1) = (state.v_prev[j].norm_sqr(), state.v_curr[j].norm_sqr());
        potential = potential + un * un1 + vn * vn1 + beta * (un * vn1 + vn * un1);
    }
    let kin_scale = T::lit(grid.gamma * h / (4.0 * h.powf(grid.alpha)));
    let pot_scale = T::lit(grid.rho * h / 4.0);
    Ok(kin_scale * kinetic - pot_scale * potential)
}

/// Mass and energy traces with relative errors `|(X^n - X^0) / X^0|`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConservationReport {
    pub t: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub e: Vec<f64>,
    pub rel_err_q1: Vec<f64>,
    pub rel_err_q2: Vec<f64>,
    pub rel_err_e: Vec<f64>,
}

fn rel_err(x: f64, x0: f64) -> f64 {
    if x0 == 0.0 {
        (x - x0).abs()
    } else {
        ((x - x0) / x0).abs()
    }
}

impl ConservationReport {
    fn push(&mut self, t: f64, q1: f64, q2: f64, e: f64) {
        self.t.push(t);
        self.q1.push(q1);
        self.q2.push(q2);
        self.e.push(e);
        self.rel_err_q1.push(rel_err(q1, self.q1[0]));
        self.rel_err_q2.push(rel_err(q2, self.q2[0]));
        self.rel_err_e.push(rel_err(e, self.e[0]));
    }

    pub fn max_rel_err_q1(&self) -> f64 {
        self.rel_err_q1.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_rel_err_q2(&self) -> f64 {
        self.rel_err_q2.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_rel_err_e(&self) -> f64 {
        self.rel_err_e.iter().copied().fold(0.0, f64::max)
    }
}

/// Solver statistics for one time level.
#[derive(Clone, Debug)]
pub struct LevelRecord {
    pub n: usize,
    pub t: f64,
    pub iterations_u: usize,
    pub iterations_v: usize,
    pub relres_u: f64,
    pub relres_v: f64,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct Snapshot<T> {
    pub n: usize,
    pub t: f64,
    pub u: Vec<Complex<T>>,
    pub v: Vec<Complex<T>>,
}

#[derive(Clone, Debug)]
pub struct EvolveConfig {
    pub grid: GridSpec,
    pub init: InitialData,
    pub solver: LinearSolver,
    /// Keep every `k`-th level (level 0 and the last level are always kept).
    pub snapshot_stride: Option<usize>,
    /// See [`Licd::with_residual_floor`].
    pub residual_floor: f64,
}

#[derive(Clone, Debug)]
pub struct EvolveOutput<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub conservation: ConservationReport,
    /// Levels `1..=N`; level 1 is the startup step.
    pub levels: Vec<LevelRecord>,
    pub startup: StartupReport<T>,
    pub final_state: WaveState<T>,
}

/// Startup step followed by `N - 1` LICD steps.
pub fn evolve<T: Real>(config: &EvolveConfig) -> Result<EvolveOutput<T>> {
    let grid = &config.grid;
    let licd = Licd::<T>::new(grid.clone())?.with_residual_floor(config.residual_floor);
    let solver = licd.fixed_omega(&config.solver, licd.toeplitz())?;
    let tau = grid.tau();
    let h = T::lit(grid.h());
    let stride = config.snapshot_stride.filter(|&s| s > 0);

    let start = Instant::now();
    let (mut state, startup) = licd.startup_step(&config.init, &config.solver)?;
    let mut levels = vec![LevelRecord {
        n: 1,
        t: tau,
        iterations_u: startup.iterations,
        iterations_v: 0,
        relres_u: 0.0,
        relres_v: 0.0,
        wall_time: start.elapsed(),
    }];
    let mut snapshots = Vec::new();
    let mut keep = |n: usize, u: &[Complex<T>], v: &[Complex<T>], last: bool| {
        if let Some(s) = stride {
            if n % s == 0 || last {
                snapshots.push(Snapshot { n, t: n as f64 * tau, u: u.to_vec(), v: v.to_vec() });
            }
        }
    };
    keep(0, &state.u_prev, &state.v_prev, false);
    keep(1, &state.u_curr, &state.v_curr, grid.n_steps == 1);

    let mut conservation = ConservationReport::default();
    let record = |c: &mut ConservationReport, s: &WaveState<T>| -> Result<()> {
        let q1 = mass(&s.u_curr, &s.u_prev, h).as_f64();
        let q2 = mass(&s.v_curr, &s.v_prev, h).as_f64();
        let e = licd.energy(s)?.as_f64();
        c.push((s.n - 1) as f64 * tau, q1, q2, e);
        Ok(())
    };
    record(&mut conservation, &state)?;

    for _ in 1..grid.n_steps {
        let t0 = Instant::now();
        let (next, [ru, rv]) = licd.licd_step(&state, &solver)?;
        state = next;
        levels.push(LevelRecord {
            n: state.n,
            t: state.n as f64 * tau,
            iterations_u: ru.iterations,
            iterations_v: rv.iterations,
            relres_u: ru.final_relres.as_f64(),
            relres_v: rv.final_relres.as_f64(),
            wall_time: t0.elapsed(),
        });
        keep(state.n, &state.u_curr, &state.v_curr, state.n == grid.n_steps);
        record(&mut conservation, &state)?;
    }
    Ok(EvolveOutput { snapshots, conservation, levels, startup, final_state: state })
}
