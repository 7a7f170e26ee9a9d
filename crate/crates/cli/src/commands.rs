//! The five experiment commands.

use std::path::Path;
use std::time::Duration;

use fracnls::blocksys::BlockSystem;
use fracnls::dense;
use fracnls::krylov::{arnoldi_ritz, operator, Preconditioner};
use fracnls::licd::{evolve, EvolveConfig, EvolveOutput};
use fracnls::nass_iter::{lambda_max, sigma_bound, ExtentMethod};
use fracnls::precond::{build_cnas, build_nass, InnerCg, Scaled};
use fracnls::{LinearSolver, OmegaChoice, SolverKind, ToeplitzSym};
use num_complex::Complex;
use serde_json::{json, Value};

use crate::benchmark::{argmin_set, solve_system, sweep, system_key, Benchmark, SolveRecord, SweepRow};
use crate::config::{ExperimentConfig, OmegaConfig, SpectrumMode};
use crate::output::{num, Manifest, OutputDir};
use crate::CliError;

/// Largest `M` accepted by the dense spectrum mode.
pub const DENSE_SPECTRUM_MAX_M: usize = 1600;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    SweepOmega,
    Spectrum,
    Evolve,
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepOmega => "sweep-omega",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Bench => "bench",
        }
    }
}

/// Runs `cmd`, writes its files under `out` and returns the run summary.
pub fn run(cmd: Command, config: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let dir = OutputDir::create(out, Manifest::new(config, cmd.name())?)?;
    let summary = match cmd {
        Command::Solve => write_solve(config, &dir, &solve(config)?)?,
        Command::SweepOmega => write_sweep(config, &dir, &sweep_omega(config)?)?,
        Command::Spectrum => write_spectrum(config, &dir, &spectrum(config)?)?,
        Command::Evolve => write_evolve(config, &dir, &run_evolve(config)?)?,
        Command::Bench => write_bench(config, &dir, &bench(config)?)?,
    };
    dir.write_run_json(config, summary.clone())?;
    Ok(summary)
}

fn ms(d: Duration) -> String {
    num(d.as_secs_f64() * 1e3)
}

fn benchmark_for(config: &ExperimentConfig, m: usize) -> Result<Benchmark, CliError> {
    let grid = config.grid_spec_with_m(m)?;
    Benchmark::build(&grid, &config.initial_data(&grid), config.model)
}

fn uses_omega(kind: SolverKind) -> bool {
    !matches!(kind, SolverKind::Gmres | SolverKind::Dense)
}

fn auto_omega(config: &ExperimentConfig) -> OmegaChoice {
    OmegaChoice::Auto(ExtentMethod::Power { tol: 1e-6, max_iters: 200_000, seed: config.seed })
}

/// Solves every system of `bench`; a configured sweep tunes each system's
/// shift separately (smallest shift of the argmin set).
pub fn tuned_solve(config: &ExperimentConfig, bench: &Benchmark, kind: SolverKind) -> Result<Vec<SolveRecord>, CliError> {
    let template = config.solver_with(kind, OmegaChoice::Fixed(1.0));
    let choices: Vec<OmegaChoice> = match (uses_omega(kind), config.omega) {
        (false, _) => vec![OmegaChoice::Fixed(1.0); bench.systems.len()],
        (true, OmegaConfig::Fixed(w)) => vec![OmegaChoice::Fixed(w); bench.systems.len()],
        (true, OmegaConfig::Auto) => vec![auto_omega(config); bench.systems.len()],
        (true, OmegaConfig::Sweep(range)) => {
            let rows = sweep(bench, &template, &range.points())?;
            (0..bench.systems.len())
                .map(|i| {
                    // without a converged shift, keep the least-iterations one so the row reports failure
                    let set = argmin_set(&rows, system_key(i)).1;
                    let fallback = || argmin_set(&rows, |r: &SweepRow| r.runs.get(i).map(|x| x.0)).1;
                    OmegaChoice::Fixed(set.first().copied().or_else(|| fallback().first().copied()).unwrap_or(range.lo))
                })
                .collect()
        }
    };
    bench
        .systems
        .iter()
        .zip(choices)
        .map(|(sys, omega)| solve_system(&bench.t, sys, &LinearSolver { omega, ..template.clone() }))
        .collect()
}

pub struct SolveOutcome {
    pub m: usize,
    pub records: Vec<SolveRecord>,
}

impl SolveOutcome {
    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.iterations).sum()
    }

    pub fn converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

pub fn solve(config: &ExperimentConfig) -> Result<SolveOutcome, CliError> {
    let grid = config.grid_spec()?;
    let bench = benchmark_for(config, grid.m)?;
    Ok(SolveOutcome { m: grid.m, records: tuned_solve(config, &bench, config.solver)? })
}

fn write_solve(config: &ExperimentConfig, dir: &OutputDir, out: &SolveOutcome) -> Result<Value, CliError> {
    let rows: Vec<Vec<String>> = out
        .records
        .iter()
        .flat_map(|r| r.history.iter().enumerate().map(|(k, v)| vec![r.label.to_string(), k.to_string(), num(*v)]))
        .collect();
    dir.write_csv(config.output_name("residuals", "residuals.csv"), &["system", "iteration", "relres"], &rows)?;
    let systems: Vec<Value> = out
        .records
        .iter()
        .map(|r| {
            json!({
                "system": r.label,
                "omega": r.omega,
                "iterations": r.iterations,
                "converged": r.converged,
                "relres": r.relres,
                "wall_ms": r.wall.as_secs_f64() * 1e3,
            })
        })
        .collect();
    Ok(json!({
        "solver": config.solver.name(),
        "m": out.m,
        "total_iterations": out.total_iterations(),
        "converged": out.converged(),
        "systems": systems,
    }))
}

/// Minimizing shifts of one system.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgminSet {
    pub system: &'static str,
    pub iterations: Option<usize>,
    pub omegas: Vec<f64>,
}

impl ArgminSet {
    /// `[min, max]` of the set.
    pub fn interval(&self) -> Option<(f64, f64)> {
        Some((*self.omegas.first()?, *self.omegas.last()?))
    }
}

pub struct SweepOutcome {
    pub labels: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
    pub argmin: Vec<ArgminSet>,
}

fn sweep_points(config: &ExperimentConfig, t: &ToeplitzSym<f64>) -> Result<Vec<f64>, CliError> {
    match config.omega {
        OmegaConfig::Sweep(r) => Ok(r.points()),
        OmegaConfig::Fixed(w) => Ok(vec![w]),
        OmegaConfig::Auto => Ok(vec![config.solver_with(config.solver, auto_omega(config)).resolve_omega(t)?]),
    }
}

pub fn sweep_omega(config: &ExperimentConfig) -> Result<SweepOutcome, CliError> {
    if !uses_omega(config.solver) {
        return Err(CliError::Config(format!("solver: `{}` has no shift to sweep", config.solver)));
    }
    let bench = benchmark_for(config, config.grid_spec()?.m)?;
    let omegas = sweep_points(config, &bench.t)?;
    let rows = sweep(&bench, &config.solver_with(config.solver, OmegaChoice::Fixed(1.0)), &omegas)?;
    let argmin = bench
        .systems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (iterations, omegas) = argmin_set(&rows, system_key(i));
            ArgminSet { system: s.label, iterations, omegas }
        })
        .collect();
    Ok(SweepOutcome { labels: bench.systems.iter().map(|s| s.label).collect(), rows, argmin })
}

fn write_sweep(config: &ExperimentConfig, dir: &OutputDir, out: &SweepOutcome) -> Result<Value, CliError> {
    let mut header = vec!["omega".to_string()];
    for l in &out.labels {
        header.push(format!("it_{l}"));
        header.push(format!("converged_{l}"));
    }
    header.extend(["it_total".to_string(), "wall_ms".to_string()]);
    let rows: Vec<Vec<String>> = out
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![num(r.omega)];
            for (it, conv, _) in &r.runs {
                row.push(it.to_string());
                row.push(conv.to_string());
            }
            row.push(r.total().to_string());
            row.push(ms(r.runs.iter().map(|x| x.2).sum()));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.write_csv(config.output_name("sweep", "sweep.csv"), &header, &rows)?;
    let argmin: Vec<Value> = out
        .argmin
        .iter()
        .map(|a| json!({ "system": a.system, "iterations": a.iterations, "interval": a.interval(), "omegas": a.omegas }))
        .collect();
    Ok(json!({ "solver": config.solver.name(), "points": out.rows.len(), "argmin": argmin }))
}

pub struct SpectrumOutcome {
    pub m: usize,
    pub omega: f64,
    /// Contraction factor `σ(ω)`; the NASS-preconditioned spectrum lies in the
    /// disc of this radius around 1.
    pub sigma: f64,
    /// Dense mode only.
    pub lambda_min: Option<f64>,
    pub lambda_max: f64,
    /// `(matrix, eigenvalue)` with matrix one of `R`, `nass`, `cnas`.
    pub points: Vec<(&'static str, Complex<f64>)>,
}

pub fn spectrum(config: &ExperimentConfig) -> Result<SpectrumOutcome, CliError> {
    let spec = config.spectrum.clone().unwrap_or_default();
    let grid = config.grid_spec()?;
    if spec.mode == SpectrumMode::Dense && grid.m > DENSE_SPECTRUM_MAX_M {
        return Err(CliError::Config(format!(
            "spectrum.mode: dense mode is limited to M <= {DENSE_SPECTRUM_MAX_M}, got {}",
            grid.m
        )));
    }
    let bench = benchmark_for(config, grid.m)?;
    let t = &bench.t;
    let sys = &bench.systems[0];
    let omega = match config.omega {
        OmegaConfig::Fixed(w) => w,
        OmegaConfig::Auto => config.solver_with(SolverKind::CnasGmres, auto_omega(config)).resolve_omega(t)?,
        OmegaConfig::Sweep(_) => return Err(CliError::Config("omega: spectrum needs a fixed or auto shift".into())),
    };
    let block = BlockSystem::from_complex(t.clone(), sys.d.clone(), &sys.b)?;
    let cnas = build_cnas(t, &sys.d, omega, config.circulant)?;
    let want = |name: &str| spec.matrices.iter().any(|m| m == name);
    let mut points = Vec::new();
    let (lambda_min, lambda_max, sigma) = match spec.mode {
        SpectrumMode::Dense => {
            let lam = dense::symmetric_eigenvalues(dense::toeplitz_matrix(t));
            // R = I + [[0, K], [-K, 0]] has eigenvalues 1 ± i eig(K), K = T - D
            if want("R") {
                let mut k = dense::toeplitz_matrix(t);
                for (j, dj) in sys.d.as_slice().iter().enumerate() {
                    k[(j, j)] -= dj;
                }
                for e in dense::symmetric_eigenvalues(k) {
                    points.push(("R", Complex::new(1.0, e)));
                    points.push(("R", Complex::new(1.0, -e)));
                }
            }
            if want("nass") || want("cnas") {
                let r = dense::block_matrix(&block);
                if want("nass") {
                    let f = dense::nass_matrix(t, &sys.d, omega, true);
                    points.extend(dense::preconditioned_eigenvalues(&f, &r)?.into_iter().map(|z| ("nass", z)));
                }
                if want("cnas") {
                    let f = dense::cnas_matrix(cnas.circulant(), &sys.d, omega, true);
                    points.extend(dense::preconditioned_eigenvalues(&f, &r)?.into_iter().map(|z| ("cnas", z)));
                }
            }
            (Some(lam[0]), lam[lam.len() - 1], sigma_bound(omega, &lam)?)
        }
        SpectrumMode::Ritz => {
            let steps = spec.ritz_steps.min(block.dim());
            let r = operator(block.dim(), |x: &[f64], y: &mut [f64]| block.apply_r_into(x, y));
            if want("R") {
                points.extend(arnoldi_ritz(&r, steps, config.seed)?.into_iter().map(|z| ("R", z)));
            }
            let nass = build_nass(t, &sys.d, omega, InnerCg { circulant: config.circulant, ..InnerCg::default() })?;
            let precs: [(&'static str, &dyn Preconditioner<f64>); 2] = [("nass", &nass), ("cnas", &cnas)];
            for (name, p) in precs.into_iter().filter(|(name, _)| want(name)) {
                let scaled = Scaled { inner: p, factor: 2.0 * omega };
                let op = operator(block.dim(), |x: &[f64], y: &mut [f64]| {
                    let mut tmp = vec![0.0; x.len()];
                    block.apply_r_into(x, &mut tmp)?;
                    scaled.apply(&tmp, y)
                });
                points.extend(arnoldi_ritz(&op, steps, config.seed)?.into_iter().map(|z| (name, z)));
            }
            // σ(ω) is attained at λ_max
            let hi = lambda_max(t, ExtentMethod::Power { tol: 1e-8, max_iters: 200_000, seed: config.seed })?;
            (None, hi, sigma_bound(omega, &[hi])?)
        }
    };
    Ok(SpectrumOutcome { m: grid.m, omega, sigma, lambda_min, lambda_max, points })
}

fn write_spectrum(config: &ExperimentConfig, dir: &OutputDir, out: &SpectrumOutcome) -> Result<Value, CliError> {
    let rows: Vec<Vec<String>> =
        out.points.iter().map(|(which, z)| vec![which.to_string(), num(z.re), num(z.im)]).collect();
    dir.write_csv(config.output_name("spectrum", "spectrum.csv"), &["matrix", "re", "im"], &rows)?;
    let bounds = vec![vec![
        num(out.omega),
        num(out.sigma),
        num(1.0),
        num(0.0),
        out.lambda_min.map(num).unwrap_or_default(),
        num(out.lambda_max),
    ]];
    dir.write_csv(
        config.output_name("bounds", "bounds.csv"),
        &["omega", "sigma", "center_re", "center_im", "lambda_min", "lambda_max"],
        &bounds,
    )?;
    let max_imag_r = out.points.iter().filter(|p| p.0 == "R").map(|p| p.1.im.abs()).fold(0.0, f64::max);
    Ok(json!({
        "m": out.m,
        "omega": out.omega,
        "sigma": out.sigma,
        "lambda_min": out.lambda_min,
        "lambda_max": out.lambda_max,
        "max_abs_imag_r": max_imag_r,
        "points": out.points.len(),
    }))
}

pub fn run_evolve(config: &ExperimentConfig) -> Result<EvolveOutput<f64>, CliError> {
    let grid = config.grid_spec()?;
    let opts = config.evolve.clone().unwrap_or_default();
    let omega = if uses_omega(config.solver) { config.single_omega(config.seed)? } else { OmegaChoice::Fixed(1.0) };
    let cfg = EvolveConfig {
        init: config.initial_data(&grid),
        grid,
        solver: config.solver_with(config.solver, omega),
        snapshot_stride: Some(opts.snapshot_stride),
        residual_floor: opts.residual_floor,
    };
    Ok(evolve::<f64>(&cfg)?)
}

fn write_evolve(config: &ExperimentConfig, dir: &OutputDir, out: &EvolveOutput<f64>) -> Result<Value, CliError> {
    let c = &out.conservation;
    let rows: Vec<Vec<String>> = out
        .levels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            vec![
                l.n.to_string(),
                num(c.t[i]),
                num(c.q1[i]),
                num(c.q2[i]),
                num(c.e[i]),
                num(c.rel_err_q1[i]),
                num(c.rel_err_q2[i]),
                num(c.rel_err_e[i]),
                l.iterations_u.to_string(),
                l.iterations_v.to_string(),
                ms(l.wall_time),
            ]
        })
        .collect();
    dir.write_csv(
        config.output_name("conservation", "conservation.csv"),
        &["n", "t", "q1", "q2", "e", "rel_err_q1", "rel_err_q2", "rel_err_e", "it_u", "it_v", "wall_ms"],
        &rows,
    )?;
    if !out.snapshots.is_empty() {
        let x = config.grid_spec()?.nodes();
        let rows: Vec<Vec<String>> = out
            .snapshots
            .iter()
            .flat_map(|s| {
                x.iter().enumerate().map(move |(j, xj)| {
                    vec![
                        s.n.to_string(),
                        num(s.t),
                        num(*xj),
                        num(s.u[j].re),
                        num(s.u[j].im),
                        num(s.v[j].re),
                        num(s.v[j].im),
                    ]
                })
            })
            .collect();
        dir.write_csv(
            config.output_name("trajectory", "trajectory.csv"),
            &["n", "t", "x", "u_re", "u_im", "v_re", "v_im"],
            &rows,
        )?;
    }
    Ok(json!({
        "levels": out.levels.len(),
        "startup_sweeps": out.startup.sweeps,
        "max_rel_err_q1": c.max_rel_err_q1(),
        "max_rel_err_q2": c.max_rel_err_q2(),
        "max_rel_err_e": c.max_rel_err_e(),
        "total_iterations": out.levels.iter().map(|l| l.iterations_u + l.iterations_v).sum::<usize>(),
    }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BenchStatus {
    Ok,
    NotConverged,
    /// Dense elimination above the configured size cap.
    Skipped,
    Failed(String),
}

impl BenchStatus {
    fn label(&self) -> String {
        match self {
            BenchStatus::Ok => "ok".into(),
            BenchStatus::NotConverged => "not-converged".into(),
            BenchStatus::Skipped => "skipped".into(),
            BenchStatus::Failed(e) => format!("failed: {e}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub solver: SolverKind,
    pub m: usize,
    /// Summed over the systems.
    pub iterations: usize,
    pub status: BenchStatus,
    pub wall: Duration,
    pub omegas: Vec<Option<f64>>,
}

impl BenchRow {
    pub fn converged(&self) -> bool {
        self.status == BenchStatus::Ok
    }
}

pub fn bench(config: &ExperimentConfig) -> Result<Vec<BenchRow>, CliError> {
    let opts = config.bench.clone().unwrap_or_default();
    let ms = if opts.ms.is_empty() { vec![config.grid_spec()?.m] } else { opts.ms.clone() };
    let solvers = if opts.solvers.is_empty() {
        vec![SolverKind::Gmres, SolverKind::CnasGmres, SolverKind::Dense]
    } else {
        opts.solvers.clone()
    };
    let mut rows = Vec::new();
    for &m in &ms {
        let bench = benchmark_for(config, m)?;
        for &solver in &solvers {
            let mut row =
                BenchRow { solver, m, iterations: 0, status: BenchStatus::Ok, wall: Duration::ZERO, omegas: vec![] };
            if solver == SolverKind::Dense && m > opts.dense_max_m {
                row.status = BenchStatus::Skipped;
                rows.push(row);
                continue;
            }
            match tuned_solve(config, &bench, solver) {
                Ok(records) => {
                    row.iterations = records.iter().map(|r| r.iterations).sum();
                    row.wall = records.iter().map(|r| r.wall).sum();
                    row.omegas = records.iter().map(|r| r.omega).collect();
                    if !records.iter().all(|r| r.converged) {
                        row.status = BenchStatus::NotConverged;
                    }
                }
                Err(CliError::Config(e)) => return Err(CliError::Config(e)),
                Err(e) => row.status = BenchStatus::Failed(e.to_string()),
            }
            log::info!("bench {solver} M={m}: {} iterations, {:?}", row.iterations, row.status);
            rows.push(row);
        }
    }
    Ok(rows)
}

fn write_bench(config: &ExperimentConfig, dir: &OutputDir, rows: &[BenchRow]) -> Result<Value, CliError> {
    let omega = |r: &BenchRow, i: usize| r.omegas.get(i).copied().flatten().map(num).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.solver.to_string(),
                r.m.to_string(),
                r.iterations.to_string(),
                r.converged().to_string(),
                r.status.label(),
                omega(r, 0),
                omega(r, 1),
                ms(r.wall),
            ]
        })
        .collect();
    dir.write_csv(
        config.output_name("bench", "bench.csv"),
        &["solver", "m", "it", "converged", "status", "omega_u", "omega_v", "wall_ms"],
        &table,
    )?;
    let summary: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "solver": r.solver.name(), "m": r.m, "it": r.iterations, "status": r.status.label() }))
        .collect();
    Ok(json!({ "rows": summary }))
}
