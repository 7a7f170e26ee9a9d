use std::path::Path;
use std::process::Command as Process;

use fracnls::SolverKind;
use fracnls_cli::commands::{self, BenchStatus};
use fracnls_cli::config::{OmegaConfig, SpectrumConfig, SpectrumMode};
use fracnls_cli::output::read_csv;
use fracnls_cli::ExperimentConfig;

const BIN: &str = env!("CARGO_BIN_EXE_fracnls");

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

fn small(model: &str, m: usize, alpha: f64) -> ExperimentConfig {
    config(&format!(r#"{{"model": "{model}", "grid": {{"m": {m}, "n_steps": 200, "t_final": 4.0, "alpha": {alpha}}}}}"#))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_bin(cmd: &str, config: &Path, out: &Path) -> std::process::Output {
    Process::new(BIN).args([cmd, "--config"]).arg(config).arg("--out").arg(out).output().unwrap()
}

/// CSV rows with the given columns blanked.
fn rows_without(path: &Path, drop: &[&str]) -> (String, Vec<Vec<String>>) {
    let (manifest, header, mut rows) = read_csv(path).unwrap();
    let idx: Vec<usize> = header.iter().enumerate().filter(|(_, h)| drop.contains(&h.as_str())).map(|(i, _)| i).collect();
    for row in &mut rows {
        for &i in &idx {
            row[i].clear();
        }
    }
    (manifest, rows)
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"model": "dnls", "grid": {"m": 64, "n_steps": 10, "t_final": 1, "alpha": 1.5}, "omega": {"sweep": {"lo": 0.1, "hi": 1, "step": 0}}}"#,
        r#"{"model": "dnls", "grid": {"m": 64, "n_steps": 10, "t_final": 1, "alpha": 1.5}, "tol": 0}"#,
        r#"{"model": "dnls", "grid": {"m": 64, "n_steps": 10, "t_final": 1, "alpha": 2.5}}"#,
        r#"{"model": "kdv", "grid": {"m": 64, "n_steps": 10, "t_final": 1, "alpha": 1.5}}"#,
        r#"{"model": "dnls", "grid": {"m": 64, "n_steps": 10, "t_final": 1, "alpha": 1.5}, "solver": "bicgstab"}"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let p = write_config(dir.path(), &format!("bad{i}.json"), text);
        let out = run_bin("solve", &p, &dir.path().join("out"));
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run_bin("solve", &dir.path().join("missing.json"), &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&run_bin("solve", &write_config(dir.path(), "s.json", cases[0]), dir.path()).stderr)
        .to_string();
    assert!(err.contains("omega.sweep.step"), "{err}");
}

#[test]
fn dense_spectrum_above_cap_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"model": "dnls", "grid": {"m": 1602, "n_steps": 200, "t_final": 2, "alpha": 1.5}, "omega": "auto", "spectrum": {"mode": "dense"}}"#,
    );
    assert_eq!(run_bin("spectrum", &p, &dir.path().join("o")).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"model": "dnls", "grid": {"m": 128, "n_steps": 5, "t_final": 0.5, "alpha": 1.8}, "solver": "gmres", "tol": 1e-12, "max_it": 2}"#,
    );
    let out = run_bin("evolve", &p, &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_point_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"model": "cnls", "grid": {"m": 128, "n_steps": 200, "t_final": 4, "alpha": 1.5}, "omega": {"sweep": {"lo": 0.5, "hi": 0.5, "step": 0.1}}}"#,
    );
    let out = run_bin("sweep-omega", &p, &dir.path().join("o"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (manifest, header, rows) = read_csv(&dir.path().join("o/sweep.csv")).unwrap();
    assert!(manifest.contains("command=sweep-omega"));
    assert_eq!(header, ["omega", "it_u", "converged_u", "it_v", "converged_v", "it_total", "wall_ms"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.5);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/run.json")).unwrap()).unwrap();
    assert_eq!(run["manifest"]["command"], "sweep-omega");
    assert_eq!(run["config"]["model"], "cnls");
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"model": "cnls", "grid": {"m": 256, "n_steps": 100, "t_final": 2, "alpha": 1.7}, "omega": {"sweep": {"lo": 0.1, "hi": 1.5, "step": 0.1}},
            "bench": {"solvers": ["gmres", "cnas-gmres"]}, "seed": 7}"#,
    );
    let e = write_config(
        dir.path(),
        "e.json",
        r#"{"model": "cnls", "grid": {"m": 64, "n_steps": 20, "t_final": 0.4, "alpha": 1.7}, "omega": "auto", "tol": 1e-12,
            "evolve": {"snapshot_stride": 5}, "seed": 7}"#,
    );
    let runs = [
        ("sweep-omega", &p, "sweep.csv"),
        ("bench", &p, "bench.csv"),
        ("solve", &p, "residuals.csv"),
        ("evolve", &e, "conservation.csv"),
        ("evolve", &e, "trajectory.csv"),
    ];
    for (cmd, cfg, file) in runs {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        assert!(run_bin(cmd, cfg, &a).status.success());
        assert!(run_bin(cmd, cfg, &b).status.success());
        let ra = rows_without(&a.join(file), &["wall_ms"]);
        let rb = rows_without(&b.join(file), &["wall_ms"]);
        assert!(!ra.1.is_empty());
        assert_eq!(ra, rb, "{cmd} {file}");
    }
}

#[test]
fn seed_flag_changes_the_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", r#"{"model": "dnls", "grid": {"m": 64, "n_steps": 10, "t_final": 0.2, "alpha": 1.5}, "omega": {"fixed": 0.5}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_bin("solve", &p, &a).status.success());
    let out = Process::new(BIN).args(["solve", "--seed", "9", "--threads", "2", "--config"]).arg(&p).arg("--out").arg(&b).output().unwrap();
    assert!(out.status.success());
    let (ma, _, _) = read_csv(&a.join("residuals.csv")).unwrap();
    let (mb, _, _) = read_csv(&b.join("residuals.csv")).unwrap();
    assert_ne!(ma, mb);
}

#[test]
fn dense_and_cnas_solutions_agree() {
    let mut c = small("cnls", 64, 1.5);
    c.tol = 1e-12;
    c.omega = OmegaConfig::Fixed(0.5);
    c.solver = SolverKind::Dense;
    let dense = commands::solve(&c).unwrap();
    c.solver = SolverKind::CnasGmres;
    let cnas = commands::solve(&c).unwrap();
    assert!(cnas.converged());
    for (a, b) in dense.records.iter().zip(&cnas.records) {
        let err = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "{}: {err}", a.label);
    }
}

#[test]
fn sweep_minimum_not_worse_than_optimal_shift() {
    let mut c = small("dnls", 800, 1.5);
    let sweep = commands::sweep_omega(&c).unwrap();
    let best = sweep.argmin[0].iterations.unwrap();
    c.omega = OmegaConfig::Auto;
    let auto = commands::solve(&c).unwrap();
    assert!(auto.converged());
    assert!(best <= auto.total_iterations() + 2, "sweep {best} vs auto {}", auto.total_iterations());
    assert_eq!(sweep.rows.len(), 400);
}

#[test]
fn block_matrix_spectrum_range_at_largest_order() {
    // M = 1600 on T = 2 gives τ = 0.01
    let mut c = config(r#"{"model": "dnls", "grid": {"m": 1600, "n_steps": 200, "t_final": 2.0, "alpha": 1.9}, "omega": "auto"}"#);
    c.spectrum = Some(SpectrumConfig { mode: SpectrumMode::Dense, matrices: vec!["R".into()], ..SpectrumConfig::default() });
    let s = commands::spectrum(&c).unwrap();
    assert_eq!(s.points.len(), 3200);
    let top = s.points.iter().map(|p| p.1.im.abs()).fold(0.0, f64::max);
    assert!(s.points.iter().all(|p| p.1.re == 1.0));
    assert!(top <= 42.0 * 1.05, "{top}");
    assert!(top >= 42.0 * 0.8, "{top}");
}

#[test]
fn preconditioned_spectra_respect_contraction_circle() {
    let mut c = config(r#"{"model": "dnls", "grid": {"m": 128, "n_steps": 200, "t_final": 2.0, "alpha": 1.5}}"#);
    for omega in [0.3, 1.0, 3.0] {
        c.omega = OmegaConfig::Fixed(omega);
        let s = commands::spectrum(&c).unwrap();
        let worst = s.points.iter().filter(|p| p.0 == "nass").map(|p| (1.0 - p.1).norm()).fold(0.0, f64::max);
        assert!(worst <= s.sigma + 1e-8, "ω={omega}: {worst} > {}", s.sigma);
        assert_eq!(s.points.iter().filter(|p| p.0 == "cnas").count(), 256);
    }
}

#[test]
fn ritz_mode_tracks_dense_extremes() {
    let mut c = config(r#"{"model": "dnls", "grid": {"m": 256, "n_steps": 200, "t_final": 2.0, "alpha": 1.7}, "omega": {"fixed": 1.0}}"#);
    let dense = commands::spectrum(&c).unwrap();
    c.spectrum = Some(SpectrumConfig { mode: SpectrumMode::Ritz, ritz_steps: 120, ..SpectrumConfig::default() });
    let ritz = commands::spectrum(&c).unwrap();
    let top = |s: &commands::SpectrumOutcome| s.points.iter().filter(|p| p.0 == "R").map(|p| p.1.im.abs()).fold(0.0, f64::max);
    assert!((top(&dense) - top(&ritz)).abs() <= 1e-3 * top(&dense), "{} vs {}", top(&dense), top(&ritz));
    assert!((dense.sigma - ritz.sigma).abs() <= 1e-6);
}

#[test]
fn zero_initial_data_gives_zero_traces() {
    let mut c = small("cnls", 32, 1.5);
    c.grid.n_steps = 10;
    c.grid.t_final = 0.1;
    c.initial = fracnls_cli::config::InitialKind::Zero;
    c.omega = OmegaConfig::Fixed(1.0);
    let out = commands::run_evolve(&c).unwrap();
    let r = &out.conservation;
    assert!(r.q1.iter().chain(&r.q2).chain(&r.e).all(|&v| v == 0.0));
    assert!(out.final_state.u_curr.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn preconditioned_solver_is_faster_than_plain_gmres() {
    let mut c = small("cnls", 1600, 1.5);
    c.omega = OmegaConfig::Fixed(0.3);
    c.bench = Some(fracnls_cli::config::BenchConfig {
        ms: vec![1600],
        solvers: vec![SolverKind::Gmres, SolverKind::CnasGmres],
        dense_max_m: 0,
    });
    let rows = commands::bench(&c).unwrap();
    assert!(rows.iter().all(|r| r.status == BenchStatus::Ok));
    assert!(rows[1].iterations < rows[0].iterations);
    assert!(rows[1].wall < rows[0].wall, "{:?} vs {:?}", rows[1].wall, rows[0].wall);
}

#[test]
fn dense_rows_above_cap_are_skipped() {
    let mut c = small("dnls", 64, 1.3);
    c.omega = OmegaConfig::Fixed(0.5);
    c.bench = Some(fracnls_cli::config::BenchConfig { ms: vec![32, 64], solvers: vec![SolverKind::Dense], dense_max_m: 32 });
    let rows = commands::bench(&c).unwrap();
    assert_eq!(rows[0].status, BenchStatus::Ok);
    assert_eq!(rows[1].status, BenchStatus::Skipped);
}

#[test]
fn shipped_experiment_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(c.name.as_deref(), path.file_stem().and_then(|s| s.to_str()));
            n += 1;
        }
    }
    assert!(n >= 40);
}
