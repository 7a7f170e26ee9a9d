//! JSON experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;

use fracnls::licd::{GridSpec, InitialData};
use fracnls::nass_iter::ExtentMethod;
use fracnls::{CirculantKind, LinearSolver, OmegaChoice, SolverKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Dnls,
    Cnls,
}

impl Model {
    /// `(γ, ρ, β)` of the reference experiments.
    fn default_coefficients(self) -> (f64, f64, f64) {
        match self {
            Model::Dnls => (1.0, 2.0, 0.0),
            Model::Cnls => (1.0, 1.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// The soliton data of the selected model.
    #[default]
    Model,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    /// Interior node count; mutually exclusive with `h`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Target spacing, rounded to the nearest grid with an even node count.
    #[serde(default)]
    pub h: Option<f64>,
    pub n_steps: usize,
    pub t_final: f64,
    pub alpha: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

fn default_a() -> f64 {
    -20.0
}

fn default_b() -> f64 {
    20.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl SweepRange {
    /// The search grid `0.01, 0.02, ..., 4.00`.
    pub const DEFAULT: SweepRange = SweepRange { lo: 0.01, hi: 4.0, step: 0.01 };

    /// Grid points `lo + k step <= hi` (with a half-step tolerance on `hi`),
    /// rounded to 10 decimals.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 0.5).floor().max(0.0) as usize;
        (0..=n).map(|k| ((self.lo + k as f64 * self.step) * 1e10).round() / 1e10).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaConfig {
    Fixed(f64),
    Sweep(SweepRange),
    /// `ω* = sqrt(λ_max² + 1)` with `λ_max` from power iteration.
    Auto,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Grid sizes; defaults to `grid.m`.
    #[serde(default)]
    pub ms: Vec<usize>,
    /// Defaults to GMRES, CNAS-GMRES and dense elimination.
    #[serde(default, with = "by_name::list")]
    pub solvers: Vec<SolverKind>,
    /// Dense elimination is skipped above this size.
    #[serde(default = "default_dense_max")]
    pub dense_max_m: usize,
}

fn default_dense_max() -> usize {
    6400
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMode {
    Dense,
    Ritz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_mode")]
    pub mode: SpectrumMode,
    /// Arnoldi steps in Ritz mode.
    #[serde(default = "default_ritz_steps")]
    pub ritz_steps: usize,
    /// Subset of `R`, `nass`, `cnas`.
    #[serde(default = "default_matrices")]
    pub matrices: Vec<String>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { mode: default_mode(), ritz_steps: default_ritz_steps(), matrices: default_matrices() }
    }
}

pub const SPECTRUM_MATRICES: [&str; 3] = ["R", "nass", "cnas"];

fn default_matrices() -> Vec<String> {
    SPECTRUM_MATRICES.iter().map(|s| s.to_string()).collect()
}

fn default_mode() -> SpectrumMode {
    SpectrumMode::Dense
}

fn default_ritz_steps() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveOptions {
    /// Write every `k`-th level to the trajectory file; `0` disables it.
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Accept stalled level solves whose relative residual is at most this.
    #[serde(default = "default_floor")]
    pub residual_floor: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { snapshot_stride: 0, residual_floor: default_floor() }
    }
}

fn default_floor() -> f64 {
    1e-13
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: Model,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: InitialKind,
    #[serde(default = "default_solver", with = "by_name")]
    pub solver: SolverKind,
    #[serde(default = "default_circulant", with = "by_name")]
    pub circulant: CirculantKind,
    #[serde(default = "default_omega")]
    pub omega: OmegaConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_it")]
    pub max_it: usize,
    /// File name overrides keyed by output kind (`report`, `residuals`,
    /// `sweep`, `spectrum`, `bounds`, `conservation`, `trajectory`, `bench`).
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub evolve: Option<EvolveOptions>,
}

fn default_solver() -> SolverKind {
    SolverKind::CnasGmres
}

fn default_circulant() -> CirculantKind {
    CirculantKind::Strang
}

fn default_omega() -> OmegaConfig {
    OmegaConfig::Sweep(SweepRange::DEFAULT)
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_it() -> usize {
    3000
}

/// Serializes enums through their `Display`/`FromStr` names.
mod by_name {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }

    pub mod list {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| x.to_string()))
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            Vec::<String>::deserialize(d)?.iter().map(|x| x.parse().map_err(de::Error::custom)).collect()
        }
    }
}

fn config_error(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(config_error("tol", format!("{} is outside (0, 1)", self.tol)));
        }
        if self.max_it == 0 {
            return Err(config_error("max_it", "must be positive"));
        }
        match self.omega {
            OmegaConfig::Fixed(w) if !(w > 0.0 && w.is_finite()) => {
                return Err(config_error("omega.fixed", format!("{w} must be positive")));
            }
            OmegaConfig::Sweep(r) => {
                if !(r.step > 0.0) {
                    return Err(config_error("omega.sweep.step", format!("{} must be positive", r.step)));
                }
                if !(r.lo > 0.0 && r.hi >= r.lo) {
                    return Err(config_error("omega.sweep", format!("need 0 < lo <= hi, got [{}, {}]", r.lo, r.hi)));
                }
            }
            _ => {}
        }
        match (self.grid.m, self.grid.h) {
            (Some(_), Some(_)) => return Err(config_error("grid", "give either `m` or `h`, not both")),
            (None, None) => return Err(config_error("grid", "one of `m` or `h` is required")),
            (None, Some(h)) if !(h > 0.0) => return Err(config_error("grid.h", format!("{h} must be positive"))),
            _ => {}
        }
        if let Some(s) = &self.spectrum {
            if s.mode == SpectrumMode::Ritz && s.ritz_steps == 0 {
                return Err(config_error("spectrum.ritz_steps", "must be positive"));
            }
            if let Some(bad) = s.matrices.iter().find(|m| !SPECTRUM_MATRICES.contains(&m.as_str())) {
                return Err(config_error("spectrum.matrices", format!("unknown matrix `{bad}`")));
            }
        }
        if let Some(e) = &self.evolve {
            if !(e.residual_floor >= 0.0 && e.residual_floor < 1.0) {
                return Err(config_error("evolve.residual_floor", format!("{} is outside [0, 1)", e.residual_floor)));
            }
        }
        self.grid_spec()?;
        Ok(())
    }

    /// The grid with model defaults filled in and `h` resolved to `M`.
    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        self.grid_spec_with_m(self.grid_m())
    }

    /// As [`ExperimentConfig::grid_spec`] with a different node count.
    pub fn grid_spec_with_m(&self, m: usize) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        let (gamma, rho, beta) = self.model.default_coefficients();
        let spec = GridSpec {
            a: g.a,
            b: g.b,
            m,
            n_steps: g.n_steps,
            t_final: g.t_final,
            alpha: g.alpha,
            gamma: g.gamma.unwrap_or(gamma),
            rho: g.rho.unwrap_or(rho),
            beta: g.beta.unwrap_or(beta),
        };
        spec.validate().map_err(|e| CliError::Config(format!("grid: {e}")))?;
        Ok(spec)
    }

    fn grid_m(&self) -> usize {
        match (self.grid.m, self.grid.h) {
            (Some(m), _) => m,
            (None, Some(h)) => GridSpec::interior_nodes_for_spacing(self.grid.a, self.grid.b, h),
            (None, None) => 0,
        }
    }

    pub fn initial_data(&self, grid: &GridSpec) -> InitialData {
        match (self.initial, self.model) {
            (InitialKind::Zero, _) => InitialData::zero(grid.m),
            (InitialKind::Model, Model::Dnls) => InitialData::dnls(grid),
            (InitialKind::Model, Model::Cnls) => InitialData::cnls(grid),
        }
    }

    /// Solver for a single shift; sweeps are resolved by the caller.
    pub fn solver_with(&self, kind: SolverKind, omega: OmegaChoice) -> LinearSolver {
        LinearSolver::new(kind, omega, self.tol, self.max_it).with_circulant(self.circulant)
    }

    /// The configured shift, or an error for a sweep.
    pub fn single_omega(&self, seed: u64) -> Result<OmegaChoice, CliError> {
        match self.omega {
            OmegaConfig::Fixed(w) => Ok(OmegaChoice::Fixed(w)),
            OmegaConfig::Auto => Ok(OmegaChoice::Auto(ExtentMethod::Power { tol: 1e-6, max_iters: 200_000, seed })),
            OmegaConfig::Sweep(_) => Err(config_error("omega", "a sweep is only valid for `sweep-omega` and `bench`")),
        }
    }

    pub fn output_name<'a>(&'a self, kind: &str, default: &'a str) -> &'a str {
        self.outputs.get(kind).map_or(default, String::as_str)
    }
}
