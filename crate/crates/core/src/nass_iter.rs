//! The NASS stationary iteration
//!
//! ```text
//! (ωI + 𝒯) x^{k+1/2} = (ωI - 𝒟) x^k       + f
//! (ωI + 𝒟) x^{k+1}   = (ωI - 𝒯) x^{k+1/2} + f
//! ```
//!
//! its contraction bound `σ(ω)`, the quasi-optimal shift `ω* = sqrt(λ_max² + 1)`
//! and extreme-eigenvalue estimates for `T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocksys::{BlockSystem, DiagonalNonneg};
use crate::error::{check_len, invalid, Error, Result};
use crate::fracdiff;
use crate::precond::{diagonal_part_solve, ShiftedNormalSolver};
use crate::scalar::{dot, norm2, Real};
use crate::structured::{variant_circulant, CirculantKind, ToeplitzSym};

#[derive(Clone, Copy, Debug)]
pub struct NassParams<T> {
    pub omega: T,
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Real> NassParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > T::zero()) || !self.omega.is_finite() {
            return Err(invalid("omega", format!("{} must be positive", self.omega)));
        }
        if !(self.tol > T::zero()) {
            return Err(invalid("tol", format!("{} must be positive", self.tol)));
        }
        Ok(())
    }
}

/// Settings for the CG solve inside the first half-step.
#[derive(Clone, Copy, Debug)]
pub struct InnerSolveConfig<T> {
    pub circulant: CirculantKind,
    pub max_it: usize,
    /// Fixed inner tolerance; `None` derives it from the outer tolerance.
    pub tol: Option<T>,
}

impl<T: Real> Default for InnerSolveConfig<T> {
    fn default() -> Self {
        Self { circulant: CirculantKind::Strang, max_it: 500, tol: None }
    }
}

impl<T: Real> InnerSolveConfig<T> {
    /// `1e-2 * outer`, floored at `1e-14` (or a few ulps for `f32`).
    pub fn tolerance_for(&self, outer: T) -> T {
        self.tol.unwrap_or_else(|| {
            let floor = T::lit(1e-14).max(T::lit(50.0) * T::epsilon());
            (T::lit(1e-2) * outer).max(floor)
        })
    }
}

#[derive(Clone, Debug)]
pub struct NassReport<T> {
    pub iterations: usize,
    pub converged: bool,
    /// Relative block residual per iterate, starting with `x0`.
    pub residual_history: Vec<T>,
    pub inner_iterations: usize,
}

/// One-sweep map `x -> x'` of the iteration for a fixed `(T, D, ω)`.
#[derive(Clone, Debug)]
pub struct NassIteration<T: Real> {
    omega: T,
    shifted: ShiftedNormalSolver<T>,
    d: DiagonalNonneg<T>,
}

impl<T: Real> NassIteration<T> {
    pub fn new(t: &ToeplitzSym<T>, d: &DiagonalNonneg<T>, omega: T, inner: &InnerSolveConfig<T>) -> Result<Self> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(invalid("omega", format!("{omega} must be positive")));
        }
        check_len(t.dim(), d.len())?;
        let circ = variant_circulant(t, inner.circulant)?;
        let shifted = ShiftedNormalSolver::new(t.clone(), circ, omega + T::one(), inner.max_it)?;
        Ok(Self { omega, shifted, d: d.clone() })
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    /// Both half-steps; `f = None` gives the error propagation map `L_ω`.
    /// Returns the new iterate and the CG iterations spent.
    pub fn sweep(&self, x: &[T], f: Option<&[T]>, inner_tol: T) -> Result<(Vec<T>, usize)> {
        let m = self.d.len();
        check_len(2 * m, x.len())?;
        let w = self.omega;
        let d = self.d.as_slice();
        let (x1, x2) = x.split_at(m);
        let fv = |i: usize| f.map_or(T::zero(), |f| f[i]);

        let g1: Vec<T> = (0..m).map(|j| w * x1[j] + d[j] * x2[j] + fv(j)).collect();
        let g2: Vec<T> = (0..m).map(|j| w * x2[j] - d[j] * x1[j] + fv(m + j)).collect();
        let (y1, y2, cg) = self.shifted.solve(&g1, &g2, inner_tol)?;

        let mut ty1 = vec![T::zero(); m];
        let mut ty2 = vec![T::zero(); m];
        self.shifted.toeplitz().matvec_pair_into(&y1, &y2, &mut ty1, &mut ty2)?;
        let wm1 = w - T::one();
        let mut h1: Vec<T> = (0..m).map(|j| wm1 * y1[j] - ty2[j] + fv(j)).collect();
        let mut h2: Vec<T> = (0..m).map(|j| ty1[j] + wm1 * y2[j] + fv(m + j)).collect();
        diagonal_part_solve(d, w, &mut h1, &mut h2);
        h1.extend_from_slice(&h2);
        Ok((h1, cg))
    }

    /// `||(ωI + 𝒟) e||`.
    pub fn d_norm(&self, e: &[T]) -> T {
        d_norm(self.omega, self.d.as_slice(), e)
    }
}

/// `||(ωI + [[0, -D], [D, 0]]) e||`.
pub fn d_norm<T: Real>(omega: T, d: &[T], e: &[T]) -> T {
    let m = d.len();
    let (e1, e2) = e.split_at(m);
    let mut s = T::zero();
    for j in 0..m {
        let a = omega * e1[j] - d[j] * e2[j];
        let b = d[j] * e1[j] + omega * e2[j];
        s = s + a * a + b * b;
    }
    s.sqrt()
}

/// Runs the iteration from `x0` until the true relative residual
/// `||f - R x|| / ||f||` drops to `params.tol` or `params.max_iters` sweeps.
///
/// Running out of sweeps is reported in [`NassReport::converged`]; a failed
/// inner CG solve is an [`Error::InnerSolve`].
pub fn nass_solve<T: Real>(
    sys: &BlockSystem<T>,
    inner: &InnerSolveConfig<T>,
    params: &NassParams<T>,
    x0: &[T],
) -> Result<(Vec<T>, NassReport<T>)> {
    params.validate()?;
    check_len(sys.dim(), x0.len())?;
    let it = NassIteration::new(sys.toeplitz(), sys.diagonal(), params.omega, inner)?;
    let inner_tol = inner.tolerance_for(params.tol);
    let mut x = x0.to_vec();
    let mut res = sys.relative_residual(&x)?;
    let mut report = NassReport { iterations: 0, converged: res <= params.tol, residual_history: vec![res], inner_iterations: 0 };
    while !report.converged && report.iterations < params.max_iters {
        let (next, cg) = it.sweep(&x, Some(sys.rhs()), inner_tol)?;
        x = next;
        report.inner_iterations += cg;
        report.iterations += 1;
        res = sys.relative_residual(&x)?;
        report.residual_history.push(res);
        report.converged = res <= params.tol;
    }
    Ok((x, report))
}

fn check_eig<T: Real>(l: T) -> Result<()> {
    if l > T::zero() && l.is_finite() {
        Ok(())
    } else {
        Err(invalid("eigenvalue", format!("{l} must be positive")))
    }
}

/// `σ(ω) = max_i sqrt(((ω-1)² + λ_i²) / ((ω+1)² + λ_i²))`, always below 1.
pub fn sigma_bound<T: Real>(omega: T, eigs: &[T]) -> Result<T> {
    if !(omega > T::zero()) {
        return Err(invalid("omega", format!("{omega} must be positive")));
    }
    if eigs.is_empty() {
        return Err(invalid("eigs", "empty eigenvalue list"));
    }
    let mut worst = T::zero();
    for &l in eigs {
        check_eig(l)?;
        let a = omega - T::one();
        let b = omega + T::one();
        worst = worst.max(((a * a + l * l) / (b * b + l * l)).sqrt());
    }
    Ok(worst)
}

/// `ω* = sqrt(λ_max² + 1)`, minimizing `σ̂(ω)` over `[λ_min, λ_max]`.
pub fn optimal_omega<T: Real>(lambda_max: T) -> Result<T> {
    check_eig(lambda_max)?;
    Ok((lambda_max * lambda_max + T::one()).sqrt())
}

/// `σ̂(ω*) = λ_max / (1 + sqrt(λ_max² + 1))`.
pub fn sigma_at_optimal<T: Real>(lambda_max: T) -> Result<T> {
    Ok(lambda_max / (T::one() + optimal_omega(lambda_max)?))
}

/// How [`lambda_extents`] estimates the extreme eigenvalues of `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtentMethod {
    /// Power iteration on `T` and on `sI - T`.
    Power { tol: f64, max_iters: usize, seed: u64 },
    /// Dense symmetric eigensolve.
    Dense,
    /// Gershgorin disks; `lower_fallback` replaces a nonpositive lower bound.
    GershgorinBound { lower_fallback: Option<f64> },
}

impl ExtentMethod {
    pub fn power() -> Self {
        ExtentMethod::Power { tol: 1e-6, max_iters: 200_000, seed: 0 }
    }
}

/// Lower eigenvalue bound `2γτθ/(b-a)^α` usable as a Gershgorin fallback.
pub fn lemma_lower_bound(alpha: f64, gamma_coef: f64, tau: f64, length: f64, m: usize) -> Result<f64> {
    Ok(fracdiff::eigenvalue_bounds(alpha, gamma_coef, tau, length, m)?.toeplitz.0)
}

/// `(λ_min, λ_max)` of a symmetric positive definite Toeplitz matrix.
pub fn lambda_extents<T: Real>(t: &ToeplitzSym<T>, method: ExtentMethod) -> Result<(T, T)> {
    match method {
        ExtentMethod::Dense => {
            let e = crate::dense::symmetric_eigenvalues(crate::dense::toeplitz_matrix(t));
            Ok((T::lit(e[0]), T::lit(e[e.len() - 1])))
        }
        ExtentMethod::GershgorinBound { lower_fallback } => {
            let col = t.first_col();
            let off: T = col[1..].iter().map(|c| c.abs()).sum::<T>();
            let hi = col[0] + off + off;
            let mut lo = col[0] - off - off;
            if !(lo > T::zero()) {
                lo = match lower_fallback {
                    Some(v) if v > 0.0 => T::lit(v),
                    _ => return Err(invalid("T", "Gershgorin lower bound is not positive and no fallback given")),
                };
            }
            Ok((lo, hi))
        }
        ExtentMethod::Power { tol, max_iters, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start: Vec<T> = (0..t.dim()).map(|_| T::lit(rng.gen_range(0.5..1.5))).collect();
            let tol = T::lit(tol);
            let hi = rayleigh_power(|x| t.matvec(x), &start, None, tol, max_iters)?;
            // shift just past λ_max so sI - T is positive semidefinite
            let s = hi * T::lit(1.0 + 1e-3);
            let start: Vec<T> = (0..t.dim()).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
            let lo = rayleigh_power(|x| t.matvec(x), &start, Some(s), tol, max_iters)?;
            Ok((lo, hi))
        }
    }
}

/// `λ_max` alone; the power method skips the slower `λ_min` phase.
pub fn lambda_max<T: Real>(t: &ToeplitzSym<T>, method: ExtentMethod) -> Result<T> {
    match method {
        ExtentMethod::Power { tol, max_iters, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start: Vec<T> = (0..t.dim()).map(|_| T::lit(rng.gen_range(0.5..1.5))).collect();
            rayleigh_power(|x| t.matvec(x), &start, None, T::lit(tol), max_iters)
        }
        _ => Ok(lambda_extents(t, method)?.1),
    }
}

/// Power iteration with Rayleigh quotients on `A` (or `sI - A` when `shift`
/// is given, returning `s - ν`). The stopping test extrapolates the remaining
/// error from the observed linear rate.
fn rayleigh_power<T: Real>(
    apply: impl Fn(&[T]) -> Result<Vec<T>>,
    start: &[T],
    shift: Option<T>,
    tol: T,
    max_iters: usize,
) -> Result<T> {
    let mut x = start.to_vec();
    let n0 = norm2(&x);
    x.iter_mut().for_each(|v| *v = *v / n0);
    let mut prev: Option<T> = None;
    let mut prev_delta: Option<T> = None;
    for it in 0..max_iters {
        let mut y = apply(&x)?;
        if let Some(s) = shift {
            for (yi, &xi) in y.iter_mut().zip(&x) {
                *yi = s * xi - *yi;
            }
        }
        let nu = dot(&x, &y);
        let value = shift.map_or(nu, |s| s - nu);
        if let Some(p) = prev {
            let delta = (value - p).abs();
            let scale = value.abs() * tol;
            if let Some(pd) = prev_delta {
                let q = if pd > T::zero() { (delta / pd).min(T::lit(0.999_999)) } else { T::zero() };
                let remaining = delta * q / (T::one() - q);
                if it > 5 && delta <= scale && remaining <= scale {
                    return Ok(value);
                }
            }
            prev_delta = Some(delta);
        }
        prev = Some(value);
        let ny = norm2(&y);
        if ny == T::zero() {
            return Ok(value);
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Err(Error::PowerStagnation { iterations: max_iters })
}

/// Estimates `ρ(L_ω)` by power iteration on `e -> L_ω e` in the `𝒟`-norm,
/// taking the largest rate over `restarts` random starts. Each rate is the
/// geometric mean of the last `window` norm ratios.
pub fn estimate_contraction<T: Real>(
    it: &NassIteration<T>,
    iters: usize,
    restarts: usize,
    seed: u64,
) -> Result<T> {
    if iters < 2 || restarts == 0 {
        return Err(invalid("iters", "need at least two sweeps and one restart"));
    }
    let n = 2 * it.d.len();
    let window = (iters / 2).clamp(1, 10);
    let tol = T::lit(1e-14).max(T::lit(50.0) * T::epsilon());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = T::zero();
    for _ in 0..restarts {
        let mut e: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let mut norms = vec![it.d_norm(&e)];
        for _ in 0..iters {
            let nrm = *norms.last().expect("nonempty");
            if nrm == T::zero() {
                break;
            }
            e.iter_mut().for_each(|v| *v = *v / nrm);
            let (next, _) = it.sweep(&e, None, tol)?;
            e = next;
            // ratio relative to a unit-norm predecessor
            norms.push(it.d_norm(&e));
        }
        let k = norms.len() - 1;
        let w = window.min(k);
        let log_sum: T = norms[k + 1 - w..].iter().map(|v| v.ln()).sum();
        best = best.max((log_sum / T::from_count(w)).exp());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracdiff::coefficients;

    #[test]
    fn sigma_trivial() {
        let s: f64 = sigma_bound(1.0, &[1.0]).unwrap();
        assert!((s - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!(sigma_bound(1.0, &[0.0]).is_err());
        assert!(sigma_bound::<f64>(1.0, &[]).is_err());
    }

    #[test]
    fn optimal_omega_values() {
        assert!((optimal_omega(3f64.sqrt()).unwrap() - 2.0).abs() < 1e-15);
        assert!((optimal_omega(1e-9f64).unwrap() - 1.0).abs() < 1e-15);
        assert!(optimal_omega(0.0f64).is_err());
        let l = 7.5f64;
        let w = optimal_omega(l).unwrap();
        let s = sigma_bound(w, &[0.01, 1.0, l]).unwrap();
        assert!((s - sigma_at_optimal(l).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_zero_iterations() {
        let t = ToeplitzSym::from_coeffs(&coefficients(1.5, 8).unwrap(), 8, 1.0).unwrap();
        let sys = BlockSystem::new(t, DiagonalNonneg::zeros(8), vec![0.0; 16]).unwrap();
        let p = NassParams { omega: 1.0, tol: 1e-8, max_iters: 10 };
        let (x, rep) = nass_solve(&sys, &InnerSolveConfig::default(), &p, &[0.0; 16]).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_contraction_factor() {
        // T = λI, D = 0: every error component shrinks by the same factor
        let (lam, omega) = (0.8f64, 1.7f64);
        let t = ToeplitzSym::from_first_col(vec![lam, 0.0, 0.0, 0.0]).unwrap();
        let it = NassIteration::new(&t, &DiagonalNonneg::zeros(4), omega, &InnerSolveConfig::default()).unwrap();
        let e: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let (next, _) = it.sweep(&e, None, 1e-14).unwrap();
        let factor = ((omega - 1.0).powi(2) + lam * lam).sqrt() / ((omega + 1.0).powi(2) + lam * lam).sqrt();
        assert!((norm2(&next) / norm2(&e) - factor).abs() < 1e-13);
    }

    #[test]
    fn extents_of_scaled_identity() {
        let t = ToeplitzSym::from_first_col(vec![2.5, 0.0, 0.0]).unwrap();
        for method in [ExtentMethod::Dense, ExtentMethod::power(), ExtentMethod::GershgorinBound { lower_fallback: None }] {
            let (lo, hi) = lambda_extents(&t, method).unwrap();
            assert!((lo - 2.5f64).abs() < 1e-12 && (hi - 2.5).abs() < 1e-12, "{method:?}");
        }
    }
}
