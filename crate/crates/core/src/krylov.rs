//! Full (unrestarted) GMRES, preconditioned CG and Arnoldi Ritz values.

use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, invalid, Error, Result};
use crate::scalar::{axpy, dot, norm2, Real};

/// A square linear map `y = A x`.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()>;
}

/// Approximate inverse application `z = M^{-1} r`.
pub trait Preconditioner<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()>;
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

pub fn operator<T, F>(dim: usize, f: F) -> FnOperator<F>
where
    F: Fn(&[T], &mut [T]) -> Result<()>,
{
    FnOperator { dim, f }
}

impl<T, F> LinearOperator<T> for FnOperator<F>
where
    F: Fn(&[T], &mut [T]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        (self.f)(x, y)
    }
}

impl<T, F> Preconditioner<T> for FnOperator<F>
where
    F: Fn(&[T], &mut [T]) -> Result<()>,
{
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        (self.f)(r, z)
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual `||b - A x|| / ||b||` of the returned iterate.
    pub final_relres: T,
    /// Relative residual estimate per iteration, starting with iteration 0.
    pub residual_history: Vec<T>,
    pub wall_time: Duration,
    /// `max |V^T V - I|` over the Arnoldi basis, when tracking is enabled.
    pub orthogonality_loss: Option<T>,
}

#[derive(Clone, Debug)]
pub struct GmresOptions<T> {
    pub tol: T,
    pub max_it: usize,
    /// A second Gram-Schmidt pass runs when any projection left after the
    /// first pass exceeds this (relative to the new vector's norm).
    pub reorth_threshold: T,
    /// Extra iterations allowed once the estimate is below `tol` while the
    /// true residual is not.
    pub stagnation_window: usize,
    pub track_orthogonality: bool,
}

impl<T: Real> GmresOptions<T> {
    pub fn new(tol: T, max_it: usize) -> Self {
        Self { tol, max_it, reorth_threshold: T::lit(1e-10), stagnation_window: 20, track_orthogonality: false }
    }
}

impl<T: Real> Default for GmresOptions<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-6), 3000)
    }
}

fn givens<T: Real>(a: T, b: T) -> (T, T, T) {
    if b == T::zero() {
        (T::one(), T::zero(), a)
    } else {
        let r = a.hypot(b);
        (a / r, b / r, r)
    }
}

/// Right-preconditioned full GMRES for `A x = b` from a zero initial guess.
///
/// Solves `A M^{-1} w = b` and returns `x = M^{-1} w`. Convergence is decided
/// on the true residual `||b - A x|| / ||b||`. Hitting `max_it` is reported
/// through [`SolveReport::converged`], not as an error.
pub fn gmres<T: Real>(
    a: &dyn LinearOperator<T>,
    precond: Option<&dyn Preconditioner<T>>,
    b: &[T],
    opts: &GmresOptions<T>,
) -> Result<(Vec<T>, SolveReport<T>)> {
    let start = Instant::now();
    let n = a.dim();
    check_len(n, b.len())?;
    if !(opts.tol > T::zero()) {
        return Err(invalid("tol", format!("{} must be positive", opts.tol)));
    }
    let bnorm = norm2(b);
    let mut report = SolveReport {
        iterations: 0,
        converged: true,
        final_relres: T::zero(),
        residual_history: vec![T::zero()],
        wall_time: Duration::ZERO,
        orthogonality_loss: None,
    };
    if bnorm == T::zero() {
        report.wall_time = start.elapsed();
        return Ok((vec![T::zero(); n], report));
    }
    report.residual_history[0] = T::one();

    let apply_precond = |v: &[T], out: &mut [T]| -> Result<()> {
        match precond {
            Some(p) => p.apply(v, out).map_err(|e| Error::Preconditioner(Box::new(e))),
            None => {
                out.copy_from_slice(v);
                Ok(())
            }
        }
    };

    let mut basis: Vec<Vec<T>> = vec![b.iter().map(|&v| v / bnorm).collect()];
    // columns of the rotated (upper triangular) Hessenberg matrix
    let mut rcols: Vec<Vec<T>> = Vec::new();
    let mut cs: Vec<T> = Vec::new();
    let mut sn: Vec<T> = Vec::new();
    let mut g: Vec<T> = vec![bnorm];
    let mut z = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut proj = Vec::new();
    let mut stalled_checks = 0usize;
    let mut best: Option<(Vec<T>, T, usize)> = None;

    for j in 0..opts.max_it {
        apply_precond(&basis[j], &mut z)?;
        a.apply(&z, &mut w)?;
        let wnorm0 = norm2(&w);

        let mut h = vec![T::zero(); j + 2];
        for (i, v) in basis.iter().enumerate() {
            let c = dot(&w, v);
            h[i] = c;
            axpy(-c, v, &mut w);
        }
        let mut wnorm = norm2(&w);
        if wnorm > T::zero() {
            proj.clear();
            proj.extend(basis.iter().map(|v| dot(&w, v)));
            let worst = proj.iter().fold(T::zero(), |m, &c| m.max(c.abs())) / wnorm;
            if worst > opts.reorth_threshold {
                for (i, v) in basis.iter().enumerate() {
                    h[i] = h[i] + proj[i];
                    axpy(-proj[i], v, &mut w);
                }
                wnorm = norm2(&w);
            }
        }
        h[j + 1] = wnorm;

        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let (c, s, r) = givens(h[j], h[j + 1]);
        cs.push(c);
        sn.push(s);
        h[j] = r;
        h.truncate(j + 1);
        rcols.push(h);
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);

        let estimate = g[j + 1].abs() / bnorm;
        report.residual_history.push(estimate);
        report.iterations = j + 1;

        let breakdown = wnorm <= T::epsilon() * wnorm0.max(T::min_positive_value());
        if !breakdown {
            basis.push(w.iter().map(|&v| v / wnorm).collect());
        }
        let last = j + 1 == opts.max_it;
        if estimate <= opts.tol || breakdown || last {
            let x = assemble_solution(&basis, &rcols, &g, j + 1, &apply_precond)?;
            let mut ax = vec![T::zero(); n];
            a.apply(&x, &mut ax)?;
            let relres = norm2(&ax.iter().zip(b).map(|(&p, &q)| q - p).collect::<Vec<_>>()) / bnorm;
            let better = best.as_ref().map_or(true, |(_, r, _)| relres < *r);
            if better {
                best = Some((x, relres, j + 1));
            }
            let done = relres <= opts.tol || breakdown || last;
            if !done && estimate <= opts.tol {
                stalled_checks += 1;
            }
            if done || stalled_checks > opts.stagnation_window {
                let (x, relres, _) = best.expect("at least one candidate");
                report.final_relres = relres;
                report.converged = relres <= opts.tol;
                if opts.track_orthogonality {
                    report.orthogonality_loss = Some(orthogonality_loss(&basis));
                }
                report.wall_time = start.elapsed();
                return Ok((x, report));
            }
        }
    }
    // max_it == 0
    report.converged = false;
    report.final_relres = T::one();
    report.wall_time = start.elapsed();
    Ok((vec![T::zero(); n], report))
}

fn assemble_solution<T: Real>(
    basis: &[Vec<T>],
    rcols: &[Vec<T>],
    g: &[T],
    k: usize,
    apply_precond: &dyn Fn(&[T], &mut [T]) -> Result<()>,
) -> Result<Vec<T>> {
    // back substitution on the k x k triangle
    let mut y = g[..k].to_vec();
    for i in (0..k).rev() {
        let mut s = y[i];
        for (jj, yj) in y.iter().enumerate().take(k).skip(i + 1) {
            s = s - rcols[jj][i] * *yj;
        }
        y[i] = s / rcols[i][i];
    }
    let n = basis[0].len();
    let mut v = vec![T::zero(); n];
    for (yi, b) in y.iter().zip(basis) {
        axpy(*yi, b, &mut v);
    }
    let mut x = vec![T::zero(); n];
    apply_precond(&v, &mut x)?;
    Ok(x)
}

fn orthogonality_loss<T: Real>(basis: &[Vec<T>]) -> T {
    let mut worst = T::zero();
    for (i, vi) in basis.iter().enumerate() {
        for vj in &basis[i..] {
            let d = dot(vi, vj);
            let target = if std::ptr::eq(vi, vj) { T::one() } else { T::zero() };
            worst = worst.max((d - target).abs());
        }
    }
    worst
}

/// Outcome of a preconditioned CG solve.
#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relres: T,
}

/// Preconditioned conjugate gradients for SPD `A`; non-convergence within
/// `max_it` is an [`Error::InnerSolve`].
pub fn pcg<T: Real>(
    a: &dyn LinearOperator<T>,
    precond: &dyn Preconditioner<T>,
    b: &[T],
    tol: T,
    max_it: usize,
) -> Result<CgOutcome<T>> {
    let n = a.dim();
    check_len(n, b.len())?;
    let bnorm = norm2(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(CgOutcome { x, iterations: 0, relres: T::zero() });
    }
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    precond.apply(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![T::zero(); n];
    let mut relres = T::one();
    for it in 1..=max_it {
        a.apply(&p, &mut q)?;
        let pq = dot(&p, &q);
        if !(pq > T::zero()) {
            return Err(Error::InnerSolve { iterations: it, relres: relres.as_f64() });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        relres = norm2(&r) / bnorm;
        if relres <= tol {
            return Ok(CgOutcome { x, iterations: it, relres });
        }
        precond.apply(&r, &mut z)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::InnerSolve { iterations: max_it, relres: relres.as_f64() })
}

/// Ritz values from `m` Arnoldi steps started at a seeded random unit vector.
///
/// Breakdown before `m` steps returns the Ritz values of the invariant
/// subspace found so far.
pub fn arnoldi_ritz<T: Real>(a: &dyn LinearOperator<T>, m: usize, seed: u64) -> Result<Vec<Complex<f64>>> {
    let n = a.dim();
    if m == 0 || m > n {
        return Err(invalid("m", format!("{m} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let nv = norm2(&v0);
    v0.iter_mut().for_each(|v| *v = *v / nv);
    let mut basis = vec![v0];
    let mut hess = nalgebra::DMatrix::<f64>::zeros(m + 1, m);
    let mut steps = 0;
    let mut w = vec![T::zero(); n];
    for j in 0..m {
        a.apply(&basis[j], &mut w)?;
        let wnorm0 = norm2(&w);
        // two full Gram-Schmidt passes keep the basis orthonormal
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                hess[(i, j)] += c.as_f64();
                axpy(-c, v, &mut w);
            }
        }
        let wnorm = norm2(&w);
        steps = j + 1;
        hess[(j + 1, j)] = wnorm.as_f64();
        if wnorm <= T::lit(1e-12) * wnorm0.max(T::min_positive_value()) {
            break;
        }
        if j + 1 < m {
            basis.push(w.iter().map(|&v| v / wnorm).collect());
        }
    }
    let square = hess.view((0, 0), (steps, steps)).into_owned();
    crate::dense::general_eigenvalues(square)
}
