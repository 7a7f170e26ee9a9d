//! Factored preconditioners induced by the normal / anti-symmetric splitting
//! `R = 𝒯 + 𝒟` with `𝒯 = [[I, T], [-T, I]]` and `𝒟 = [[0, -D], [D, 0]]`.
//!
//! Both are applied in unscaled form `F = (ωI + 𝒯)(ωI + 𝒟)`; the analysis
//! preconditioner `F_ω = F / (2ω)` differs only by a scalar, see [`Scaled`].
//!
//! Solving `(ωI + 𝒯) y = r` uses the block factorization
//!
//! ```text
//! [[ω̂I, T], [-T, ω̂I]] = [[I, 0], [-T/ω̂, I]] [[ω̂I, T], [0, ω̂I + T²/ω̂]]
//! ```
//!
//! with `ω̂ = ω + 1`. [`NassPrecond`] keeps `T` and solves the Schur complement
//! by circulant-preconditioned CG; [`CnasPrecond`] replaces `T` by a circulant
//! `C = F* Λ F` so the whole first factor is diagonal in Fourier space.

use num_complex::Complex;

use crate::blocksys::DiagonalNonneg;
use crate::error::{check_len, invalid, Result};
use crate::fracdiff;
use crate::krylov::{operator, pcg, LinearOperator, Preconditioner};
use crate::scalar::Real;
use crate::structured::{variant_circulant, CirculantKind, CirculantSym, ToeplitzSym};

fn check_omega<T: Real>(omega: T) -> Result<()> {
    if omega > T::zero() && omega.is_finite() {
        Ok(())
    } else {
        Err(invalid("omega", format!("{omega} must be positive")))
    }
}

/// Solves `(ωI + [[0, -D], [D, 0]]) x = y` in place, one 2x2 system per index.
pub(crate) fn diagonal_part_solve<T: Real>(d: &[T], omega: T, x1: &mut [T], x2: &mut [T]) {
    for ((&dj, a), b) in d.iter().zip(x1.iter_mut()).zip(x2.iter_mut()) {
        let l21 = dj / omega;
        let u22 = omega + dj * l21;
        *b = (*b - l21 * *a) / u22;
        *a = (*a + dj * *b) / omega;
    }
}

/// Solver for `[[ω̂I, T], [-T, ω̂I]] (x1; x2) = (g1; g2)` with the Schur
/// complement `ω̂I + T²/ω̂` handled by CG preconditioned with `ω̂I + C²/ω̂`.
#[derive(Clone, Debug)]
pub struct ShiftedNormalSolver<T: Real> {
    t: ToeplitzSym<T>,
    circulant: CirculantSym<T>,
    omega_hat: T,
    max_it: usize,
}

impl<T: Real> ShiftedNormalSolver<T> {
    pub fn new(t: ToeplitzSym<T>, circulant: CirculantSym<T>, omega_hat: T, max_it: usize) -> Result<Self> {
        check_omega(omega_hat)?;
        check_len(t.dim(), circulant.dim())?;
        Ok(Self { t, circulant, omega_hat, max_it })
    }

    pub fn toeplitz(&self) -> &ToeplitzSym<T> {
        &self.t
    }

    pub fn circulant(&self) -> &CirculantSym<T> {
        &self.circulant
    }

    pub fn omega_hat(&self) -> T {
        self.omega_hat
    }

    /// Returns `(x1, x2, cg_iterations)`.
    pub fn solve(&self, g1: &[T], g2: &[T], tol: T) -> Result<(Vec<T>, Vec<T>, usize)> {
        let m = self.t.dim();
        check_len(m, g1.len())?;
        check_len(m, g2.len())?;
        let wh = self.omega_hat;
        let tg1 = self.t.matvec(g1)?;
        let rhs: Vec<T> = g2.iter().zip(&tg1).map(|(&a, &b)| a + b / wh).collect();

        let t = &self.t;
        let schur = operator(m, |x: &[T], y: &mut [T]| {
            let tt = t.matvec(&t.matvec(x)?)?;
            for ((yi, &xi), &ti) in y.iter_mut().zip(x).zip(&tt) {
                *yi = wh * xi + ti / wh;
            }
            Ok(())
        });
        let circ = &self.circulant;
        let cprec = operator(m, |r: &[T], z: &mut [T]| {
            let v = circ.apply_spectral(r, |l| (wh + l * l / wh).recip())?;
            z.copy_from_slice(&v);
            Ok(())
        });
        let out = pcg(&schur as &dyn LinearOperator<T>, &cprec as &dyn Preconditioner<T>, &rhs, tol, self.max_it)?;
        let x2 = out.x;
        let tx2 = self.t.matvec(&x2)?;
        let x1 = g1.iter().zip(&tx2).map(|(&a, &b)| (a - b) / wh).collect();
        Ok((x1, x2, out.iterations))
    }
}

/// Circulant-based preconditioner `F_CNAS = (ωI + 𝒞)(ωI + 𝒟)`.
#[derive(Clone, Debug)]
pub struct CnasPrecond<T: Real> {
    omega: T,
    omega_hat: T,
    circulant: CirculantSym<T>,
    d: DiagonalNonneg<T>,
}

/// Precomputes the circulant and the diagonal factors; `O(M log M)`.
pub fn build_cnas<T: Real>(
    t: &ToeplitzSym<T>,
    d: &DiagonalNonneg<T>,
    omega: T,
    kind: CirculantKind,
) -> Result<CnasPrecond<T>> {
    CnasPrecond::from_circulant(variant_circulant(t, kind)?, d.clone(), omega)
}

impl<T: Real> CnasPrecond<T> {
    pub fn from_circulant(circulant: CirculantSym<T>, d: DiagonalNonneg<T>, omega: T) -> Result<Self> {
        check_omega(omega)?;
        check_len(circulant.dim(), d.len())?;
        Ok(Self { omega, omega_hat: omega + T::one(), circulant, d })
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn omega_hat(&self) -> T {
        self.omega_hat
    }

    /// `Λ`, the DFT eigenvalues of `C`.
    pub fn lambda(&self) -> &[T] {
        self.circulant.eigs()
    }

    pub fn circulant(&self) -> &CirculantSym<T> {
        &self.circulant
    }

    pub fn diagonal(&self) -> &DiagonalNonneg<T> {
        &self.d
    }

    /// `L21 = D/ω`.
    pub fn l21(&self) -> Vec<T> {
        self.d.as_slice().iter().map(|&v| v / self.omega).collect()
    }

    /// `U22 = ω + d²/ω`.
    pub fn u22(&self) -> Vec<T> {
        self.d.as_slice().iter().map(|&v| self.omega + v * v / self.omega).collect()
    }

    /// `L̃21 = -Λ/ω̂`.
    pub fn lt21(&self) -> Vec<T> {
        self.lambda().iter().map(|&l| -l / self.omega_hat).collect()
    }

    /// `Ũ22 = ω̂ + Λ²/ω̂`.
    pub fn ut22(&self) -> Vec<T> {
        self.lambda().iter().map(|&l| self.omega_hat + l * l / self.omega_hat).collect()
    }

    /// Solves `F_CNAS x = r`.
    pub fn apply_cnas(&self, r: &[T]) -> Result<Vec<T>> {
        let mut x = vec![T::zero(); r.len()];
        self.apply_into(r, &mut x)?;
        Ok(x)
    }

    fn apply_into(&self, r: &[T], x: &mut [T]) -> Result<()> {
        let m = self.d.len();
        check_len(2 * m, r.len())?;
        check_len(2 * m, x.len())?;
        let (r1, r2) = r.split_at(m);
        // r1 and r2 share one transform: z = r1 + i r2, and the real inputs
        // are recovered from the Hermitian parts of its spectrum.
        let mut z: Vec<Complex<T>> = r1.iter().zip(r2).map(|(&a, &b)| Complex::new(a, b)).collect();
        let transform = self.circulant.transform();
        transform.forward(&mut z);
        let half = T::lit(0.5);
        let mut w = vec![Complex::default(); m];
        let wh = self.omega_hat;
        for (k, (wk, &l)) in w.iter_mut().zip(self.lambda()).enumerate() {
            let zc = z[(m - k) % m].conj();
            let a = (z[k] + zc) * half;
            let b = (z[k] - zc) * Complex::new(T::zero(), -half);
            let x2 = (b + a * (l / wh)) / (wh + l * l / wh);
            let x1 = (a - x2 * l) / wh;
            *wk = x1 + x2 * Complex::new(T::zero(), T::one());
        }
        transform.inverse(&mut w);
        let scale = T::from_count(m).recip();
        let (x1, x2) = x.split_at_mut(m);
        for ((a, b), wk) in x1.iter_mut().zip(x2.iter_mut()).zip(&w) {
            *a = wk.re * scale;
            *b = wk.im * scale;
        }
        diagonal_part_solve(self.d.as_slice(), self.omega, x1, x2);
        Ok(())
    }
}

impl<T: Real> Preconditioner<T> for CnasPrecond<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        self.apply_into(r, z)
    }
}

/// Inner CG settings for [`NassPrecond`].
#[derive(Clone, Copy, Debug)]
pub struct InnerCg<T> {
    pub tol: T,
    pub max_it: usize,
    pub circulant: CirculantKind,
}

impl<T: Real> Default for InnerCg<T> {
    fn default() -> Self {
        Self { tol: T::lit(1e-13), max_it: 500, circulant: CirculantKind::Strang }
    }
}

/// Toeplitz-based preconditioner `F_NASS = (ωI + 𝒯)(ωI + 𝒟)`.
#[derive(Clone, Debug)]
pub struct NassPrecond<T: Real> {
    omega: T,
    inner: ShiftedNormalSolver<T>,
    tol: T,
    d: DiagonalNonneg<T>,
}

pub fn build_nass<T: Real>(
    t: &ToeplitzSym<T>,
    d: &DiagonalNonneg<T>,
    omega: T,
    cg: InnerCg<T>,
) -> Result<NassPrecond<T>> {
    check_omega(omega)?;
    check_len(t.dim(), d.len())?;
    let circ = variant_circulant(t, cg.circulant)?;
    let inner = ShiftedNormalSolver::new(t.clone(), circ, omega + T::one(), cg.max_it)?;
    Ok(NassPrecond { omega, inner, tol: cg.tol, d: d.clone() })
}

impl<T: Real> NassPrecond<T> {
    pub fn omega(&self) -> T {
        self.omega
    }

    /// Solves `F_NASS x = r`.
    pub fn apply_nass(&self, r: &[T]) -> Result<Vec<T>> {
        let m = self.d.len();
        check_len(2 * m, r.len())?;
        let (x1, x2, _) = self.inner.solve(&r[..m], &r[m..], self.tol)?;
        let mut x = x1;
        let mut x2 = x2;
        diagonal_part_solve(self.d.as_slice(), self.omega, &mut x, &mut x2);
        x.extend_from_slice(&x2);
        Ok(x)
    }
}

impl<T: Real> Preconditioner<T> for NassPrecond<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        let x = self.apply_nass(r)?;
        check_len(x.len(), z.len())?;
        z.copy_from_slice(&x);
        Ok(())
    }
}

/// `factor * P^{-1}`; with `factor = 2ω` this applies the inverse of the
/// scaled preconditioner `F / (2ω)`.
pub struct Scaled<'a, T> {
    pub inner: &'a dyn Preconditioner<T>,
    pub factor: T,
}

impl<T: Real> Preconditioner<T> for Scaled<'_, T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        self.inner.apply(r, z)?;
        z.iter_mut().for_each(|v| *v = *v * self.factor);
        Ok(())
    }
}

/// Outlier budget for the CNAS-preconditioned spectrum relative to the
/// NASS-preconditioned one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterBound {
    pub epsilon: f64,
    pub k0: usize,
    /// Upper bound on `||Q_ω||_2`, the small-norm part of the perturbation.
    pub q_norm: f64,
    /// Rank of the low-rank part, `4 k0`.
    pub rank: usize,
}

/// Evaluates the clustering bound for the scaled preconditioners on the grid
/// `(alpha, gamma, tau, length, m)`, with `nu = max d_j` and `epsilon`
/// defaulting to `μθ₀`. `epsilon` must satisfy `2^α μθ₀/(M-2)^α < ε <= μθ₀`.
#[allow(clippy::too_many_arguments)]
pub fn cnas_cluster_bound(
    alpha: f64,
    gamma_coef: f64,
    tau: f64,
    length: f64,
    m: usize,
    omega: f64,
    nu: f64,
    epsilon: Option<f64>,
) -> Result<ClusterBound> {
    check_omega(omega)?;
    if m < 8 || m % 2 != 0 {
        return Err(invalid("M", format!("{m} must be even and at least 8")));
    }
    if !(nu >= 0.0) {
        return Err(invalid("nu", format!("{nu} must be nonnegative")));
    }
    let h = length / (m as f64 + 1.0);
    let mu = gamma_coef * tau / h.powf(alpha);
    let top = mu * fracdiff::theta0(alpha);
    let eps = epsilon.unwrap_or(top);
    let floor = 2f64.powf(alpha) * top / (m as f64 - 2.0).powf(alpha);
    if !(eps > floor && eps <= top) {
        return Err(invalid("epsilon", format!("{eps} is outside ({floor}, {top}]")));
    }
    let k0 = (top / eps).powf(1.0 / alpha).ceil() as usize + 1;
    let shift = 2f64.powf(alpha + 1.0) * gamma_coef * tau * fracdiff::theta(alpha) / length.powf(alpha);
    let q_norm = 2.0 * (omega * omega + nu * nu) * (m as f64).sqrt() * eps
        / (omega * omega * ((omega + 1.0).powi(2) + shift * shift).sqrt());
    Ok(ClusterBound { epsilon: eps, k0, q_norm, rank: 4 * k0 })
}

/// Number of entries of `perturbed` farther than `delta` from every entry of
/// `reference`.
pub fn count_outliers(perturbed: &[Complex<f64>], reference: &[Complex<f64>], delta: f64) -> usize {
    perturbed
        .iter()
        .filter(|z| reference.iter().all(|w| (*z - *w).norm() > delta))
        .count()
}
