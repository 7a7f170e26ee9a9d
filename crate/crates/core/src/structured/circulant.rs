use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use super::fft::{to_complex, Transform};
use super::toeplitz::ToeplitzSym;
use crate::error::{check_len, invalid, Error, Result};
use crate::scalar::Real;

/// Real symmetric circulant matrix with its cached (real) spectrum.
#[derive(Clone, Debug)]
pub struct CirculantSym<T: Real> {
    first_col: Vec<T>,
    eigs: Vec<T>,
    transform: Transform<T>,
}

fn imag_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(1e3))
}

impl<T: Real> CirculantSym<T> {
    /// Builds the circulant and caches `Λ = F c`.
    pub fn from_first_col(first_col: Vec<T>) -> Result<Self> {
        let m = first_col.len();
        if m == 0 {
            return Err(invalid("M", "empty circulant"));
        }
        let scale = crate::scalar::norm2(&first_col).max(T::min_positive_value());
        let tol = imag_tolerance::<T>() * scale;
        for k in 1..m {
            let d = (first_col[k] - first_col[m - k]).abs();
            if d > tol {
                return Err(invalid("first_col", format!("not symmetric at k = {k}")));
            }
        }
        let transform = Transform::new(m);
        let mut buf = to_complex(&first_col);
        transform.forward(&mut buf);
        let residue = buf.iter().fold(T::zero(), |r, z| r.max(z.im.abs()));
        if residue > tol {
            return Err(Error::NonRealSpectrum { residue: residue.as_f64() });
        }
        let eigs = buf.into_iter().map(|z| z.re).collect();
        Ok(Self { first_col, eigs, transform })
    }

    /// Circulant with prescribed spectrum; `eigs[k]` must equal `eigs[M-k]`.
    pub fn from_eigenvalues(eigs: &[T]) -> Result<Self> {
        let m = eigs.len();
        if m == 0 {
            return Err(invalid("M", "empty circulant"));
        }
        let transform = Transform::<T>::new(m);
        let mut buf = to_complex(eigs);
        transform.inverse(&mut buf);
        let inv = T::from_count(m).recip();
        let col: Vec<T> = buf.iter().map(|z| z.re * inv).collect();
        let mut col_sym = col.clone();
        for k in 1..m {
            let avg = (col[k] + col[m - k]) * T::lit(0.5);
            col_sym[k] = avg;
        }
        Self::from_first_col(col_sym)
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[T] {
        &self.first_col
    }

    /// Eigenvalues in DFT order.
    pub fn eigs(&self) -> &[T] {
        &self.eigs
    }

    pub fn transform(&self) -> &Transform<T> {
        &self.transform
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        let m = self.dim();
        self.first_col[(i + m - j) % m]
    }

    /// Applies `g(C)` for a real spectral function `g`: `F^{-1} g(Λ) F x`.
    pub fn apply_spectral(&self, x: &[T], g: impl Fn(T) -> T) -> Result<Vec<T>> {
        check_len(self.dim(), x.len())?;
        let mut buf = to_complex(x);
        self.transform.forward(&mut buf);
        for (v, &l) in buf.iter_mut().zip(&self.eigs) {
            *v = *v * g(l);
        }
        self.transform.inverse(&mut buf);
        let inv = T::from_count(self.dim()).recip();
        Ok(buf.iter().map(|z| z.re * inv).collect())
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.apply_spectral(x, |l| l)
    }
}

/// Circulant approximations of a symmetric Toeplitz matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CirculantKind {
    Strang,
    TChan,
    RChan,
    ModifiedDirichlet,
    VonHann,
    Hamming,
    Superoptimal,
}

impl CirculantKind {
    pub const ALL: [CirculantKind; 7] = [
        CirculantKind::TChan,
        CirculantKind::Strang,
        CirculantKind::RChan,
        CirculantKind::ModifiedDirichlet,
        CirculantKind::VonHann,
        CirculantKind::Hamming,
        CirculantKind::Superoptimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CirculantKind::Strang => "strang",
            CirculantKind::TChan => "t-chan",
            CirculantKind::RChan => "r-chan",
            CirculantKind::ModifiedDirichlet => "modified-dirichlet",
            CirculantKind::VonHann => "von-hann",
            CirculantKind::Hamming => "hamming",
            CirculantKind::Superoptimal => "superoptimal",
        }
    }
}

impl fmt::Display for CirculantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CirculantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        CirculantKind::ALL
            .into_iter()
            .find(|k| k.name().replace('-', "") == key)
            .ok_or_else(|| invalid("circulant", format!("unknown circulant kind `{s}`")))
    }
}

/// Strang's circulant: copies the central diagonals, `ς_{M/2} = 0`.
pub fn strang_circulant<T: Real>(t: &ToeplitzSym<T>) -> Result<CirculantSym<T>> {
    let m = t.dim();
    if m % 2 != 0 {
        return Err(invalid("M", format!("Strang's circulant needs even M, got {m}")));
    }
    if m < 8 {
        log::warn!("Strang circulant with M = {m} < 8 is outside the analyzed eigenvalue bounds");
    }
    windowed(t, |k| if 2 * k < m { T::one() } else { T::zero() })
}

/// `ς_0 = t_0`, `ς_k = w(k) t_k + w(M-k) t_{M-k}` for `0 < k < M`.
fn windowed<T: Real>(t: &ToeplitzSym<T>, w: impl Fn(usize) -> T) -> Result<CirculantSym<T>> {
    let m = t.dim();
    let tc = t.first_col();
    let mut col = vec![T::zero(); m];
    col[0] = tc[0];
    for k in 1..m {
        col[k] = w(k) * tc[k] + w(m - k) * tc[m - k];
    }
    CirculantSym::from_first_col(col)
}

/// Sums of the diagonals `i - j = k`, `k = 0..M`, of `T^2`.
fn square_diagonal_sums<T: Real>(t: &ToeplitzSym<T>) -> Vec<T> {
    let m = t.dim() as isize;
    let tc = t.first_col();
    let at = |k: isize| tc[k.unsigned_abs()];
    (0..m)
        .map(|k| {
            let mut s = T::zero();
            for p in -(m - 1)..m {
                // number of j with 0 <= j <= m-1-k and 0 <= j+p <= m-1
                let lo = 0.max(-p);
                let hi = (m - 1 - k).min(m - 1 - p);
                if hi >= lo && (k - p).abs() < m {
                    s = s + T::from_count((hi - lo + 1) as usize) * at(k - p) * at(p);
                }
            }
            s
        })
        .collect()
}

/// Builds the named circulant approximation of `t`.
pub fn variant_circulant<T: Real>(t: &ToeplitzSym<T>, kind: CirculantKind) -> Result<CirculantSym<T>> {
    let m = t.dim();
    if kind == CirculantKind::Strang {
        return strang_circulant(t);
    }
    if m < 4 {
        return Err(invalid("M", format!("circulant variants need M >= 4, got {m}")));
    }
    let mf = T::from_count(m);
    let pi = T::PI();
    let half = T::lit(0.5);
    match kind {
        CirculantKind::Strang => unreachable!(),
        CirculantKind::TChan => windowed(t, |k| (mf - T::from_count(k)) / mf),
        CirculantKind::RChan => windowed(t, |_| T::one()),
        CirculantKind::ModifiedDirichlet => windowed(t, |k| match (2 * k).cmp(&m) {
            std::cmp::Ordering::Less => T::one(),
            std::cmp::Ordering::Equal => half,
            std::cmp::Ordering::Greater => T::zero(),
        }),
        CirculantKind::VonHann => windowed(t, |k| half * (T::one() + (pi * T::from_count(k) / mf).cos())),
        CirculantKind::Hamming => {
            windowed(t, |k| T::lit(0.54) + T::lit(0.46) * (pi * T::from_count(k) / mf).cos())
        }
        CirculantKind::Superoptimal => {
            // eigenvalues of c(T^2) c(T)^{-1}, c = Frobenius-optimal projection
            let chan = variant_circulant(t, CirculantKind::TChan)?;
            let s = square_diagonal_sums(t);
            let mut col = vec![T::zero(); m];
            col[0] = s[0] / mf;
            for k in 1..m {
                col[k] = (s[k] + s[m - k]) / mf;
            }
            let chan_sq = CirculantSym::from_first_col(col)?;
            let eigs: Vec<T> = chan_sq.eigs().iter().zip(chan.eigs()).map(|(&a, &b)| a / b).collect();
            CirculantSym::from_eigenvalues(&eigs)
        }
    }
}

/// Solves `[[ω̂ I, Λ], [-Λ, ω̂ I]] (x1; x2) = (r1; r2)` frequency by frequency,
/// overwriting `r1`, `r2` with `x1`, `x2`.
pub fn circulant_shifted_block_solve<T: Real>(
    c: &CirculantSym<T>,
    omega_hat: T,
    r1: &mut [Complex<T>],
    r2: &mut [Complex<T>],
) -> Result<()> {
    if !(omega_hat > T::zero()) {
        return Err(invalid("omega_hat", format!("{omega_hat} must be positive")));
    }
    check_len(c.dim(), r1.len())?;
    check_len(c.dim(), r2.len())?;
    shifted_block_solve_in_place(c.eigs(), omega_hat, r1, r2);
    Ok(())
}

pub(crate) fn shifted_block_solve_in_place<T: Real>(
    eigs: &[T],
    omega_hat: T,
    r1: &mut [Complex<T>],
    r2: &mut [Complex<T>],
) {
    for ((&l, a), b) in eigs.iter().zip(r1.iter_mut()).zip(r2.iter_mut()) {
        let x2 = (*b + *a * (l / omega_hat)) / (omega_hat + l * l / omega_hat);
        let x1 = (*a - x2 * l) / omega_hat;
        *a = x1;
        *b = x2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracdiff::coefficients;

    fn toeplitz(alpha: f64, m: usize, mu: f64) -> ToeplitzSym<f64> {
        ToeplitzSym::from_coeffs(&coefficients(alpha, m).unwrap(), m, mu).unwrap()
    }

    #[test]
    fn strang_wraps_laplacian() {
        let c = strang_circulant(&toeplitz(2.0, 8, 1.0)).unwrap();
        assert_eq!(c.first_col(), &[2.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn strang_rejects_odd() {
        assert!(strang_circulant(&toeplitz(1.5, 9, 1.0)).is_err());
    }

    #[test]
    fn t_chan_of_diagonal_is_diagonal() {
        let mut col = vec![0.0; 10];
        col[0] = 3.5;
        let t = ToeplitzSym::from_first_col(col).unwrap();
        let c = variant_circulant(&t, CirculantKind::TChan).unwrap();
        assert_eq!(c.first_col()[0], 3.5);
        assert!(c.first_col()[1..].iter().all(|&v| v == 0.0));
        assert!(c.eigs().iter().all(|&l: &f64| (l - 3.5).abs() < 1e-14));
    }

    #[test]
    fn r_chan_definition() {
        let t = toeplitz(1.5, 8, 0.7);
        let c = variant_circulant(&t, CirculantKind::RChan).unwrap();
        let tc = t.first_col();
        assert!((c.first_col()[1] - (tc[1] + tc[7])).abs() < 1e-15);
    }

    #[test]
    fn kind_parsing() {
        for k in CirculantKind::ALL {
            assert_eq!(k.name().parse::<CirculantKind>().unwrap(), k);
        }
        assert_eq!("T. Chan".parse::<CirculantKind>().unwrap(), CirculantKind::TChan);
        assert!("fejer".parse::<CirculantKind>().is_err());
    }

    #[test]
    fn block_solve_with_zero_spectrum() {
        let c = CirculantSym::from_first_col(vec![0.0f64; 4]).unwrap();
        let mut r1 = vec![Complex::new(1.0, 2.0); 4];
        let mut r2 = vec![Complex::new(-3.0, 0.5); 4];
        circulant_shifted_block_solve(&c, 2.0, &mut r1, &mut r2).unwrap();
        assert!(r1.iter().all(|z| (*z - Complex::new(0.5, 1.0)).norm() < 1e-15));
        assert!(r2.iter().all(|z| (*z - Complex::new(-1.5, 0.25)).norm() < 1e-15));
        assert!(circulant_shifted_block_solve(&c, 0.0, &mut r1, &mut r2).is_err());
    }

    #[test]
    fn block_solve_reconstructs() {
        let t = toeplitz(1.5, 16, 1.3);
        let c = strang_circulant(&t).unwrap();
        let r1: Vec<Complex<f64>> = (0..16).map(|k| Complex::new(k as f64 * 0.3 - 1.0, (k as f64).sin())).collect();
        let r2: Vec<Complex<f64>> = (0..16).map(|k| Complex::new((k as f64).cos(), 0.2 * k as f64)).collect();
        let (mut x1, mut x2) = (r1.clone(), r2.clone());
        let wh = 1.7;
        circulant_shifted_block_solve(&c, wh, &mut x1, &mut x2).unwrap();
        for k in 0..16 {
            let l = c.eigs()[k];
            assert!((x1[k] * wh + x2[k] * l - r1[k]).norm() < 1e-13);
            assert!((x2[k] * wh - x1[k] * l - r2[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn from_eigenvalues_round_trip() {
        let t = toeplitz(1.3, 12, 1.0);
        let c = variant_circulant(&t, CirculantKind::VonHann).unwrap();
        let d = CirculantSym::from_eigenvalues(c.eigs()).unwrap();
        for (a, b) in c.first_col().iter().zip(d.first_col()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn superoptimal_of_circulant_is_itself() {
        // a Toeplitz matrix that is already circulant is its own T. Chan and
        // superoptimal approximation only when it is also diagonal; check the
        // diagonal case exactly
        let mut col = vec![0.0; 8];
        col[0] = 2.0;
        let t = ToeplitzSym::from_first_col(col).unwrap();
        let c = variant_circulant(&t, CirculantKind::Superoptimal).unwrap();
        assert!(c.eigs().iter().all(|&l: &f64| (l - 2.0).abs() < 1e-13));
    }
}
