//! The per-level complex system `(D - T + iI) u = b` and its real block form
//!
//! ```text
//! R x = [[I, T - D], [D - T, I]] (z; y) = (-p; q) = f
//! ```
//!
//! with `u = y + i z` and `b = p + i q`.

use num_complex::Complex;

use crate::error::{check_len, invalid, Result};
use crate::scalar::{norm2, Real};
use crate::structured::ToeplitzSym;

/// Nonnegative diagonal `D = diag(d_1, ..., d_M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalNonneg<T>(Vec<T>);

impl<T: Real> DiagonalNonneg<T> {
    pub fn new(d: Vec<T>) -> Result<Self> {
        if let Some(j) = d.iter().position(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("D", format!("entry {j} = {} is not a finite nonnegative value", d[j])));
        }
        Ok(Self(d))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![T::zero(); m])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `ν = max_j |d_j|`.
    pub fn max(&self) -> T {
        self.0.iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn scaled(&self, s: T) -> Result<Self> {
        Self::new(self.0.iter().map(|&v| s * v).collect())
    }
}

/// `b = (T - D + iI) u_prev`.
///
/// Rearranging the three-level scheme
/// `i (u^{n+1} - u^{n-1}) - T (u^{n+1} + u^{n-1}) + D (u^{n+1} + u^{n-1}) = 0`
/// gives `(D - T + iI) u^{n+1} = (T - D + iI) u^{n-1}`.
pub fn assemble_rhs<T: Real>(
    u_prev: &[Complex<T>],
    t: &ToeplitzSym<T>,
    d: &DiagonalNonneg<T>,
) -> Result<Vec<Complex<T>>> {
    check_len(t.dim(), u_prev.len())?;
    check_len(t.dim(), d.len())?;
    let tu = t.matvec_complex(u_prev)?;
    Ok(tu
        .into_iter()
        .zip(u_prev)
        .zip(d.as_slice())
        .map(|((tu, &u), &dj)| tu - u * dj + Complex::new(-u.im, u.re))
        .collect())
}

/// `(D - T + iI) u`.
pub fn apply_complex<T: Real>(t: &ToeplitzSym<T>, d: &DiagonalNonneg<T>, u: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    check_len(d.len(), u.len())?;
    let tu = t.matvec_complex(u)?;
    Ok(tu
        .into_iter()
        .zip(u)
        .zip(d.as_slice())
        .map(|((tu, &u), &dj)| u * dj - tu + Complex::new(-u.im, u.re))
        .collect())
}

/// `b = p + iq  ->  f = (-p; q)`.
pub fn complex_to_block<T: Real>(b: &[Complex<T>]) -> Vec<T> {
    let mut f: Vec<T> = b.iter().map(|z| -z.re).collect();
    f.extend(b.iter().map(|z| z.im));
    f
}

/// `x = (z; y)  ->  u = y + iz`.
pub fn block_to_complex<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    let m = x.len() / 2;
    let (z, y) = x.split_at(m);
    y.iter().zip(z).map(|(&re, &im)| Complex::new(re, im)).collect()
}

/// `R x = f` held implicitly through `T`, `D` and `f`.
#[derive(Clone, Debug)]
pub struct BlockSystem<T: Real> {
    t: ToeplitzSym<T>,
    d: DiagonalNonneg<T>,
    f: Vec<T>,
}

impl<T: Real> BlockSystem<T> {
    pub fn new(t: ToeplitzSym<T>, d: DiagonalNonneg<T>, f: Vec<T>) -> Result<Self> {
        check_len(t.dim(), d.len())?;
        check_len(2 * t.dim(), f.len())?;
        Ok(Self { t, d, f })
    }

    /// Block form of `(D - T + iI) u = b`.
    pub fn from_complex(t: ToeplitzSym<T>, d: DiagonalNonneg<T>, b: &[Complex<T>]) -> Result<Self> {
        let f = complex_to_block(b);
        Self::new(t, d, f)
    }

    pub fn toeplitz(&self) -> &ToeplitzSym<T> {
        &self.t
    }

    pub fn diagonal(&self) -> &DiagonalNonneg<T> {
        &self.d
    }

    pub fn rhs(&self) -> &[T] {
        &self.f
    }

    /// Half dimension `M`.
    pub fn m(&self) -> usize {
        self.t.dim()
    }

    /// Full dimension `2M`.
    pub fn dim(&self) -> usize {
        2 * self.t.dim()
    }

    /// Same matrix, new right-hand side.
    pub fn with_rhs(&self, f: Vec<T>) -> Result<Self> {
        Self::new(self.t.clone(), self.d.clone(), f)
    }

    pub fn apply_r(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_r_into(x, &mut out)?;
        Ok(out)
    }

    /// `out = [[I, T-D], [D-T, I]] x`.
    pub fn apply_r_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let m = self.m();
        check_len(2 * m, x.len())?;
        check_len(2 * m, out.len())?;
        let (z, y) = x.split_at(m);
        let (o1, o2) = out.split_at_mut(m);
        // o1 <- T y, o2 <- T z
        self.t.matvec_pair_into(y, z, o1, o2)?;
        let d = self.d.as_slice();
        for j in 0..m {
            let ty = o1[j];
            let tz = o2[j];
            o1[j] = z[j] + ty - d[j] * y[j];
            o2[j] = d[j] * z[j] - tz + y[j];
        }
        Ok(())
    }

    /// `||f - R x|| / ||f||`, or `||R x||` when `f = 0`.
    pub fn relative_residual(&self, x: &[T]) -> Result<T> {
        let rx = self.apply_r(x)?;
        let res = norm2(&rx.iter().zip(&self.f).map(|(&a, &b)| b - a).collect::<Vec<_>>());
        let fnorm = norm2(&self.f);
        Ok(if fnorm > T::zero() { res / fnorm } else { res })
    }
}
