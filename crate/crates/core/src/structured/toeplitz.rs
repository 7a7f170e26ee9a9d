use num_complex::Complex;

use super::fft::{pack, Transform};
use crate::error::{check_len, invalid, Error, Result};
use crate::fracdiff::FracCoeffs;
use crate::scalar::Real;

/// Symmetric Toeplitz matrix held by its first column.
///
/// Products are computed by embedding `T` into a circulant of length
/// `L = 2^ceil(log2(2M))` and diagonalizing it with the FFT.
#[derive(Clone, Debug)]
pub struct ToeplitzSym<T: Real> {
    first_col: Vec<T>,
    /// DFT of the embedding circulant's first column.
    symbol: Vec<Complex<T>>,
    transform: Transform<T>,
}

impl<T: Real> ToeplitzSym<T> {
    /// `T = mu * toeplitz(c_0, ..., c_{M-1})`.
    pub fn from_coeffs(coeffs: &FracCoeffs<T>, m: usize, mu: T) -> Result<Self> {
        if coeffs.len() < m {
            return Err(Error::InsufficientCoefficients { needed: m, available: coeffs.len() });
        }
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(invalid("mu", format!("{mu} must be positive")));
        }
        Self::from_first_col(coeffs.as_slice()[..m].iter().map(|&c| mu * c).collect())
    }

    pub fn from_first_col(first_col: Vec<T>) -> Result<Self> {
        let m = first_col.len();
        if m == 0 {
            return Err(invalid("M", "empty Toeplitz matrix"));
        }
        let len = (2 * m).next_power_of_two();
        let transform = Transform::new(len);
        let mut symbol = vec![Complex::default(); len];
        symbol[0] = Complex::new(first_col[0], T::zero());
        for k in 1..m {
            symbol[k] = Complex::new(first_col[k], T::zero());
            symbol[len - k] = Complex::new(first_col[k], T::zero());
        }
        transform.forward(&mut symbol);
        let scale = T::from_count(len).recip();
        for s in symbol.iter_mut() {
            *s = *s * scale;
        }
        Ok(Self { first_col, symbol, transform })
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[T] {
        &self.first_col
    }

    /// Length of the circulant embedding.
    pub fn embedding_len(&self) -> usize {
        self.symbol.len()
    }

    /// `s * T`.
    pub fn scaled(&self, s: T) -> Result<Self> {
        Self::from_first_col(self.first_col.iter().map(|&t| s * t).collect())
    }

    /// Entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.first_col[i.abs_diff(j)]
    }

    /// `T x`.
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.dim()];
        let zeros = vec![T::zero(); self.dim()];
        let mut discard = vec![T::zero(); self.dim()];
        self.matvec_pair_into(x, &zeros, &mut y, &mut discard)?;
        Ok(y)
    }

    /// Computes `T a` and `T b` with a single complex transform pair.
    pub fn matvec_pair_into(&self, a: &[T], b: &[T], ya: &mut [T], yb: &mut [T]) -> Result<()> {
        let m = self.dim();
        check_len(m, a.len())?;
        check_len(m, b.len())?;
        check_len(m, ya.len())?;
        check_len(m, yb.len())?;
        let mut buf = vec![Complex::default(); self.symbol.len()];
        pack(a, b, &mut buf[..m]);
        self.transform.forward(&mut buf);
        for (v, s) in buf.iter_mut().zip(&self.symbol) {
            *v = *v * *s;
        }
        self.transform.inverse(&mut buf);
        for i in 0..m {
            ya[i] = buf[i].re;
            yb[i] = buf[i].im;
        }
        Ok(())
    }

    /// `T u` for a complex vector `u` (T is real).
    pub fn matvec_complex(&self, u: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let m = self.dim();
        check_len(m, u.len())?;
        let mut buf = vec![Complex::default(); self.symbol.len()];
        buf[..m].copy_from_slice(u);
        self.transform.forward(&mut buf);
        for (v, s) in buf.iter_mut().zip(&self.symbol) {
            *v = *v * *s;
        }
        self.transform.inverse(&mut buf);
        buf.truncate(m);
        Ok(buf)
    }

    /// Gershgorin radius of the widest row, `sum_{k=1}^{M-1} 2 |t_k|` at most.
    pub fn max_row_offdiag(&self) -> T {
        let m = self.dim();
        // middle row sees the most off-diagonal entries
        let i = m / 2;
        (0..m).filter(|&j| j != i).map(|j| self.entry(i, j).abs()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracdiff::coefficients;

    #[test]
    fn laplacian_pattern() {
        let c = coefficients(2.0f64, 3).unwrap();
        let t = ToeplitzSym::from_coeffs(&c, 3, 1.0).unwrap();
        assert_eq!(t.first_col(), &[2.0, -1.0, 0.0]);
        assert_eq!(t.entry(2, 1), -1.0);
    }

    #[test]
    fn zero_and_unit_vectors() {
        let c = coefficients(1.5f64, 20).unwrap();
        let t = ToeplitzSym::from_coeffs(&c, 9, 0.3).unwrap();
        let y = t.matvec(&[0.0; 9]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        let mut e1 = vec![0.0; 9];
        e1[0] = 1.0;
        let y = t.matvec(&e1).unwrap();
        for (a, b) in y.iter().zip(t.first_col()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn errors() {
        let c = coefficients(1.5f64, 4).unwrap();
        assert!(matches!(
            ToeplitzSym::from_coeffs(&c, 8, 1.0),
            Err(Error::InsufficientCoefficients { .. })
        ));
        assert!(ToeplitzSym::from_coeffs(&c, 4, -1.0).is_err());
        let t = ToeplitzSym::from_coeffs(&c, 4, 1.0).unwrap();
        assert!(matches!(t.matvec(&[1.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn diagonally_dominant() {
        for &a in &[1.05, 1.5, 1.95] {
            let c = coefficients(a, 64).unwrap();
            let t = ToeplitzSym::from_coeffs(&c, 64, 2.5).unwrap();
            assert!(t.first_col()[0] > t.max_row_offdiag());
        }
    }

    #[test]
    fn embedding_is_power_of_two() {
        let c = coefficients(1.5f64, 600).unwrap();
        let t = ToeplitzSym::from_coeffs(&c, 513, 1.0).unwrap();
        assert_eq!(t.embedding_len(), 1024 * 2);
    }
}
