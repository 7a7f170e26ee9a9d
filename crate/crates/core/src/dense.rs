//! Dense `f64` assemblies and factorizations used as oracles and for small
//! spectra. Everything here is `O(M^2)` storage and `O(M^3)` work.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex;

use crate::blocksys::{BlockSystem, DiagonalNonneg};
use crate::error::{check_len, invalid, Error, Result};
use crate::scalar::Real;
use crate::structured::{CirculantSym, ToeplitzSym};

pub fn toeplitz_matrix<T: Real>(t: &ToeplitzSym<T>) -> DMatrix<f64> {
    let m = t.dim();
    DMatrix::from_fn(m, m, |i, j| t.entry(i, j).as_f64())
}

pub fn circulant_matrix<T: Real>(c: &CirculantSym<T>) -> DMatrix<f64> {
    let m = c.dim();
    DMatrix::from_fn(m, m, |i, j| c.entry(i, j).as_f64())
}

fn diag_matrix<T: Real>(d: &DiagonalNonneg<T>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.as_slice().iter().map(|v| v.as_f64())))
}

fn blocks(a11: &DMatrix<f64>, a12: &DMatrix<f64>, a21: &DMatrix<f64>, a22: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a11.nrows();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a11);
    out.view_mut((0, m), (m, m)).copy_from(a12);
    out.view_mut((m, 0), (m, m)).copy_from(a21);
    out.view_mut((m, m), (m, m)).copy_from(a22);
    out
}

/// `R = [[I, T - D], [D - T, I]]`.
pub fn block_matrix<T: Real>(sys: &BlockSystem<T>) -> DMatrix<f64> {
    let m = sys.m();
    let tm = toeplitz_matrix(sys.toeplitz());
    let dm = diag_matrix(sys.diagonal());
    let id = DMatrix::identity(m, m);
    let k = &tm - &dm;
    blocks(&id, &k, &(-&k), &id)
}

/// `(ωI + [[I, S], [-S, I]]) (ωI + [[0, -D], [D, 0]])`, optionally scaled by `1/(2ω)`.
pub fn splitting_preconditioner(s: &DMatrix<f64>, d: &[f64], omega: f64, scaled: bool) -> DMatrix<f64> {
    let m = s.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let dm = DMatrix::from_diagonal(&DVector::from_column_slice(d));
    let first = blocks(&(&id * (omega + 1.0)), s, &(-s), &(&id * (omega + 1.0)));
    let second = blocks(&(&id * omega), &(-&dm), &dm, &(&id * omega));
    let f = first * second;
    if scaled {
        f / (2.0 * omega)
    } else {
        f
    }
}

/// Dense `F_NASS` built from `T`.
pub fn nass_matrix<T: Real>(t: &ToeplitzSym<T>, d: &DiagonalNonneg<T>, omega: f64, scaled: bool) -> DMatrix<f64> {
    let dv: Vec<f64> = d.as_slice().iter().map(|v| v.as_f64()).collect();
    splitting_preconditioner(&toeplitz_matrix(t), &dv, omega, scaled)
}

/// Dense `F_CNAS` built from the circulant `C`.
pub fn cnas_matrix<T: Real>(c: &CirculantSym<T>, d: &DiagonalNonneg<T>, omega: f64, scaled: bool) -> DMatrix<f64> {
    let dv: Vec<f64> = d.as_slice().iter().map(|v| v.as_f64()).collect();
    splitting_preconditioner(&circulant_matrix(c), &dv, omega, scaled)
}

pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    check_len(a.nrows(), b.len())?;
    a.clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Dense("singular matrix in LU solve".into()))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(a).eigenvalues.as_slice().to_vec();
    e.sort_by(|x, y| x.total_cmp(y));
    e
}

/// Eigenvalues of a general real square matrix via the real Schur form.
pub fn general_eigenvalues(a: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if a.nrows() != a.ncols() {
        return Err(invalid("matrix", "not square"));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(a, f64::EPSILON, 0).ok_or_else(|| Error::Dense("Schur iteration failed".into()))?;
    Ok(schur.complex_eigenvalues().as_slice().to_vec())
}

/// Eigenvalues of `F^{-1} A`.
pub fn preconditioned_eigenvalues(f: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let lu = f.clone().lu();
    let g = lu.solve(a).ok_or_else(|| Error::Dense("singular preconditioner".into()))?;
    general_eigenvalues(g)
}

/// Gaussian elimination on `(D - T + iI) u = b` in complex arithmetic.
pub fn solve_complex_system<T: Real>(
    t: &ToeplitzSym<T>,
    d: &DiagonalNonneg<T>,
    b: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let m = t.dim();
    check_len(m, d.len())?;
    check_len(m, b.len())?;
    let dv = d.as_slice();
    let a = DMatrix::<Complex<f64>>::from_fn(m, m, |i, j| {
        let mut v = Complex::new(-t.entry(i, j).as_f64(), 0.0);
        if i == j {
            v += Complex::new(dv[i].as_f64(), 1.0);
        }
        v
    });
    let rhs = DVector::from_iterator(m, b.iter().map(|z| Complex::new(z.re.as_f64(), z.im.as_f64())));
    let x = a.lu().solve(&rhs).ok_or_else(|| Error::Dense("singular complex system".into()))?;
    Ok(x.iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect())
}
