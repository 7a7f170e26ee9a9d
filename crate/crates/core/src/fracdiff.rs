//! Fractional centered-difference coefficients.
//!
//! The discrete fractional Laplacian of order `alpha` is the symmetric stencil
//! `sum_k c_{j-k} u_k` with
//!
//! ```text
//! c_k = (-1)^k Γ(α+1) / (Γ(α/2 - k + 1) Γ(α/2 + k + 1))
//! ```
//!
//! The Γ quotient overflows for `k` near 170, so only `c_0` is evaluated with
//! Γ and the rest follow from the ratio recurrence
//! `c_{k+1} = c_k (k - α/2) / (k + 1 + α/2)`.

use libm::tgamma as gamma;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Symmetric half `c_0..=c_K` of the fractional centered-difference stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct FracCoeffs<T> {
    alpha: T,
    coeffs: Vec<T>,
}

impl<T: Real> FracCoeffs<T> {
    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// `c_0..=c_K`; `c_{-k} = c_k` is implied.
    pub fn as_slice(&self) -> &[T] {
        &self.coeffs
    }

    /// Number of stored coefficients, `K + 1`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `c_k` for any integer `k`; zero beyond the stored range is *not*
    /// assumed, so out-of-range indices panic.
    pub fn get(&self, k: isize) -> T {
        self.coeffs[k.unsigned_abs()]
    }

    /// `c_0 + 2 sum_{k=1}^{K} c_k`, which tends to zero from above as `K` grows.
    pub fn row_sum(&self) -> T {
        let tail: T = self.coeffs[1..].iter().copied().sum();
        self.coeffs[0] + tail + tail
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} is outside (1, 2]")))
    }
}

/// `c_0 = Γ(α+1) / Γ(α/2+1)^2`.
pub fn leading_coefficient(alpha: f64) -> f64 {
    let g = gamma(alpha / 2.0 + 1.0);
    gamma(alpha + 1.0) / (g * g)
}

/// Computes `c_0..=c_K` for order `alpha` in `(1, 2]`.
pub fn coefficients<T: Real>(alpha: T, k_max: usize) -> Result<FracCoeffs<T>> {
    let a = alpha.as_f64();
    check_alpha(a)?;
    if k_max == 0 {
        return Err(invalid("K", "at least one off-diagonal coefficient is required"));
    }
    let half = a / 2.0;
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut c = leading_coefficient(a);
    coeffs.push(T::lit(c));
    for k in 0..k_max {
        let kf = k as f64;
        c *= (kf - half) / (kf + 1.0 + half);
        coeffs.push(T::lit(c));
    }
    Ok(FracCoeffs { alpha, coeffs })
}

/// `θ` of the tail estimate for `sum_{j > k0} |c_j|`.
pub fn theta(alpha: f64) -> f64 {
    let p = 5.0 + alpha / 2.0;
    let base = 1.0 - (1.0 + alpha) / p;
    base.powf(p) * (1.0 + alpha).exp() * gamma(alpha + 1.0) * (std::f64::consts::PI * alpha / 2.0).sin()
        / (std::f64::consts::PI * alpha)
}

/// `θ₀` of the tail estimate for `sum_{j > k0} |c_j|`.
pub fn theta0(alpha: f64) -> f64 {
    std::f64::consts::SQRT_2 * (13.0f64 / 12.0).exp() * gamma(alpha + 1.0)
        * (std::f64::consts::PI * alpha / 2.0).sin()
        / (std::f64::consts::PI * alpha)
}

/// Strict bounds `θ/(k0+1/2)^α < sum_{j>k0} |c_j| < θ₀/(k0-1)^α`, valid for `k0 >= 3`.
pub fn tail_bounds(alpha: f64, k0: usize) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if k0 < 3 {
        return Err(invalid("k0", format!("{k0} < 3")));
    }
    let k = k0 as f64;
    Ok((theta(alpha) / (k + 0.5).powf(alpha), theta0(alpha) / (k - 1.0).powf(alpha)))
}

/// Open eigenvalue intervals for `T` and its Strang circulant on a grid of
/// `m` interior nodes over an interval of length `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenvalueBounds {
    pub toeplitz: (f64, f64),
    pub strang: (f64, f64),
}

pub fn eigenvalue_bounds(alpha: f64, gamma_coef: f64, tau: f64, length: f64, m: usize) -> Result<EigenvalueBounds> {
    check_alpha(alpha)?;
    let h = length / (m as f64 + 1.0);
    let th = theta(alpha);
    let c0 = leading_coefficient(alpha);
    let scale = 2.0 * gamma_coef * tau;
    let ratio = (h / length).powf(alpha);
    let two_a = 2f64.powf(alpha);
    Ok(EigenvalueBounds {
        toeplitz: (
            scale * th / length.powf(alpha),
            scale / h.powf(alpha) * (c0 - th * ratio),
        ),
        strang: (
            two_a * scale * th / length.powf(alpha),
            scale / h.powf(alpha) * (c0 - two_a * th * ratio),
        ),
    })
}
