use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Forward/inverse transform pair of a fixed length.
///
/// The inverse is unnormalized, as in `rustfft`; callers divide by `len`.
#[derive(Clone)]
pub struct Transform<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Transform<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        let mut scratch = vec![Complex::default(); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(buf, &mut scratch);
    }

    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        let mut scratch = vec![Complex::default(); self.inverse.get_inplace_scratch_len()];
        self.inverse.process_with_scratch(buf, &mut scratch);
    }
}

impl<T: Real> std::fmt::Debug for Transform<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform").field("len", &self.len()).finish()
    }
}

/// Packs two real vectors into one complex vector `a + i b`.
pub(crate) fn pack<T: Real>(a: &[T], b: &[T], out: &mut [Complex<T>]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = Complex::new(x, y);
    }
}

pub(crate) fn to_complex<T: Real>(a: &[T]) -> Vec<Complex<T>> {
    a.iter().map(|&x| Complex::new(x, T::zero())).collect()
}
