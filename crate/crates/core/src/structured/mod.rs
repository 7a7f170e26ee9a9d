//! Symmetric Toeplitz and circulant matrices with FFT-based products.

mod circulant;
mod fft;
mod toeplitz;

pub use circulant::{circulant_shifted_block_solve, strang_circulant, variant_circulant, CirculantKind, CirculantSym};
pub use fft::Transform;
pub use toeplitz::ToeplitzSym;
