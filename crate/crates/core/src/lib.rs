//! Norm-preserving Laplacian flow on the clock–shift matrix algebra `M_n`.
//!
//! The crate builds the matrix geometry (generators `X`, `Y`, derivations
//! `δ₁ = [Y,·]`, `δ₂ = −[X,·]`, Laplacian `Δ̂`), solves the heat and
//! normalized flows, and provides the diagnostics used to check their
//! invariants: norm conservation, positivity, entropy stability and operator
//! convexity.

pub mod convexity;
pub mod error;
pub mod flows;
pub mod linalg;
pub mod matrix_io;
pub mod random;
pub mod stability;
pub mod torus;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use linalg::{
    hermitian_eig, hs_inner, hs_norm_sq, log_det, matrix_function, min_eigenvalue, trace_norm,
    EigDecomposition, Matrix,
};
pub use torus::{EigenBasis, GeneratorVariant, SpectralCoefficients, TorusModel, VariantTag};
