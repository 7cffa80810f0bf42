//! Layered tensor decomposition (LTD) for hyperspectral anomaly detection.
//!
//! The pipeline factors a hyperspectral cube `H` in two layers: a
//! non-negative spectral factorization `H ≈ C ×₃ B + E1` with unit mode-3
//! tubes in `C`, and a low-tubal-rank spatial factorization
//! `C ≈ D * Zᵀ + E2` with `D` orthogonal under the t-product and group
//! sparsity on the lateral slices of `Z`. Both layers are solved jointly by
//! proximal alternating minimization; the sparse residuals `E1` and `E2`
//! yield complementary spectral and spatial anomaly maps that are fused with
//! a guided image filter and scored by ROC/AUC.
//!
//! Modules:
//! - [`tensor`]: dense third-order tensors, matrices, mode-3 algebra.
//! - [`fourier`]: mode-3 DFT and the t-product.
//! - [`tsvd`]: tensor SVD, tubal rank, low-rank approximation.
//! - [`prox`]: proximal operators and projections for the block updates.
//! - [`solver`]: the alternating-minimization drivers, with and without
//!   adaptive rank reduction.
//! - [`fusion`]: anomaly map construction and guided-filter fusion.
//! - [`eval`]: ROC, AUC, separability statistics, and an RX baseline.

pub mod error;
pub mod eval;
pub mod fourier;
pub mod fusion;
pub mod prox;
pub mod solver;
pub mod tensor;
pub mod tsvd;

pub use error::{LtdError, Result};
pub use tensor::{Matrix, Tensor3};
