//! Hopfield-Fenchel-Young associative memories.
//!
//! A Hopfield network stores a set of patterns (rows of a matrix `X`) and
//! retrieves them by iterating an update map from a query vector `q`. This
//! crate builds the whole family of such networks from two convex
//! regularizers:
//!
//! ```text
//! q ← ŷ_Ψ( Xᵀ · ŷ_Ω(β X q) )
//! ```
//!
//! where `ŷ_Ω` is a regularized argmax over a simplex or polytope (softmax,
//! sparsemax, α-entmax, γ-normmax, SparseMAP, ...) acting as the *separation*
//! step, and `ŷ_Ψ` is a *post-transformation* (identity, ℓ₂ normalization,
//! layer normalization, tanh, sign). The iteration is the concave-convex
//! procedure applied to an energy written as a difference of two
//! Fenchel-Young losses, so the energy decreases along every trajectory.
//!
//! Sparse separations have a loss margin, which makes retrieval *exact*: a
//! well-separated stored pattern is recovered bit-for-bit in one update, not
//! merely approximated. Structured separations (SparseMAP over k-subsets or
//! sequential k-subsets) retrieve pattern *associations* instead of single
//! patterns.
//!
//! Module map:
//!
//! - [`simplex`] — probability-simplex transformations, generalized
//!   negentropies, Fenchel-Young losses, and margins.
//! - [`structured`] — MAP oracles, the capped-simplex projection, and the
//!   SparseMAP active-set solver.
//! - [`energy`] — pattern memories, energies, update rules, fixed-point
//!   iteration, retrieval checks, and basin-of-attraction grids.
//! - [`recall`] — free and sequential recall simulators with their metrics.

pub mod energy;
pub mod error;
pub mod recall;
pub mod simplex;
pub mod structured;

#[cfg(feature = "bruteforce")]
pub mod bruteforce;

pub use error::{Error, Result};
