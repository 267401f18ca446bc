//! Numerical laboratory for the very degenerate elliptic equation
//! `div F(∇u) = f` and its divergence-constrained dual.
//!
//! The crate computes the optimal flux `σ̄ = F(∇u)` twice, once from a damped
//! Newton solve of the primal energy and once from a Douglas–Rachford
//! splitting of the dual problem `min ∫ H*(σ)` subject to `div σ = f`,
//! `σ·n = 0`, and certifies both with the discrete Fenchel duality gap. On top
//! of the solved flux it measures oscillation decay of the truncations
//! `(∂_e u − (1+δ))₊`, and runs the continuum traffic application: integral
//! curves of the transport field, deposited traffic intensity, and a Wardrop
//! audit against a fast-marching geodesic solver.
//!
//! See the runnable programs in `examples/` for one tour per capability.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod banded;
pub mod dual;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod potentials;
pub mod primal;
pub mod regularity;
pub mod sources;
pub mod traffic;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Vec2 = [f64; 2];
