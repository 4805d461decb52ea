//! Exact solutions of the Schrödinger equation for `H(t) = p²/2m + f(t) q`
//! built from linear and quadratic Lewis–Riesenfeld invariants, together
//! with a split-step propagator used to check them.
//!
//! Natural units are used throughout: `ħ = 1`, `[q, p] = i`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod auxiliary;
pub mod completeness;
pub mod config;
pub mod error;
pub mod force;
pub mod grid;
pub mod io;
pub mod lsq;
pub mod numerics;
pub mod propagator;
pub mod scenario;
pub mod transforms;
pub mod wavefunctions;

pub use algebra::{apply_quadop, commutator, lvn_residual, Basis, QuadOp};
pub use error::{Error, Result};
pub use force::{parse_force, ForceExpression, ForceProfile};
pub use grid::{GridSpec, GridWavefunction};
