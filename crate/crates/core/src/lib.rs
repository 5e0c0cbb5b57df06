//! Coupled distances on disjoint unions of Ricci flows.
//!
//! The crate builds the union distance `D^t` on `M₁ ⊔ … ⊔ M_k` for flat tori
//! and round spheres under their exact Ricci flows, evaluates the evolution
//! inequality `∂_t D^t ≥ Δ D^t` across components, realizes the heat
//! semigroup by iterated sphere averages, and tracks the Lipschitz constant
//! of heat solutions with respect to `D^t`.

pub mod cli;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod heat;
pub mod lipschitz;

pub use error::{Error, Result};
