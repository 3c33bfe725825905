//! Exact combinatorics of monoid schemes.
//!
//! Monoids-with-zero ("algebras without addition") and their formal
//! completions are classified by rational polyhedral cones with punctures,
//! glued into complexes. This crate realizes both sides of that dictionary
//! with exact integer arithmetic and provides the decision procedures the
//! classification makes combinatorial: separatedness, overconvergence,
//! properness, Noetherianity, and algebraisability, each cross-checked by an
//! independent integer-jet oracle.

pub mod arith;
pub mod error;
pub mod group;

pub mod algebra;
pub mod complex;
pub mod cone;
pub mod criteria;
pub mod functors;
pub mod io;

pub use error::{Error, Result};
