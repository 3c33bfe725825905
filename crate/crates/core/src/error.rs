//! Crate-wide error type. Every failure carries enough context to print a
//! useful witness; nothing is reported by panicking on user data.

use crate::arith::IntMat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // presentations and algebras
    #[error("empty presentation: relations given over zero generators")]
    EmptyPresentation,
    #[error("relation equates a monomial to zero; quasi-integrality would fail")]
    ZeroRelation,
    #[error("the zero element does not define an open (the category has no empty object)")]
    ZeroElement,
    #[error("element {0} is not a member of the monoid")]
    NotElement(String),
    #[error("operation requires an integral algebra; pass through underlying_integral first")]
    NotIntegral,
    #[error("cancellativity undecided within normal-form degree bound {bound}")]
    UndecidedWithinBound { bound: u32 },
    #[error("saturation is not finitely generated over this span")]
    NotFinitelyGeneratedSaturation,
    #[error("element {0} is not a generator of the ideal")]
    SNotInIdeal(String),
    #[error("the zero ideal is not admissible here")]
    ZeroIdeal,

    // cones
    #[error("cone has a nonzero lineality space and is not pointed")]
    NotPointed,
    #[error("character groups differ: {0} vs {1}")]
    CharacterMismatch(String, String),
    #[error("dimension {dim} exceeds configured bound {bound} for Hilbert basis computation")]
    DimensionBound { dim: usize, bound: usize },

    // complexes
    #[error("two faces of cone {cone} are glued to each other (masks {a:#x} and {b:#x})")]
    SelfGluedFaces { cone: usize, a: u128, b: u128 },
    #[error("incoherent transition between cone {i} and cone {j}: two derived identifications of the same face disagree")]
    IncoherentTransition { i: usize, j: usize },
    #[error("gluing {index} does not define an isomorphism of punctured faces: {reason}")]
    NonIsomorphicGluing { index: usize, reason: String },
    #[error("not a subcomplex: {0}")]
    NotASubcomplex(String),
    #[error("local system is not constant; monodromy generator {witness:?}")]
    NonConstantSystem { witness: IntMat },
    #[error("character sheaf is not constant; loop through cone {cone} has monodromy {witness:?}")]
    NonConstantCharacters { cone: usize, witness: IntMat },
    #[error("complex is not locally finite")]
    NotLocallyFinite,

    // functors
    #[error("expansion centre meets the face in the zero ideal")]
    ZeroCenter,
    #[error("ideals are not compatible across gluing {index}: generator {generator} does not map into the other chart's radical")]
    IncompatibleIdeals { index: usize, generator: String },

    // io and generic validation
    #[error("schema error at {at}: {message}")]
    SchemaError { at: String, message: String },
    #[error("invariant violated: {0}")]
    InvariantError(String),
}

pub type Result<T> = std::result::Result<T, Error>;
