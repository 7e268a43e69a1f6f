//! Numerical calculus for unital JB*-algebras realized as blocks of complex matrices.
//!
//! Models are full or transpose-symmetric matrix algebras, direct sums of those,
//! and algebras of functions on an equispaced grid of the unit circle. On top of
//! the Jordan and triple arithmetic the crate provides the triple functional
//! calculus, factorization of unitaries in the principal component into chains
//! of `U`-operators of exponentials, winding invariants, and the structure of
//! surjective isometries between unitary sets.

pub mod algebra;
pub mod element;
pub mod error;
pub mod isometry;
pub mod linalg;
pub mod model;
pub mod report;
pub mod spectral;
pub mod tolerance;
pub mod unitary;

pub use algebra::IsotopeContext;
pub use element::Element;
pub use error::{Error, Result};
pub use model::{build_model, Model, ModelDescriptor};
pub use tolerance::Tolerances;
