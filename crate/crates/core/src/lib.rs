//! Restricted invertibility and factorization of operators with a large diagonal on
//! finite-dimensional sequence spaces.
//!
//! - [`spaces`]: ℓᵖ and Lorentz norms, duals, operator norms and the profile functions λ, μ, ν, τ.
//! - [`operators`]: dense operators, diagonal data and operator norms.
//! - [`signavg`]: balanced-sign averages and the block search.
//! - [`ribsel`]: randomized selection of a coordinate set with a certified inverse.
//! - [`blockfact`]: block bases and the finite factorization of the identity through `T`.

pub mod blockfact;
pub mod error;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod ribsel;
pub mod scaling;
mod serde_util;
pub mod signavg;
pub mod spaces;
pub mod testgen;
pub mod verify;

pub use error::{Error, Result};
pub use operators::{op_norm, OpNormMode, Operator};
pub use spaces::{FamilyRegistry, NormFamily, SpaceSpec, TauMode};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
