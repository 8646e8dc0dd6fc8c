//! Mechanized PET induction for multiple ergodic averages along polynomial
//! iterates of commuting transformations.
//!
//! The pipeline runs from exact arithmetic ([`exactmath`], [`polyalg`]) through
//! van der Corput differencing ([`petcore`]) to characteristic-factor
//! descriptors ([`factors`]), exact ergodicity checks on symbolic torus
//! rotations ([`systems`]) and numerical convergence probes ([`simulate`]).

pub mod error;
pub mod exactmath;
pub mod polyalg;
pub mod polyexpr;
pub mod petcore;
pub mod factors;
pub mod systems;
pub mod simulate;

pub use error::{Error, Result};
