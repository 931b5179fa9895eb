//! Linear-quadratic non-zero-sum games of a controlled backward SDE in which
//! the two players observe different parts of the driving noise.
//!
//! The crate solves the gain ODEs ([`riccati`]), reconstructs the feedback
//! Nash equilibrium path by path for each [`model::InformationPattern`]
//! ([`equilibrium`]), and checks the result with Monte-Carlo and
//! deterministic oracles ([`verification`]). [`girsanov`] holds the
//! density processes used to turn noisy observations into Brownian motions.

pub mod equilibrium;
pub mod error;
pub mod girsanov;
pub mod model;
pub mod ode;
pub mod output;
pub mod riccati;
pub mod scenario;
pub mod stochastic;
pub mod verification;

pub use error::{Error, Result};
