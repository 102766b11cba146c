//! Stationary equilibrium of an entry-exit industry with an unbounded
//! productivity state, plus Monte Carlo and tail-index diagnostics.

pub mod csv;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod tails;
pub mod value;

pub use error::{Error, Result};
pub use model::{parse_model, ModelConfig};
