//! Gradient-flow laboratory for bias-free two-layer ReLU networks trained with
//! logistic loss on a two-class Gaussian mixture.
//!
//! The crate simulates the flow from a balanced, scaled initialization,
//! tracks how neurons settle into data-dependent cones, and evaluates the
//! closed-form alignment and error bounds against those simulations: the
//! phase-1 alignment lower bound, the phase-2 decay bound, and the
//! over-alignment / over-fitting split of the excess error.

pub mod bounds;
pub mod cli;
pub mod cones;
pub mod error;
pub mod flow;
pub mod io;
pub mod mixture;
pub mod network;
pub mod numeric;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
