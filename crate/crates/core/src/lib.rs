//! Learning equilibria of tabular Markov games through per-state
//! no-regret learners coupled by incremental value updates.

pub mod bench;
mod clock;
pub mod error;
pub mod framework;
pub mod game;
pub mod general_sum;
pub mod learners;
pub mod schedule;

pub use error::{Error, Result};
