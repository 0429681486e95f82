//! Online learning in two-player uninformed Markov games.
//!
//! - [`game`]: tabular layered games, sampling, and exact policy evaluation.
//! - [`matrix_game`]: zero-sum LP solves and (empirical) Nash-value recursions.
//! - [`bandit`]: the Tsallis-FTRL bandit with implicit exploration.
//! - [`vlearning`]: epoch V-learning.
//! - [`meta`]: adaptive restarts of epoch V-learning.
//! - [`opponents`]: opponent policy generators.
//! - [`eval`]: run logs and exact regret metrics.
//! - [`harness`]: experiment configuration, execution and CSV output.

pub mod bandit;
pub mod error;
pub mod eval;
pub mod game;
pub mod harness;
pub mod matrix_game;
pub mod meta;
pub mod opponents;
pub mod vlearning;

pub use error::{Error, Result};
