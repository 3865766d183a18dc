//! Online learning in average-reward two-player zero-sum stochastic games.
//!
//! - [`sg_model`]: game data model, validation, generators and JSON layout.
//! - [`matrix_game`]: exact matrix-game equilibria by linear programming.
//! - [`planner`]: maximin relative value iteration, best-response MDPs and
//!   exact policy-pair evaluation.
//! - [`psrl`]: the posterior-sampling agent with doubling-style episodes.
//! - [`opponents`]: adversaries that act on the public history.
//! - [`harness`]: experiment loop, regret accounting, diagnostics, I/O.

pub mod error;
pub mod harness;
pub mod matrix_game;
pub mod planner;
pub mod opponents;
pub mod psrl;
pub mod sg_model;

pub use error::{Error, Result};
