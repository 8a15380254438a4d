//! Tabular episodic imitation learning: exact occupancy computations,
//! expert-distribution estimators, adversarial imitation solvers, reward-free
//! exploration and an experiment harness.

pub mod error;
pub mod estimators;
pub mod exploration;
pub mod harness;
pub mod kv;
pub mod mdp;
pub mod solvers;

pub use error::{Error, Result};
