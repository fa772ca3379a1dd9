//! Automatic noise filtering: dynamic sparse training of the input layer of
//! actor-critic agents, so connections migrate toward task-relevant features
//! in environments padded with pure-noise features.

pub mod agents;
pub mod analytics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod sparse;

pub use error::{Error, Result};
