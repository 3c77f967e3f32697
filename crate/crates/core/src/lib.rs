pub mod baselines;
pub mod chaining;
pub mod envcore;
pub mod error;
pub mod harness;
pub mod rl;
pub mod skills;
pub mod tasks;
pub mod tensorlite;

pub use error::{Error, Result};
