//! Comparison methods: discriminator-based value rules, goal-conditioned
//! behaviour cloning and a flat policy trained on the whole task.

mod discriminator;
mod flat;
mod gcbc;
mod values;

pub use discriminator::{discriminator_data, train_discriminators, Discriminator, DiscriminatorConfig};
pub use flat::{evaluate_flat, flat_episode, task_observation, train_flat, FlatConfig, FlatPolicy};
pub use gcbc::{train_gcbc, GcbcConfig};
pub use values::{value_dm, value_ldm, value_sr};
