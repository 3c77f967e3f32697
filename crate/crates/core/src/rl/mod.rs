//! Off-policy learning backbone: replay, hindsight relabeling and soft
//! actor-critic with a demonstration regularizer.

mod her;
mod replay;
mod sac;

pub use her::her_relabel;
pub use replay::{Batch, ReplayBuffer};
pub use sac::{sac_targets, ActorStats, DemoTerm, ImitationTerm, SacAgent, SacConfig};
