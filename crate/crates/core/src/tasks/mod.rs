//! Concrete environments: the two-arm planar transfer task, the analytic
//! chain world used as an oracle testbed, scripted experts and their
//! demonstrations.

pub mod chain_world;
pub mod demos;
pub mod planar;
pub mod scripted;

pub use chain_world::{make_chain_world, ChainWorld, ChainWorldConfig, SuccessMap};
pub use demos::{collect_demonstrations, collect_task_demonstrations, load_demos, save_demos, scripted_task_episode, Demonstration};
pub use planar::{make_planar_transfer, PlanarConfig, PlanarTransferEnv};
pub use scripted::scripted_action;
