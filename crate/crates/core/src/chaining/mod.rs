//! Subgoal chaining: a boundary-level policy picks the subgoal handed to each
//! frozen skill, and its critic estimates the probability that the whole task
//! succeeds from a boundary state.

mod agent;
mod skill_env;
mod train;

use serde::{Deserialize, Serialize};

use crate::rl::SacConfig;

pub use agent::{clamp_report, estimate_value, BoundaryTransition, ChainAgent};
pub use skill_env::SkillChainEnv;
pub use train::{
    chain_rollout, chain_rollout_from, chain_targets, chain_update, evaluate_chain, sil_weights, train_chain, ChainEpisode, ChainEval,
    ChainReplay, ChainReport, SilBuffer, UpdateStats, ValueRule,
};
pub(crate) use train::summarize;

/// Weighting of self-imitation samples by their advantage `A = y - Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SilWeight {
    /// `max(0, A)`.
    Clipped,
    /// `min(exp(A / beta), max)`.
    Exponential { beta: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Actor/critic settings; `gamma` is unused since chaining is undiscounted.
    pub sac: SacConfig,
    /// Boundary transitions collected during training.
    pub budget: u64,
    pub buffer_capacity: usize,
    /// Transitions in the buffer before updates start.
    pub warmup: usize,
    /// Gradient updates per collected transition (may be fractional).
    pub updates_per_transition: f64,
    pub sil_coef: f64,
    pub sil_weight: SilWeight,
    pub sil_capacity: usize,
    pub sil_batch_size: usize,
    /// Policy samples averaged by value estimates.
    pub value_samples: usize,
    /// Policy samples averaged by bootstrap targets.
    pub target_samples: usize,
    pub entropy_in_targets: bool,
    pub goal_conditioned: bool,
    /// Learning rates fall linearly to this fraction of `sac.lr` over the
    /// second half of the budget.
    pub final_lr_fraction: f64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig {
                hidden: 64,
                layers: 3,
                lr: 1e-3,
                batch_size: 128,
                ..SacConfig::default()
            },
            budget: 20_000,
            buffer_capacity: 100_000,
            warmup: 256,
            updates_per_transition: 1.0,
            sil_coef: 0.1,
            sil_weight: SilWeight::Clipped,
            sil_capacity: 30_000,
            sil_batch_size: 128,
            value_samples: 8,
            target_samples: 1,
            entropy_in_targets: false,
            goal_conditioned: false,
            final_lr_fraction: 0.1,
            eval_interval: 10_000,
            eval_episodes: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::InvalidConfig(m.into()));
        if self.buffer_capacity == 0 || self.sil_capacity == 0 {
            return bad("buffer capacities must be positive");
        }
        if self.sac.batch_size == 0 || self.sil_batch_size == 0 {
            return bad("batch sizes must be positive");
        }
        if !(self.updates_per_transition >= 0.0 && self.updates_per_transition.is_finite()) {
            return bad("updates_per_transition must be finite and non-negative");
        }
        if !(self.sil_coef >= 0.0) {
            return bad("sil_coef must be non-negative");
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return bad("final_lr_fraction must lie in (0, 1]");
        }
        if let SilWeight::Exponential { beta, max } = self.sil_weight {
            if !(beta > 0.0 && max > 0.0) {
                return bad("exponential weights need positive beta and max");
            }
        }
        Ok(())
    }
}
