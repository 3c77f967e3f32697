use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{DiscriminatorConfig, FlatConfig, GcbcConfig};
use crate::chaining::ChainConfig;
use crate::error::{Error, Result};
use crate::skills::SkillConfig;
use crate::tasks::{ChainWorldConfig, PlanarConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    PlanarTransfer,
    /// Analytic chain world with a peaked preference (see [`ChainWorldConfig::peaked`]).
    ChainWorld,
    /// Analytic chain world with greedy-vs-global conflict.
    ChainWorldConflict,
}

impl TaskName {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::PlanarTransfer => "planar_transfer",
            TaskName::ChainWorld => "chain_world",
            TaskName::ChainWorldConflict => "chain_world_conflict",
        }
    }

    pub fn has_skills(self) -> bool {
        self == TaskName::PlanarTransfer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Viskill,
    ViskillSr,
    ViskillDm,
    ViskillLdm,
    /// Uniform subgoals in place of the chaining policy.
    Naive,
    Gcbc,
    Flat,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Viskill => "viskill",
            MethodName::ViskillSr => "viskill_sr",
            MethodName::ViskillDm => "viskill_dm",
            MethodName::ViskillLdm => "viskill_ldm",
            MethodName::Naive => "naive",
            MethodName::Gcbc => "gcbc",
            MethodName::Flat => "flat",
        }
    }

    /// Methods whose policy is a chaining agent over frozen skills.
    pub fn is_chained(self) -> bool {
        !matches!(self, MethodName::Gcbc | MethodName::Flat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    /// Scripted demonstrations per subtask.
    pub per_subtask: usize,
    /// Whole-task demonstrations for the undecomposed baselines.
    pub whole_task: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            per_subtask: 200,
            whole_task: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub buckets: usize,
    pub per_bucket: usize,
    /// Probability of a uniform first subgoal instead of the policy's.
    pub explore: f64,
    pub value_samples: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            buckets: 3,
            per_bucket: 25,
            explore: 0.5,
            value_samples: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskName,
    pub method: MethodName,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    /// Fill the `wallclock_s` metrics column. Off by default so that reruns
    /// produce identical files; stage timings always go to the manifest.
    pub record_wallclock: bool,
    pub planar: PlanarConfig,
    /// Overrides the chain world selected by `task`.
    pub chain_world: Option<ChainWorldConfig>,
    pub demos: DemoConfig,
    pub skills: SkillConfig,
    pub chain: ChainConfig,
    pub discriminator: DiscriminatorConfig,
    pub gcbc: GcbcConfig,
    pub flat: FlatConfig,
    /// Give the flat agent as many environment steps as the skills used
    /// in total, overriding `flat.env_steps`.
    pub flat_matches_skills: bool,
    pub calibration: CalibrationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskName::PlanarTransfer,
            method: MethodName::Viskill,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs"),
            eval_episodes: 100,
            record_wallclock: false,
            planar: PlanarConfig::default(),
            chain_world: None,
            demos: DemoConfig::default(),
            skills: SkillConfig::default(),
            chain: ChainConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            gcbc: GcbcConfig::default(),
            flat: FlatConfig::default(),
            flat_matches_skills: true,
            calibration: CalibrationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Checks everything that can be checked before any compute.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        if !self.task.has_skills() && !self.method.is_chained() {
            return bad(format!(
                "method {} needs a low-level environment; {} has none",
                self.method.as_str(),
                self.task.as_str()
            ));
        }
        if self.task.has_skills() && (self.demos.per_subtask == 0 || (!self.method.is_chained() && self.demos.whole_task == 0)) {
            return bad("demonstration counts must be positive".into());
        }
        let c = &self.calibration;
        if c.buckets == 0 || c.per_bucket == 0 || c.value_samples == 0 || !(0.0..=1.0).contains(&c.explore) {
            return bad("calibration needs positive sizes and explore in [0, 1]".into());
        }
        self.chain.validate()?;
        self.skills.sac.validate()?;
        self.chain.sac.validate()?;
        self.flat.sac.validate()?;
        Ok(())
    }

    /// The chain world this task runs on, if it is one.
    pub fn chain_world_config(&self) -> Option<ChainWorldConfig> {
        match self.task {
            TaskName::PlanarTransfer => None,
            TaskName::ChainWorld => Some(self.chain_world.clone().unwrap_or_default()),
            TaskName::ChainWorldConflict => Some(
                self.chain_world
                    .clone()
                    .unwrap_or_else(ChainWorldConfig::conflict),
            ),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form, with
    /// the output directory left out so that moving a run keeps its names.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    /// `{out_dir}/{task}-{method}-s{seed}-{hash}-{suffix}`.
    pub fn artifact(&self, seed: u64, suffix: &str) -> Result<PathBuf> {
        Ok(self.out_dir.join(format!(
            "{}-{}-s{seed}-{}-{suffix}",
            self.task.as_str(),
            self.method.as_str(),
            self.hash()?
        )))
    }

    pub fn metrics_path(&self) -> Result<PathBuf> {
        Ok(self.out_dir.join(format!("metrics-{}.csv", self.hash()?)))
    }

    pub fn manifest_path(&self) -> Result<PathBuf> {
        Ok(self.out_dir.join(format!("manifest-{}.json", self.hash()?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_and_methods_are_rejected() {
        assert!(ExperimentConfig::from_toml("method = \"viskill\"\nlr = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml("method = \"hiro\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[chain]\nbudjet = 3\n").is_err());
    }

    #[test]
    fn text_round_trip_keeps_the_hash() {
        let cfg = ExperimentConfig::from_toml("task = \"chain_world_conflict\"\nseeds = [3, 1]\n[chain]\nbudget = 500\n").unwrap();
        assert_eq!(cfg.chain.budget, 500);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        let mut other = cfg.clone();
        other.chain.budget = 501;
        assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn invalid_combinations_fail_validation() {
        assert!(ExperimentConfig::from_toml("seeds = [1, 1]\n").is_err());
        assert!(ExperimentConfig::from_toml("seeds = []\n").is_err());
        assert!(ExperimentConfig::from_toml("task = \"chain_world\"\nmethod = \"gcbc\"\n").is_err());
    }

    #[test]
    fn artifact_names_carry_the_hash() {
        let cfg = ExperimentConfig::default();
        let h = cfg.hash().unwrap();
        let p = cfg.artifact(4, "skills.ck").unwrap();
        assert!(p.to_string_lossy().contains(&h));
        assert!(cfg.metrics_path().unwrap().to_string_lossy().contains(&h));
    }
}
