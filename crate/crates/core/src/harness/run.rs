use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_flat, train_discriminators, train_flat, train_gcbc, Discriminator, FlatPolicy};
use crate::chaining::{evaluate_chain, train_chain, ChainAgent, SkillChainEnv, ValueRule};
use crate::envcore::{stream_rng, ChainEnv};
use crate::error::{Error, Result};
use crate::skills::{train_subtask_policy_with, SkillPolicy, SkillReport};
use crate::tasks::{collect_demonstrations, collect_task_demonstrations, load_demos, make_chain_world, make_planar_transfer, save_demos, PlanarTransferEnv};
use crate::tensorlite::Checkpoint;

use super::calibration::{value_calibration_report, CalibrationReport};
use super::config::{ExperimentConfig, MethodName, TaskName};
use super::metrics::{append_metrics, EvalMetrics, MetricsRow};

/// Random stream of each stage, so that a stage run on its own draws the
/// same numbers as inside a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Demos = 1,
    Skills = 2,
    Policy = 3,
    Eval = 4,
    Calibrate = 5,
}

fn rng_for(seed: u64, s: Stream) -> crate::envcore::SimRng {
    stream_rng(seed, s as u64)
}

/// Number of subtasks of the configured task.
pub fn num_subtasks(cfg: &ExperimentConfig) -> usize {
    match cfg.chain_world_config() {
        Some(w) => w.num_subtasks(),
        None => 3,
    }
}

struct Rows<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    start: Instant,
    rows: Vec<MetricsRow>,
}

impl<'a> Rows<'a> {
    fn new(cfg: &'a ExperimentConfig, seed: u64) -> Self {
        Self {
            cfg,
            seed,
            start: Instant::now(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, stage: &str, step: u64, success: f64, completion: Option<f64>, length: Option<f64>) {
        self.rows.push(MetricsRow {
            task: self.cfg.task.as_str().into(),
            method: self.cfg.method.as_str().into(),
            seed: self.seed,
            stage: stage.into(),
            step,
            success_rate: Some(success),
            subtask_completion: completion,
            rollout_length: length,
            wallclock_s: self.cfg.record_wallclock.then(|| self.start.elapsed().as_secs_f64()),
        });
    }

    fn flush(&mut self) -> Result<()> {
        if !self.rows.is_empty() {
            std::fs::create_dir_all(&self.cfg.out_dir)?;
            append_metrics(self.cfg.metrics_path()?, &self.rows)?;
            self.rows.clear();
        }
        Ok(())
    }
}

fn planar(cfg: &ExperimentConfig, seed: u64) -> Result<PlanarTransferEnv> {
    if cfg.task != TaskName::PlanarTransfer {
        return Err(Error::InvalidConfig(format!(
            "{} has no low-level environment",
            cfg.task.as_str()
        )));
    }
    make_planar_transfer(&cfg.planar, seed)
}

/// Scripted demonstrations for every subtask, plus whole-task ones for the
/// undecomposed baselines. Chain worlds need none and write nothing.
/// One file per subtask (`demos1.bin`..) and `demos0.bin` for the whole task.
pub fn collect_demos(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<PathBuf>> {
    if !cfg.task.has_skills() {
        return Ok(Vec::new());
    }
    let mut env = planar(cfg, seed)?;
    let mut rng = rng_for(seed, Stream::Demos);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut paths = Vec::new();
    for i in 1..=num_subtasks(cfg) {
        let demos = collect_demonstrations(&mut env, i, cfg.demos.per_subtask, &mut rng)?;
        paths.push(demo_path(cfg, seed, i)?);
        save_demos(&paths[i - 1], &demos)?;
    }
    if !cfg.method.is_chained() {
        let demos = collect_task_demonstrations(&mut env, cfg.demos.whole_task, &mut rng)?;
        paths.push(demo_path(cfg, seed, 0)?);
        save_demos(paths.last().unwrap(), &demos)?;
    }
    Ok(paths)
}

fn demo_path(cfg: &ExperimentConfig, seed: u64, i: usize) -> Result<PathBuf> {
    cfg.artifact(seed, &format!("demos{i}.bin"))
}

fn skill_path(cfg: &ExperimentConfig, seed: u64, i: usize) -> Result<PathBuf> {
    cfg.artifact(seed, &format!("skill{i}.ck"))
}

/// Trains and freezes one policy per subtask from the stored demonstrations.
/// Fails if any skill misses the convergence gate.
pub fn train_skills(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SkillReport>> {
    if !cfg.task.has_skills() {
        return Ok(Vec::new());
    }
    let mut env = planar(cfg, seed)?;
    let mut rng = rng_for(seed, Stream::Skills);
    let mut rows = Rows::new(cfg, seed);
    let mut reports = Vec::new();
    for i in 1..=num_subtasks(cfg) {
        let mine = load_demos(demo_path(cfg, seed, i)?)?;
        let stage = format!("skill{i}");
        let (policy, report) = train_subtask_policy_with(&mut env, i, &mine, &cfg.skills, &mut rng, |steps, rate| {
            rows.push(&stage, steps, rate, None, None)
        })?;
        rows.flush()?;
        report.require_converged()?;
        policy.save(skill_path(cfg, seed, i)?)?;
        reports.push(report);
    }
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(cfg.artifact(seed, "skills.json")?, text)?;
    Ok(reports)
}

fn load_skills(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SkillPolicy>> {
    (1..=num_subtasks(cfg))
        .map(|i| SkillPolicy::load(skill_path(cfg, seed, i)?, i, cfg.skills.sac.clone()))
        .collect()
}

/// The boundary-level environment of the task: frozen skills over the planar
/// task, or the chain world itself.
pub fn chain_env(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn ChainEnv>> {
    match cfg.chain_world_config() {
        Some(w) => Ok(Box::new(make_chain_world(&w)?)),
        None => Ok(Box::new(SkillChainEnv::new(planar(cfg, seed)?, load_skills(cfg, seed)?)?)),
    }
}

/// Sum of the skills' environment steps, the default flat budget.
fn skill_env_steps(cfg: &ExperimentConfig, seed: u64) -> Result<u64> {
    let text = std::fs::read_to_string(cfg.artifact(seed, "skills.json")?)?;
    let reports: Vec<SkillReport> = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    Ok(reports.iter().map(|r| r.env_steps).sum())
}

fn skill_checksums(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<u64>> {
    if !cfg.task.has_skills() {
        return Ok(Vec::new());
    }
    Ok(load_skills(cfg, seed)?.iter().map(SkillPolicy::checksum).collect())
}

/// Trains the configured method's policy (chaining agent or whole-task
/// baseline) and stores its checkpoint.
pub fn train_policy(cfg: &ExperimentConfig, seed: u64) -> Result<PathBuf> {
    let mut rng = rng_for(seed, Stream::Policy);
    let mut rows = Rows::new(cfg, seed);
    let mut ck = Checkpoint::new();
    if cfg.method.is_chained() {
        let before = skill_checksums(cfg, seed)?;
        let mut env = chain_env(cfg, seed)?;
        let mut chain_cfg = cfg.chain.clone();
        if cfg.method != MethodName::Viskill {
            chain_cfg.sil_coef = 0.0;
        }
        let rule = match cfg.method {
            MethodName::ViskillSr => ValueRule::SubtaskReward,
            MethodName::ViskillDm => ValueRule::Discriminator(train_discriminators(env.as_mut(), &cfg.discriminator, &mut rng)?),
            MethodName::ViskillLdm => ValueRule::LongDiscriminator(train_discriminators(env.as_mut(), &cfg.discriminator, &mut rng)?),
            _ => ValueRule::WholeTask,
        };
        let agent = if cfg.method == MethodName::Naive {
            ChainAgent::uniform(env.as_ref(), &chain_cfg, &mut rng)?
        } else {
            let mut agent = ChainAgent::new(env.as_ref(), &chain_cfg, &mut rng)?;
            train_chain(&mut agent, env.as_mut(), &rule, &chain_cfg, &mut rng, |n, e| {
                rows.push("chain", n, e.success_rate, Some(e.subtask_completion), Some(e.rollout_length))
            })?;
            agent
        };
        if let ValueRule::Discriminator(ds) | ValueRule::LongDiscriminator(ds) = &rule {
            for (j, d) in ds.iter().enumerate() {
                d.save_into(&mut ck, &format!("disc{}", j + 1));
            }
        }
        agent.save_into(&mut ck, "chain");
        if skill_checksums(cfg, seed)? != before {
            return Err(Error::Training("skill parameters changed during chaining".into()));
        }
    } else {
        let demos = load_demos(demo_path(cfg, seed, 0)?)?;
        let mut env = planar(cfg, seed)?;
        let policy = if cfg.method == MethodName::Gcbc {
            train_gcbc(&env, &demos, &cfg.gcbc, &mut rng)?.0
        } else {
            let mut flat_cfg = cfg.flat.clone();
            if cfg.flat_matches_skills {
                flat_cfg.env_steps = skill_env_steps(cfg, seed)?;
            }
            let (policy, curve) = train_flat(&mut env, &demos, &flat_cfg, cfg.skills.eval_interval, cfg.skills.eval_episodes, &mut rng)?;
            for (n, rate) in curve {
                rows.push("baseline", n, rate, None, None);
            }
            policy
        };
        policy.save_into(&mut ck);
    }
    rows.flush()?;
    let path = cfg.artifact(seed, "policy.ck")?;
    ck.save(&path)?;
    Ok(path)
}

fn load_agent(cfg: &ExperimentConfig, seed: u64, env: &dyn ChainEnv) -> Result<ChainAgent> {
    let ck = Checkpoint::load(cfg.artifact(seed, "policy.ck")?)?;
    ChainAgent::load_from(&ck, "chain", env, cfg.chain.sac.clone())
}

/// Stored discriminators of a DM or LDM run.
pub fn load_discriminators(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Discriminator>> {
    let ck = Checkpoint::load(cfg.artifact(seed, "policy.ck")?)?;
    (1..num_subtasks(cfg))
        .map(|j| Discriminator::load_from(&ck, &format!("disc{j}"), cfg.discriminator.lr))
        .collect()
}

/// Deterministic evaluation of the stored policy over `cfg.eval_episodes`
/// episodes; appends an `eval` row (step 0) to the metrics.
pub fn evaluate(cfg: &ExperimentConfig, seed: u64) -> Result<EvalMetrics> {
    let mut rng = rng_for(seed, Stream::Eval);
    let metrics: EvalMetrics = if cfg.method.is_chained() {
        let mut env = chain_env(cfg, seed)?;
        let agent = load_agent(cfg, seed, env.as_ref())?;
        evaluate_chain(&agent, env.as_mut(), cfg.eval_episodes, &mut rng)?.into()
    } else {
        let ck = Checkpoint::load(cfg.artifact(seed, "policy.ck")?)?;
        let policy = FlatPolicy::load_from(&ck, cfg.flat.sac.clone())?;
        let mut env = planar(cfg, seed)?;
        evaluate_flat(&policy, &mut env, cfg.eval_episodes, &mut rng)?.into()
    };
    let mut rows = Rows::new(cfg, seed);
    rows.push("eval", 0, metrics.success_rate, Some(metrics.subtask_completion), Some(metrics.rollout_length));
    rows.flush()?;
    Ok(metrics)
}

/// Value calibration of a stored chaining agent; writes the report as JSON.
pub fn calibrate(cfg: &ExperimentConfig, seed: u64) -> Result<CalibrationReport> {
    if !cfg.method.is_chained() {
        return Err(Error::InvalidConfig(format!(
            "{} has no critic to calibrate",
            cfg.method.as_str()
        )));
    }
    let mut rng = rng_for(seed, Stream::Calibrate);
    let mut env = chain_env(cfg, seed)?;
    let agent = load_agent(cfg, seed, env.as_ref())?;
    let c = &cfg.calibration;
    let report = value_calibration_report(&agent, env.as_mut(), c.buckets, c.per_bucket, c.explore, c.value_samples, &mut rng)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(cfg.artifact(seed, "calibration.json")?, text)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    pub stage: String,
    pub status: StageStatus,
    pub error: Option<String>,
    pub seconds: f64,
}

/// Identifies every output of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub task: String,
    pub method: String,
    pub seeds: Vec<u64>,
    pub metrics: PathBuf,
    pub stages: Vec<StageRecord>,
    /// Final evaluation per completed seed.
    pub evaluations: Vec<(u64, EvalMetrics)>,
}

impl RunManifest {
    pub fn failed(&self) -> bool {
        self.stages.iter().any(|s| s.status == StageStatus::Failed)
    }

    fn write(&self, cfg: &ExperimentConfig) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(cfg.manifest_path()?, text)?;
        Ok(())
    }
}

/// Runs every stage for every seed in order, starting a fresh metrics file.
/// A failing stage is recorded in the manifest and ends that seed; the
/// other seeds still run and earlier outputs stay on disk. The manifest is
/// rewritten after every stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let metrics = cfg.metrics_path()?;
    if metrics.exists() {
        std::fs::remove_file(&metrics)?;
    }
    std::fs::write(cfg.out_dir.join(format!("config-{}.toml", cfg.hash()?)), cfg.to_toml()?)?;
    let mut manifest = RunManifest {
        config_hash: cfg.hash()?,
        version: env!("CARGO_PKG_VERSION").into(),
        task: cfg.task.as_str().into(),
        method: cfg.method.as_str().into(),
        seeds: cfg.seeds.clone(),
        metrics,
        stages: Vec::new(),
        evaluations: Vec::new(),
    };
    manifest.write(cfg)?;
    for &seed in &cfg.seeds {
        let mut stages: Vec<&str> = Vec::new();
        if cfg.task.has_skills() {
            stages.extend(["collect-demos", "train-skills"]);
        }
        stages.push(if cfg.method.is_chained() { "train-chain" } else { "train-baseline" });
        stages.push("eval");
        if cfg.method.is_chained() {
            stages.push("calibrate");
        }
        for stage in stages {
            let t = Instant::now();
            let out = match stage {
                "collect-demos" => collect_demos(cfg, seed).map(|_| ()),
                "train-skills" => train_skills(cfg, seed).map(|_| ()),
                "eval" => evaluate(cfg, seed).map(|m| manifest.evaluations.push((seed, m))),
                "calibrate" => calibrate(cfg, seed).map(|_| ()),
                _ => train_policy(cfg, seed).map(|_| ()),
            };
            manifest.stages.push(StageRecord {
                seed,
                stage: stage.into(),
                status: if out.is_ok() { StageStatus::Ok } else { StageStatus::Failed },
                error: out.as_ref().err().map(|e| e.to_string()),
                seconds: t.elapsed().as_secs_f64(),
            });
            manifest.write(cfg)?;
            if out.is_err() {
                break;
            }
        }
    }
    Ok(manifest)
}
