//! Subgoal-conditioned subtask policies: training with SAC, hindsight
//! relabeling and a demonstration regularizer, then frozen rollouts.

use serde::{Deserialize, Serialize};

use crate::envcore::{EpisodeTrajectory, GoalEnv, SimRng, State, Transition};
use crate::error::{Error, Result};
use crate::rl::{her_relabel, DemoTerm, ReplayBuffer, SacAgent, SacConfig};
use crate::tasks::Demonstration;
use crate::tensorlite::Checkpoint;

/// Scale applied to `subgoal - achieved` in the policy input.
const GOAL_OFFSET_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillConfig {
    pub sac: SacConfig,
    /// Environment step budget per subtask.
    pub max_env_steps: u64,
    pub her_k: usize,
    pub buffer_capacity: usize,
    pub updates_per_step: usize,
    /// Environment steps between greedy evaluations.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Training stops once a greedy evaluation reaches this success rate.
    pub early_stop: f64,
    /// Episodes of the final convergence check.
    pub gate_episodes: usize,
    /// Success rate the final check must reach.
    pub gate_threshold: f64,
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig {
                hidden: 64,
                layers: 3,
                lr: 1e-3,
                batch_size: 128,
                ..SacConfig::default()
            },
            max_env_steps: 60_000,
            her_k: 4,
            buffer_capacity: 1_000_000,
            updates_per_step: 1,
            eval_interval: 2_000,
            eval_episodes: 50,
            early_stop: 0.95,
            gate_episodes: 100,
            gate_threshold: 0.9,
        }
    }
}

/// Policy input for subtask `i`: environment features, the subgoal and the
/// scaled offset from the achieved subgoal to the subgoal.
pub fn skill_observation<E: GoalEnv + ?Sized>(env: &E, i: usize, state: &[f64], subgoal: &[f64]) -> Vec<f64> {
    let mut obs = env.observation(state);
    obs.extend_from_slice(subgoal);
    let achieved = env.achieved_subgoal(i, state);
    obs.extend(
        subgoal
            .iter()
            .zip(&achieved)
            .map(|(g, a)| GOAL_OFFSET_SCALE * (g - a)),
    );
    obs
}

fn observation_dim<E: GoalEnv + ?Sized>(env: &E, i: usize) -> Result<usize> {
    let spec = env.spec();
    let g = spec.subtask(i)?.subgoal_space.center();
    Ok(skill_observation(env, i, &vec![0.0; spec.state_dim], &g).len())
}

/// A trained subtask policy. Once frozen its parameters cannot change.
#[derive(Debug, Clone)]
pub struct SkillPolicy {
    index: usize,
    agent: SacAgent,
    frozen: bool,
}

impl SkillPolicy {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn checksum(&self) -> u64 {
        self.agent.checksum()
    }

    pub fn act<E: GoalEnv + ?Sized>(
        &self,
        env: &E,
        state: &[f64],
        subgoal: &[f64],
        deterministic: bool,
        rng: &mut SimRng,
    ) -> Result<Vec<f64>> {
        let obs = skill_observation(env, self.index, state, subgoal);
        self.agent.act(&obs, deterministic, rng)
    }

    pub fn save_into(&self, ck: &mut Checkpoint) {
        self.agent.save_into(ck, &format!("skill{}", self.index));
        ck.push_scalars(
            &format!("skill{}.meta", self.index),
            &[self.index as f64, if self.frozen { 1.0 } else { 0.0 }],
        );
    }

    pub fn load_from(ck: &Checkpoint, index: usize, cfg: SacConfig) -> Result<Self> {
        let agent = SacAgent::load_from(ck, &format!("skill{index}"), cfg)?;
        let meta = ck.scalars(&format!("skill{index}.meta"))?;
        Ok(Self {
            index,
            agent,
            frozen: meta.get(1) == Some(&1.0),
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut ck = Checkpoint::new();
        self.save_into(&mut ck);
        ck.save(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>, index: usize, cfg: SacConfig) -> Result<Self> {
        Self::load_from(&Checkpoint::load(path)?, index, cfg)
    }
}

/// Outcome of one subtask rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillRolloutResult {
    pub trajectory: EpisodeTrajectory,
    pub success: bool,
    pub terminal: State,
    /// Sum of subtask rewards; the rollout stops at the first reward, so this
    /// equals `success as u8`.
    pub subtask_return: f64,
    pub steps: usize,
}

/// Runs skill `policy` toward `subgoal`. With `start` the environment is first
/// placed there (restarting its step counter); otherwise the rollout continues
/// from the current state. At most `T_i` steps, stopping early on success or
/// when the environment episode ends.
pub fn rollout_subtask<E: GoalEnv + ?Sized>(
    policy: &SkillPolicy,
    env: &mut E,
    start: Option<&[f64]>,
    subgoal: &[f64],
    deterministic: bool,
    rng: &mut SimRng,
) -> Result<SkillRolloutResult> {
    run_subtask(env, policy.index, start, subgoal, rng, |env, s, rng| {
        policy.act(env, s, subgoal, deterministic, rng)
    })
}

fn run_subtask<E, F>(
    env: &mut E,
    i: usize,
    start: Option<&[f64]>,
    subgoal: &[f64],
    rng: &mut SimRng,
    mut policy: F,
) -> Result<SkillRolloutResult>
where
    E: GoalEnv + ?Sized,
    F: FnMut(&E, &[f64], &mut SimRng) -> Result<Vec<f64>>,
{
    let sub = env.spec().subtask(i)?.clone();
    if !sub.subgoal_space.contains(subgoal) {
        return Err(Error::InvalidSubgoal(i));
    }
    if let Some(s) = start {
        env.set_state(s)?;
    }
    let mut state = env.state();
    let mut success = env.subtask_reward(i, &state, subgoal) == 1.0;
    let mut transitions = Vec::new();
    while !success && transitions.len() < sub.horizon {
        let action = policy(env, &state, rng)?;
        let step = env.step(&action)?;
        let r = env.subtask_reward(i, &step.state, subgoal);
        success = r == 1.0;
        transitions.push(Transition {
            state: std::mem::take(&mut state),
            action,
            reward: r,
            next_state: step.state.clone(),
            done: success || transitions.len() + 1 == sub.horizon || step.done,
            goal: subgoal.to_vec(),
            achieved: env.achieved_subgoal(i, &step.state),
        });
        state = step.state;
        if step.done {
            break;
        }
    }
    let steps = transitions.len();
    Ok(SkillRolloutResult {
        trajectory: EpisodeTrajectory {
            subtask: i,
            goal: subgoal.to_vec(),
            transitions,
            success,
        },
        success,
        terminal: state,
        subtask_return: if success { 1.0 } else { 0.0 },
        steps,
    })
}

/// Summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillReport {
    pub subtask: usize,
    pub env_steps: u64,
    pub updates: u64,
    /// Greedy success rate on the convergence check.
    pub success_rate: f64,
    pub converged: bool,
    /// `(env_steps, greedy success)` at every evaluation.
    pub curve: Vec<(u64, f64)>,
}

impl SkillReport {
    /// Turns an unconverged run into an error.
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::Training(format!(
                "skill {} reached {:.2} success after {} steps",
                self.subtask, self.success_rate, self.env_steps
            )))
        }
    }
}

/// Greedy (or stochastic) success rate of `policy` over `episodes` fresh
/// (initiation state, uniform subgoal) pairs.
pub fn evaluate_skill<E: GoalEnv + ?Sized>(
    policy: &SkillPolicy,
    env: &mut E,
    episodes: usize,
    deterministic: bool,
    rng: &mut SimRng,
) -> Result<f64> {
    evaluate_skill_in(policy, env, episodes, deterministic, None, rng)
}

/// As [`evaluate_skill`], with subgoals drawn from `region` when given.
pub fn evaluate_skill_in<E: GoalEnv + ?Sized>(
    policy: &SkillPolicy,
    env: &mut E,
    episodes: usize,
    deterministic: bool,
    region: Option<&crate::envcore::BoxSpace>,
    rng: &mut SimRng,
) -> Result<f64> {
    let i = policy.index;
    let space = region
        .cloned()
        .unwrap_or_else(|| env.spec().subtasks[i - 1].subgoal_space.clone());
    let mut wins = 0usize;
    for _ in 0..episodes {
        let start = env.subtask_reset(i, rng)?;
        let g = space.sample(rng);
        if rollout_subtask(policy, env, Some(&start), &g, deterministic, rng)?.success {
            wins += 1;
        }
    }
    Ok(wins as f64 / episodes.max(1) as f64)
}

fn push_relabeled<E: GoalEnv + ?Sized>(
    env: &E,
    i: usize,
    episode: &EpisodeTrajectory,
    k: usize,
    buffer: &mut ReplayBuffer,
    rng: &mut SimRng,
) -> Result<()> {
    let relabeled = her_relabel(episode, k, rng, |s, g| env.subtask_reward(i, s, g));
    for tr in relabeled {
        let obs = skill_observation(env, i, &tr.state, &tr.goal);
        let next = skill_observation(env, i, &tr.next_state, &tr.goal);
        buffer.push(&obs, &tr.action, tr.reward, &next, tr.reward == 1.0)?;
    }
    Ok(())
}

fn demo_episode<E: GoalEnv + ?Sized>(env: &E, i: usize, d: &Demonstration) -> EpisodeTrajectory {
    let transitions = d
        .actions
        .iter()
        .enumerate()
        .map(|(t, a)| {
            let next = &d.states[t + 1];
            let r = env.subtask_reward(i, next, &d.subgoal);
            Transition {
                state: d.states[t].clone(),
                action: a.clone(),
                reward: r,
                next_state: next.clone(),
                done: r == 1.0 || t + 1 == d.actions.len(),
                goal: d.subgoal.clone(),
                achieved: env.achieved_subgoal(i, next),
            }
        })
        .collect();
    EpisodeTrajectory {
        subtask: i,
        goal: d.subgoal.clone(),
        transitions,
        success: d.success,
    }
}

/// Trains the policy of subtask `i`. Episodes start from the subtask's
/// initiation set with uniform subgoals; demonstrations seed the replay
/// buffer and drive the actor regularizer. The returned report says whether
/// the greedy policy passed the convergence check; the policy comes back
/// frozen either way.
pub fn train_subtask_policy<E: GoalEnv + ?Sized>(
    env: &mut E,
    i: usize,
    demos: &[Demonstration],
    cfg: &SkillConfig,
    rng: &mut SimRng,
) -> Result<(SkillPolicy, SkillReport)> {
    train_subtask_policy_with(env, i, demos, cfg, rng, |_, _| {})
}

/// As [`train_subtask_policy`], calling `on_eval(env_steps, success)` after
/// every evaluation.
pub fn train_subtask_policy_with<E, F>(
    env: &mut E,
    i: usize,
    demos: &[Demonstration],
    cfg: &SkillConfig,
    rng: &mut SimRng,
    mut on_eval: F,
) -> Result<(SkillPolicy, SkillReport)>
where
    E: GoalEnv + ?Sized,
    F: FnMut(u64, f64),
{
    let spec = env.spec().clone();
    let sub = spec.subtask(i)?.clone();
    if demos.iter().any(|d| d.subtask != i) {
        return Err(Error::Demonstration(format!(
            "demonstrations for another subtask passed to skill {i}"
        )));
    }
    let obs_dim = observation_dim(env, i)?;
    let act_dim = spec.action_dim;
    let agent = SacAgent::new(obs_dim, act_dim, cfg.sac.clone(), rng)?;
    let mut policy = SkillPolicy {
        index: i,
        agent,
        frozen: false,
    };
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim);

    let mut demo_obs = Vec::new();
    let mut demo_act = Vec::new();
    for d in demos {
        for (s, a) in d.states.iter().zip(&d.actions) {
            demo_obs.extend(skill_observation(env, i, s, &d.subgoal));
            demo_act.extend_from_slice(a);
        }
        push_relabeled(env, i, &demo_episode(env, i, d), cfg.her_k, &mut buffer, rng)?;
    }
    let demo_rows = demo_act.len() / act_dim;

    let batch = cfg.sac.batch_size;
    let mut env_steps = 0u64;
    let mut next_eval = cfg.eval_interval.max(1);
    let mut curve = Vec::new();
    let mut gated = None;
    let mut sel_obs = Vec::with_capacity(batch * obs_dim);
    let mut sel_act = Vec::with_capacity(batch * act_dim);
    'outer: while env_steps < cfg.max_env_steps {
        let start = env.subtask_reset(i, rng)?;
        let subgoal = sub.subgoal_space.sample(rng);
        let result = {
            let agent = &policy.agent;
            let mut state = start;
            let mut transitions = Vec::new();
            let mut success = env.subtask_reward(i, &state, &subgoal) == 1.0;
            while !success && transitions.len() < sub.horizon && env_steps < cfg.max_env_steps {
                let obs = skill_observation(env, i, &state, &subgoal);
                let action = agent.act(&obs, false, rng)?;
                let step = env.step(&action)?;
                env_steps += 1;
                let r = env.subtask_reward(i, &step.state, &subgoal);
                success = r == 1.0;
                let ended = step.done;
                transitions.push(Transition {
                    state,
                    action,
                    reward: r,
                    next_state: step.state.clone(),
                    done: success || ended,
                    goal: subgoal.clone(),
                    achieved: env.achieved_subgoal(i, &step.state),
                });
                state = step.state;
                if ended {
                    break;
                }
            }
            EpisodeTrajectory {
                subtask: i,
                goal: subgoal.clone(),
                transitions,
                success,
            }
        };
        push_relabeled(env, i, &result, cfg.her_k, &mut buffer, rng)?;

        if buffer.len() >= batch {
            let n_updates = result.len() * cfg.updates_per_step;
            for _ in 0..n_updates {
                let b = buffer.sample(batch, rng);
                // success ends the episode and pays 1, so returns lie in [0, 1]
                policy.agent.critic_update_bounded(&b, 0.0, 1.0, rng)?;
                let demo = if demo_rows > 0 {
                    sel_obs.clear();
                    sel_act.clear();
                    for _ in 0..batch {
                        let r = rand::Rng::random_range(&mut *rng, 0..demo_rows);
                        sel_obs.extend_from_slice(&demo_obs[r * obs_dim..(r + 1) * obs_dim]);
                        sel_act.extend_from_slice(&demo_act[r * act_dim..(r + 1) * act_dim]);
                    }
                    Some(DemoTerm {
                        obs: &sel_obs,
                        actions: &sel_act,
                        n: batch,
                        coef: cfg.sac.demo_coef_at(env_steps),
                    })
                } else {
                    None
                };
                policy.agent.actor_update(&b.obs, b.n, demo, None, rng)?;
            }
        }

        if env_steps >= next_eval {
            next_eval += cfg.eval_interval.max(1);
            let rate = evaluate_skill(&policy, env, cfg.eval_episodes, true, rng)?;
            curve.push((env_steps, rate));
            on_eval(env_steps, rate);
            // a short eval can overshoot, so stopping early needs the gate too
            if rate >= cfg.early_stop {
                let gate = evaluate_skill(&policy, env, cfg.gate_episodes, true, rng)?;
                if gate >= cfg.gate_threshold {
                    gated = Some(gate);
                    break 'outer;
                }
            }
        }
    }

    let success_rate = match gated {
        Some(r) => r,
        None => evaluate_skill(&policy, env, cfg.gate_episodes, true, rng)?,
    };
    policy.freeze();
    let report = SkillReport {
        subtask: i,
        env_steps,
        updates: policy.agent.updates(),
        success_rate,
        converged: success_rate >= cfg.gate_threshold,
        curve,
    };
    Ok((policy, report))
}

/// An untrained, frozen policy for subtask `i` (useful as a control).
pub fn untrained_policy<E: GoalEnv + ?Sized>(env: &E, i: usize, cfg: &SacConfig, rng: &mut SimRng) -> Result<SkillPolicy> {
    let obs_dim = observation_dim(env, i)?;
    Ok(SkillPolicy {
        index: i,
        agent: SacAgent::new(obs_dim, env.spec().action_dim, cfg.clone(), rng)?,
        frozen: true,
    })
}
