//! Undecomposed policies acting on the whole task.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chaining::ChainEval;
use crate::envcore::{EpisodeTrajectory, Goal, GoalEnv, SimRng, Transition};
use crate::error::{Error, Result};
use crate::rl::{her_relabel, DemoTerm, ReplayBuffer, SacAgent, SacConfig};
use crate::skills::skill_observation;
use crate::tasks::Demonstration;
use crate::tensorlite::{Checkpoint, Mlp};

/// Input of a whole-task policy: features, the goal and the scaled offset of
/// the goal from the achieved position.
pub fn task_observation<E: GoalEnv + ?Sized>(env: &E, state: &[f64], goal: &[f64]) -> Vec<f64> {
    skill_observation(env, env.spec().num_subtasks(), state, goal)
}

/// A whole-task policy.
#[derive(Debug, Clone)]
pub enum FlatPolicy {
    /// Behaviour-cloned network mapping observations to actions.
    Cloned(Mlp),
    /// Reinforcement-learned actor.
    Sac(SacAgent),
}

impl FlatPolicy {
    pub fn act<E: GoalEnv + ?Sized>(&self, env: &E, state: &[f64], deterministic: bool, rng: &mut SimRng) -> Result<Vec<f64>> {
        let obs = task_observation(env, state, &env.goal().values);
        match self {
            FlatPolicy::Cloned(net) => net.forward(&obs, 1),
            FlatPolicy::Sac(agent) => agent.act(&obs, deterministic, rng),
        }
    }

    pub fn checksum(&self) -> u64 {
        match self {
            FlatPolicy::Cloned(net) => net.checksum(),
            FlatPolicy::Sac(agent) => agent.checksum(),
        }
    }

    pub fn save_into(&self, ck: &mut Checkpoint) {
        match self {
            FlatPolicy::Cloned(net) => ck.push_network("flat.cloned", net, None),
            FlatPolicy::Sac(agent) => agent.save_into(ck, "flat.sac"),
        }
    }

    /// Restores either variant; `sac` configures a reinforcement-learned one.
    pub fn load_from(ck: &Checkpoint, sac: SacConfig) -> Result<Self> {
        if ck.entries().iter().any(|(n, _)| n == "flat.cloned") {
            Ok(FlatPolicy::Cloned(ck.network("flat.cloned")?.0))
        } else {
            Ok(FlatPolicy::Sac(SacAgent::load_from(ck, "flat.sac", sac)?))
        }
    }
}

/// One whole-task episode from a fresh reset: (success, completed subtasks,
/// steps).
pub fn flat_episode<E: GoalEnv + ?Sized>(policy: &FlatPolicy, env: &mut E, deterministic: bool, rng: &mut SimRng) -> Result<(bool, usize, usize)> {
    let (mut state, _) = env.reset(rng);
    let mut done_subtasks = env.completed_subtasks(&state, 0);
    let mut steps = 0;
    loop {
        let action = policy.act(env, &state, deterministic, rng)?;
        let step = env.step(&action)?;
        steps += 1;
        state = step.state;
        done_subtasks = env.completed_subtasks(&state, done_subtasks);
        if step.done {
            return Ok((step.reward == 1.0, done_subtasks, steps));
        }
    }
}

/// Greedy evaluation over `episodes` whole-task episodes.
pub fn evaluate_flat<E: GoalEnv + ?Sized>(policy: &FlatPolicy, env: &mut E, episodes: usize, rng: &mut SimRng) -> Result<ChainEval> {
    let log = (0..episodes)
        .map(|_| flat_episode(policy, env, true, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::chaining::summarize(log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatConfig {
    pub sac: SacConfig,
    /// Environment steps; the harness sets this to what the skills used.
    pub env_steps: u64,
    pub her_k: usize,
    pub buffer_capacity: usize,
}

impl Default for FlatConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig {
                hidden: 64,
                layers: 3,
                lr: 1e-3,
                batch_size: 128,
                ..SacConfig::default()
            },
            env_steps: 60_000,
            her_k: 4,
            buffer_capacity: 1_000_000,
        }
    }
}

fn task_reward_for<E: GoalEnv + ?Sized>(env: &E, state: &[f64], goal: &[f64]) -> f64 {
    env.task_reward(
        state,
        &Goal {
            values: goal.to_vec(),
            tolerance: env.goal().tolerance,
        },
    )
}

fn push_task_episode<E: GoalEnv + ?Sized>(env: &E, ep: &EpisodeTrajectory, k: usize, buffer: &mut ReplayBuffer, rng: &mut SimRng) -> Result<()> {
    for tr in her_relabel(ep, k, rng, |s, g| task_reward_for(env, s, g)) {
        let obs = task_observation(env, &tr.state, &tr.goal);
        let next = task_observation(env, &tr.next_state, &tr.goal);
        buffer.push(&obs, &tr.action, tr.reward, &next, tr.reward == 1.0)?;
    }
    Ok(())
}

fn demo_trajectory<E: GoalEnv + ?Sized>(env: &E, d: &Demonstration) -> EpisodeTrajectory {
    let k = env.spec().num_subtasks();
    let transitions = d
        .actions
        .iter()
        .enumerate()
        .map(|(t, a)| {
            let next = &d.states[t + 1];
            let r = task_reward_for(env, next, &d.subgoal);
            Transition {
                state: d.states[t].clone(),
                action: a.clone(),
                reward: r,
                next_state: next.clone(),
                done: r == 1.0 || t + 1 == d.actions.len(),
                goal: d.subgoal.clone(),
                achieved: env.achieved_subgoal(k, next),
            }
        })
        .collect();
    EpisodeTrajectory {
        subtask: 0,
        goal: d.subgoal.clone(),
        transitions,
        success: d.success,
    }
}

/// Trains a single SAC agent on the whole task with the sparse task reward,
/// hindsight goals and the demonstration regularizer. Returns the policy and
/// its greedy success curve `(env_steps, success)` sampled every
/// `eval_interval` steps when `eval_episodes > 0`.
pub fn train_flat<E: GoalEnv + ?Sized>(
    env: &mut E,
    demos: &[Demonstration],
    cfg: &FlatConfig,
    eval_interval: u64,
    eval_episodes: usize,
    rng: &mut SimRng,
) -> Result<(FlatPolicy, Vec<(u64, f64)>)> {
    if demos.iter().any(|d| d.subtask != 0) {
        return Err(Error::Demonstration(
            "the flat agent needs whole-task demonstrations".into(),
        ));
    }
    let (s0, g0) = env.reset(rng);
    let obs_dim = task_observation(env, &s0, &g0.values).len();
    let act_dim = env.spec().action_dim;
    let mut agent = SacAgent::new(obs_dim, act_dim, cfg.sac.clone(), rng)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim);
    let mut demo_obs = Vec::new();
    let mut demo_act = Vec::new();
    for d in demos {
        for (s, a) in d.states.iter().zip(&d.actions) {
            demo_obs.extend(task_observation(env, s, &d.subgoal));
            demo_act.extend_from_slice(a);
        }
        push_task_episode(env, &demo_trajectory(env, d), cfg.her_k, &mut buffer, rng)?;
    }
    let demo_rows = demo_act.len() / act_dim;
    let batch = cfg.sac.batch_size;
    let mut sel_obs = Vec::with_capacity(batch * obs_dim);
    let mut sel_act = Vec::with_capacity(batch * act_dim);
    let mut steps = 0u64;
    let mut next_eval = eval_interval.max(1);
    let mut curve = Vec::new();
    while steps < cfg.env_steps {
        let (mut state, goal) = env.reset(rng);
        let mut transitions = Vec::new();
        let mut success = false;
        while steps < cfg.env_steps {
            let obs = task_observation(env, &state, &goal.values);
            let action = agent.act(&obs, false, rng)?;
            let step = env.step(&action)?;
            steps += 1;
            success = step.reward == 1.0;
            transitions.push(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.state.clone(),
                done: step.done,
                goal: goal.values.clone(),
                achieved: env.achieved_subgoal(env.spec().num_subtasks(), &step.state),
            });
            state = step.state;
            if step.done {
                break;
            }
        }
        let ep = EpisodeTrajectory {
            subtask: 0,
            goal: goal.values.clone(),
            transitions,
            success,
        };
        push_task_episode(env, &ep, cfg.her_k, &mut buffer, rng)?;
        if buffer.len() >= batch {
            for _ in 0..ep.len() {
                let b = buffer.sample(batch, rng);
                agent.critic_update_bounded(&b, 0.0, 1.0, rng)?;
                let demo = (demo_rows > 0).then(|| {
                    sel_obs.clear();
                    sel_act.clear();
                    for _ in 0..batch {
                        let r = rng.random_range(0..demo_rows);
                        sel_obs.extend_from_slice(&demo_obs[r * obs_dim..(r + 1) * obs_dim]);
                        sel_act.extend_from_slice(&demo_act[r * act_dim..(r + 1) * act_dim]);
                    }
                    DemoTerm {
                        obs: &sel_obs,
                        actions: &sel_act,
                        n: batch,
                        coef: cfg.sac.demo_coef_at(steps),
                    }
                });
                agent.actor_update(&b.obs, b.n, demo, None, rng)?;
            }
        }
        if eval_episodes > 0 && steps >= next_eval {
            next_eval += eval_interval.max(1);
            let policy = FlatPolicy::Sac(agent.clone());
            curve.push((steps, evaluate_flat(&policy, env, eval_episodes, rng)?.success_rate));
        }
    }
    Ok((FlatPolicy::Sac(agent), curve))
}
