use rand::Rng;

use crate::baselines::{value_dm, value_ldm, Discriminator};
use crate::envcore::{ChainEnv, SimRng};
use crate::error::{Error, Result};
use crate::rl::ImitationTerm;

use super::agent::{BoundaryTransition, ChainAgent};
use super::{ChainConfig, SilWeight};

/// How the critic's regression target is formed.
#[derive(Debug, Clone)]
pub enum ValueRule {
    /// Whole-task reward with bootstrapping across boundaries.
    WholeTask,
    /// Success indicator of the current subtask only.
    SubtaskReward,
    /// Score of the next boundary's discriminator.
    Discriminator(Vec<Discriminator>),
    /// Product of all later discriminator scores along the rollout.
    LongDiscriminator(Vec<Discriminator>),
}

impl ValueRule {
    pub fn name(&self) -> &'static str {
        match self {
            ValueRule::WholeTask => "whole_task",
            ValueRule::SubtaskReward => "subtask_reward",
            ValueRule::Discriminator(_) => "discriminator",
            ValueRule::LongDiscriminator(_) => "long_discriminator",
        }
    }

    /// Targets fixed at collection time (`None` where the target bootstraps
    /// from the critic).
    pub fn fixed_targets<E: ChainEnv + ?Sized>(&self, env: &E, episode: &[BoundaryTransition]) -> Result<Vec<Option<f64>>> {
        let k = env.num_subtasks();
        // boundary features after each successful intermediate subtask
        let reached: Vec<Vec<f64>> = episode
            .iter()
            .map_while(|t| match &t.next_state {
                Some(s) if t.success => Some(env.boundary_features(s)),
                _ => None,
            })
            .collect();
        let mut out = Vec::with_capacity(episode.len());
        for (pos, t) in episode.iter().enumerate() {
            let fixed = if t.index == k {
                Some(t.final_reward)
            } else {
                match self {
                    ValueRule::WholeTask => None,
                    ValueRule::SubtaskReward => Some(if t.success { 1.0 } else { 0.0 }),
                    ValueRule::Discriminator(ds) => Some(match reached.get(pos) {
                        Some(f) => value_dm(ds, f, t.index)?,
                        None => 0.0,
                    }),
                    ValueRule::LongDiscriminator(ds) => {
                        Some(value_ldm(ds, reached.get(pos..).unwrap_or(&[]), t.index)?)
                    }
                }
            };
            out.push(fixed);
        }
        Ok(out)
    }

    fn uses_imitation(&self) -> bool {
        matches!(self, ValueRule::WholeTask)
    }
}

/// One chained episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEpisode {
    pub transitions: Vec<BoundaryTransition>,
    pub final_reward: f64,
    /// Environment steps over all executed subtasks.
    pub steps: usize,
    /// Terminal state of every executed subtask, in order.
    pub terminals: Vec<Vec<f64>>,
}

impl ChainEpisode {
    pub fn completed_subtasks(&self) -> usize {
        self.transitions.iter().filter(|t| t.success).count()
    }
}

/// Runs the chain once from a fresh reset: the agent picks subgoals at the
/// boundaries before subtasks `1..K-1`, the last subtask receives the goal's
/// subgoal, and the chain stops at the first failed subtask.
pub fn chain_rollout<E: ChainEnv + ?Sized>(agent: &ChainAgent, env: &mut E, deterministic: bool, rng: &mut SimRng) -> Result<ChainEpisode> {
    let first = env.reset_chain(rng);
    chain_rollout_from(agent, env, first, deterministic, None, rng)
}

/// As [`chain_rollout`] after the environment has been reset to `first`. A
/// given `first_subgoal` (unit range) replaces the agent's choice at the
/// first boundary.
pub fn chain_rollout_from<E: ChainEnv + ?Sized>(
    agent: &ChainAgent,
    env: &mut E,
    first: Vec<f64>,
    deterministic: bool,
    first_subgoal: Option<Vec<f64>>,
    rng: &mut SimRng,
) -> Result<ChainEpisode> {
    let k = env.num_subtasks();
    let goal = if agent.goal_conditioned() {
        env.goal_features()
    } else {
        Vec::new()
    };
    let mut state = first;
    let mut transitions: Vec<BoundaryTransition> = Vec::with_capacity(k);
    let mut terminals = Vec::with_capacity(k);
    let mut steps = 0;
    let mut forced = first_subgoal;
    for i in 1..=k {
        let (unit, subgoal) = if i < k {
            let unit = match forced.take() {
                Some(u) => u,
                None => agent.choose(&state, i, &goal, deterministic, rng)?,
            };
            let g = agent.to_box(i, &unit);
            (unit, g)
        } else {
            let g = env.final_subgoal();
            (agent.to_unit(k, &g), g)
        };
        let out = env.execute(i, &subgoal, rng)?;
        steps += out.steps;
        terminals.push(out.terminal.clone());
        let last = i == k;
        transitions.push(BoundaryTransition {
            index: i,
            state: std::mem::replace(&mut state, out.terminal.clone()),
            goal: goal.clone(),
            subgoal: unit,
            subtask_return: 0.0,
            success: out.success,
            next_state: if out.success && !last {
                Some(out.terminal)
            } else {
                None
            },
            final_reward: 0.0,
        });
        if !out.success {
            break;
        }
    }
    let final_reward = if transitions.len() == k && transitions[k - 1].success {
        env.task_reward()
    } else {
        0.0
    };
    for t in &mut transitions {
        t.final_reward = final_reward;
    }
    if let Some(t) = transitions.last_mut() {
        if t.index == k {
            t.subtask_return = final_reward;
        }
    }
    Ok(ChainEpisode {
        transitions,
        final_reward,
        steps,
        terminals,
    })
}

/// Regression targets for a batch of boundary transitions. `fixed` carries
/// collection-time targets; the rest follow the whole-task rule:
/// the realized `r_T` for the last subtask and for the bootstrap of the one
/// before it, 0 after a failed subtask, and otherwise the target critic's
/// value of the next boundary, clamped to `[0, K - i]`.
pub fn chain_targets(agent: &ChainAgent, rows: &[&BoundaryTransition], fixed: &[Option<f64>], cfg: &ChainConfig, rng: &mut SimRng) -> Result<Vec<f64>> {
    let k = agent.num_subtasks();
    let mut y = vec![0.0; rows.len()];
    let mut boot_rows = Vec::new();
    let mut boot_inputs = Vec::new();
    for (r, t) in rows.iter().enumerate() {
        y[r] = if let Some(f) = fixed.get(r).copied().flatten() {
            f
        } else if t.index == k {
            t.final_reward
        } else if !t.success {
            0.0
        } else if t.index == k - 1 {
            t.subtask_return + t.final_reward
        } else {
            let next = t
                .next_state
                .as_ref()
                .ok_or_else(|| Error::Training("successful boundary without a successor".into()))?;
            boot_rows.push(r);
            boot_inputs.extend(agent.input(next, t.index + 1, &t.goal)?);
            t.subtask_return
        };
    }
    if !boot_rows.is_empty() {
        let v = agent.values(
            &boot_inputs,
            boot_rows.len(),
            cfg.target_samples,
            true,
            cfg.entropy_in_targets,
            rng,
        )?;
        for (&r, v) in boot_rows.iter().zip(v) {
            let hi = (k - rows[r].index) as f64;
            y[r] += v.clamp(0.0, hi);
        }
    }
    for (t, v) in rows.iter().zip(&y) {
        let hi = (k + 1 - t.index) as f64;
        if !(v.is_finite() && *v >= 0.0 && *v <= hi) {
            return Err(Error::Training(format!(
                "chaining target {v} outside [0, {hi}] at subtask {}",
                t.index
            )));
        }
    }
    Ok(y)
}

/// Ring buffer of boundary transitions with their collection-time targets.
#[derive(Debug, Clone)]
pub struct ChainReplay {
    capacity: usize,
    head: usize,
    items: Vec<(BoundaryTransition, Option<f64>)>,
}

impl ChainReplay {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            head: 0,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: BoundaryTransition, fixed: Option<f64>) {
        if self.items.len() < self.capacity {
            self.items.push((t, fixed));
        } else {
            self.items[self.head] = (t, fixed);
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Vec<&(BoundaryTransition, Option<f64>)> {
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Boundary transitions of fully successful episodes only.
#[derive(Debug, Clone)]
pub struct SilBuffer {
    capacity: usize,
    head: usize,
    items: Vec<BoundaryTransition>,
}

impl SilBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            head: 0,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn entries(&self) -> &[BoundaryTransition] {
        &self.items
    }

    /// Stores every transition of the episode iff `final_reward == 1`.
    pub fn store(&mut self, episode: &[BoundaryTransition], final_reward: f64) {
        if final_reward != 1.0 {
            return;
        }
        for t in episode {
            if self.items.len() < self.capacity {
                self.items.push(t.clone());
            } else {
                self.items[self.head] = t.clone();
            }
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Uniform draws among the entries the chaining policy decided (`i < K`).
    pub fn sample(&self, n: usize, k: usize, rng: &mut SimRng) -> Vec<&BoundaryTransition> {
        if !self.items.iter().any(|t| t.index < k) {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let t = &self.items[rng.random_range(0..self.items.len())];
            if t.index < k {
                out.push(t);
            }
        }
        out
    }
}

/// Self-imitation weights of stored entries against the current critic.
pub fn sil_weights(agent: &ChainAgent, rows: &[&BoundaryTransition], cfg: &ChainConfig, rng: &mut SimRng) -> Result<Vec<f64>> {
    let none = vec![None; rows.len()];
    let y = chain_targets(agent, rows, &none, cfg, rng)?;
    let x = agent.inputs(rows)?;
    let actions: Vec<f64> = rows.iter().flat_map(|t| t.subgoal.iter().copied()).collect();
    let q = agent.sac().min_q(&x, &actions, rows.len())?;
    Ok(y.iter()
        .zip(&q)
        .map(|(y, q)| match cfg.sil_weight {
            SilWeight::Clipped => (y - q).max(0.0),
            SilWeight::Exponential { beta, max } => ((y - q) / beta).exp().min(max),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub imitation_loss: f64,
}

/// One critic step and, for learning agents, one actor step.
pub fn chain_update(
    agent: &mut ChainAgent,
    replay: &ChainReplay,
    sil: Option<&SilBuffer>,
    cfg: &ChainConfig,
    rng: &mut SimRng,
) -> Result<UpdateStats> {
    let k = agent.num_subtasks();
    let n = cfg.sac.batch_size;
    let batch = replay.sample(n, rng);
    let rows: Vec<&BoundaryTransition> = batch.iter().map(|(t, _)| t).collect();
    let fixed: Vec<Option<f64>> = batch.iter().map(|(_, f)| *f).collect();
    let y = chain_targets(agent, &rows, &fixed, cfg, rng)?;
    let x = agent.inputs(&rows)?;
    let actions: Vec<f64> = rows.iter().flat_map(|t| t.subgoal.iter().copied()).collect();
    let critic_loss = agent.sac_mut().fit_critics(&x, &actions, &y, n)?;
    let mut stats = UpdateStats {
        critic_loss,
        ..UpdateStats::default()
    };
    if agent.is_uniform() {
        return Ok(stats);
    }
    let decided: Vec<&BoundaryTransition> = rows.iter().copied().filter(|t| t.index < k).collect();
    if decided.is_empty() {
        return Ok(stats);
    }
    let actor_x = agent.inputs(&decided)?;
    let sil_rows = match sil {
        Some(buf) if cfg.sil_coef > 0.0 => buf.sample(cfg.sil_batch_size, k, rng),
        _ => Vec::new(),
    };
    let (sil_x, sil_a, sil_w) = if sil_rows.is_empty() {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        (
            agent.inputs(&sil_rows)?,
            sil_rows.iter().flat_map(|t| t.subgoal.iter().copied()).collect(),
            sil_weights(agent, &sil_rows, cfg, rng)?,
        )
    };
    let term = (!sil_rows.is_empty()).then_some(ImitationTerm {
        obs: &sil_x,
        actions: &sil_a,
        weights: &sil_w,
        n: sil_rows.len(),
        coef: cfg.sil_coef,
    });
    let a = agent.sac_mut().actor_update(&actor_x, decided.len(), None, term, rng)?;
    stats.actor_loss = a.loss;
    stats.imitation_loss = a.imitation_loss;
    Ok(stats)
}

/// Greedy evaluation summary of a chaining agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEval {
    pub success_rate: f64,
    pub subtask_completion: f64,
    /// Mean steps of successful episodes (0 when none succeeded).
    pub rollout_length: f64,
    pub episodes: Vec<(bool, usize, usize)>,
}

/// Runs `episodes` deterministic chained episodes.
pub fn evaluate_chain<E: ChainEnv + ?Sized>(agent: &ChainAgent, env: &mut E, episodes: usize, rng: &mut SimRng) -> Result<ChainEval> {
    let mut log = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let ep = chain_rollout(agent, env, true, rng)?;
        log.push((ep.final_reward == 1.0, ep.completed_subtasks(), ep.steps));
    }
    Ok(summarize(log))
}

pub(crate) fn summarize(log: Vec<(bool, usize, usize)>) -> ChainEval {
    let n = log.len().max(1) as f64;
    let wins: Vec<usize> = log.iter().filter(|e| e.0).map(|e| e.2).collect();
    ChainEval {
        success_rate: wins.len() as f64 / n,
        subtask_completion: log.iter().map(|e| e.1 as f64).sum::<f64>() / n,
        rollout_length: if wins.is_empty() {
            0.0
        } else {
            wins.iter().sum::<usize>() as f64 / wins.len() as f64
        },
        episodes: log,
    }
}

/// Training summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub transitions: u64,
    pub episodes: u64,
    pub updates: u64,
    /// `(transitions, greedy success rate)` at every evaluation.
    pub curve: Vec<(u64, f64)>,
}

/// Alternates rollouts and updates until `cfg.budget` boundary transitions
/// have been collected. `on_eval(transitions, eval)` fires every
/// `cfg.eval_interval` transitions when `cfg.eval_episodes > 0`.
pub fn train_chain<E, F>(agent: &mut ChainAgent, env: &mut E, rule: &ValueRule, cfg: &ChainConfig, rng: &mut SimRng, mut on_eval: F) -> Result<ChainReport>
where
    E: ChainEnv + ?Sized,
    F: FnMut(u64, &ChainEval),
{
    let k = env.num_subtasks();
    if let ValueRule::Discriminator(ds) | ValueRule::LongDiscriminator(ds) = rule {
        if ds.len() + 1 != k {
            return Err(Error::InvalidConfig(format!(
                "{} discriminators for {k} subtasks",
                ds.len()
            )));
        }
    }
    cfg.validate()?;
    let mut replay = ChainReplay::new(cfg.buffer_capacity);
    let use_sil = rule.uses_imitation() && cfg.sil_coef > 0.0 && !agent.is_uniform();
    let mut sil = SilBuffer::new(cfg.sil_capacity);
    let mut report = ChainReport {
        transitions: 0,
        episodes: 0,
        updates: 0,
        curve: Vec::new(),
    };
    let mut next_eval = cfg.eval_interval.max(1);
    let mut owed = 0.0;
    while report.transitions < cfg.budget {
        let ep = chain_rollout(agent, env, false, rng)?;
        let fixed = rule.fixed_targets(env, &ep.transitions)?;
        let added = ep.transitions.len();
        report.transitions += added as u64;
        report.episodes += 1;
        if use_sil {
            sil.store(&ep.transitions, ep.final_reward);
        }
        for (t, f) in ep.transitions.into_iter().zip(fixed) {
            replay.push(t, f);
        }
        let progress = report.transitions as f64 / cfg.budget.max(1) as f64;
        let anneal = ((progress - 0.5) * 2.0).clamp(0.0, 1.0);
        agent
            .sac_mut()
            .set_lr_factor(1.0 - anneal * (1.0 - cfg.final_lr_fraction));
        if replay.len() >= cfg.warmup.max(1) {
            owed += added as f64 * cfg.updates_per_transition;
            while owed >= 1.0 {
                chain_update(agent, &replay, use_sil.then_some(&sil), cfg, rng)?;
                report.updates += 1;
                owed -= 1.0;
            }
        }
        if cfg.eval_episodes > 0 && report.transitions >= next_eval {
            next_eval += cfg.eval_interval.max(1);
            let ev = evaluate_chain(agent, env, cfg.eval_episodes, rng)?;
            report.curve.push((report.transitions, ev.success_rate));
            on_eval(report.transitions, &ev);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{make_chain_world, ChainWorldConfig, SuccessMap};
    use rand::SeedableRng;

    fn world(start: Vec<SuccessMap>) -> crate::tasks::ChainWorld {
        let k = start.len();
        make_chain_world(&ChainWorldConfig {
            start,
            subgoal: vec![SuccessMap::Constant { value: 1.0 }; k],
            reach: vec![None; k],
        })
        .unwrap()
    }

    fn transition(index: usize, success: bool, next: Option<f64>, r_t: f64) -> BoundaryTransition {
        BoundaryTransition {
            index,
            state: vec![0.5],
            goal: Vec::new(),
            subgoal: vec![0.0],
            subtask_return: 0.0,
            success,
            next_state: next.map(|x| vec![x]),
            final_reward: r_t,
        }
    }

    #[test]
    fn terminal_failure_and_penultimate_targets_are_exact() {
        let env = make_chain_world(&ChainWorldConfig::default()).unwrap();
        let cfg = ChainConfig::default();
        let mut rng = SimRng::seed_from_u64(0);
        let agent = ChainAgent::new(&env, &cfg, &mut rng).unwrap();
        let rows = [
            transition(3, true, None, 1.0),
            transition(3, false, None, 0.0),
            transition(1, false, None, 0.0),
            transition(2, true, Some(0.7), 1.0),
            transition(2, true, Some(0.7), 0.0),
        ];
        let refs: Vec<&BoundaryTransition> = rows.iter().collect();
        let y = chain_targets(&agent, &refs, &[None; 5], &cfg, &mut rng).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn fixed_targets_take_priority_and_bootstraps_are_clamped() {
        let env = make_chain_world(&ChainWorldConfig::default()).unwrap();
        let cfg = ChainConfig::default();
        let mut rng = SimRng::seed_from_u64(1);
        let agent = ChainAgent::new(&env, &cfg, &mut rng).unwrap();
        let rows = [transition(1, true, Some(0.7), 0.0), transition(1, true, Some(0.7), 0.0)];
        let refs: Vec<&BoundaryTransition> = rows.iter().collect();
        let y = chain_targets(&agent, &refs, &[Some(0.25), None], &cfg, &mut rng).unwrap();
        assert_eq!(y[0], 0.25);
        assert!((0.0..=2.0).contains(&y[1]));
    }

    #[test]
    fn rollout_stops_at_the_first_failure() {
        // subtask 2 never succeeds from the left half, always from the right
        let mut env = world(vec![
            SuccessMap::Constant { value: 1.0 },
            SuccessMap::Step { lo: 0.5, hi: 1.0 },
            SuccessMap::Constant { value: 1.0 },
        ]);
        let cfg = ChainConfig::default();
        let mut rng = SimRng::seed_from_u64(2);
        let agent = ChainAgent::new(&env, &cfg, &mut rng).unwrap();
        env.begin_at(1, &[0.3]).unwrap();
        let fail = chain_rollout_from(&agent, &mut env, vec![0.3], true, Some(vec![-0.8]), &mut rng).unwrap();
        assert_eq!(fail.transitions.len(), 2);
        assert!(fail.transitions[0].success && !fail.transitions[1].success);
        assert!(fail.transitions[1].next_state.is_none());
        assert_eq!(fail.final_reward, 0.0);
        assert_eq!(fail.completed_subtasks(), 1);
        env.begin_at(1, &[0.3]).unwrap();
        let win = chain_rollout_from(&agent, &mut env, vec![0.3], true, Some(vec![0.8]), &mut rng).unwrap();
        assert_eq!(win.transitions.len(), 3);
        assert_eq!(win.final_reward, 1.0);
        assert!(win.transitions.iter().all(|t| t.final_reward == 1.0));
        assert_eq!(win.transitions[2].subtask_return, 1.0);
        assert!(win.transitions[2].next_state.is_none());
        assert_eq!(win.transitions[1].state, vec![0.9]);
    }

    #[test]
    fn subtask_reward_rule_fixes_every_target() {
        let env = make_chain_world(&ChainWorldConfig::default()).unwrap();
        let ep = [transition(1, true, Some(0.7), 0.0), transition(2, true, Some(0.6), 0.0), transition(3, false, None, 0.0)];
        let fixed = ValueRule::SubtaskReward.fixed_targets(&env, &ep).unwrap();
        assert_eq!(fixed, vec![Some(1.0), Some(1.0), Some(0.0)]);
        let whole = ValueRule::WholeTask.fixed_targets(&env, &ep).unwrap();
        assert_eq!(whole, vec![None, None, Some(0.0)]);
    }

    #[test]
    fn sil_buffer_keeps_successes_and_samples_decisions() {
        let mut buf = SilBuffer::new(10);
        let lost = [transition(1, true, Some(0.7), 0.0), transition(2, false, None, 0.0)];
        buf.store(&lost, 0.0);
        assert!(buf.is_empty());
        let won = [transition(1, true, Some(0.7), 1.0), transition(2, true, Some(0.7), 1.0), transition(3, true, None, 1.0)];
        buf.store(&won, 1.0);
        assert_eq!(buf.len(), 3);
        let mut rng = SimRng::seed_from_u64(3);
        let s = buf.sample(50, 3, &mut rng);
        assert_eq!(s.len(), 50);
        assert!(s.iter().all(|t| t.index < 3));
    }

    #[test]
    fn replay_ring_overwrites_the_oldest() {
        let mut r = ChainReplay::new(2);
        for i in 1..=3 {
            r.push(transition(i, true, None, 0.0), Some(i as f64));
        }
        assert_eq!(r.len(), 2);
        let mut rng = SimRng::seed_from_u64(4);
        assert!(r.sample(40, &mut rng).iter().all(|(t, _)| t.index >= 2));
    }

    #[test]
    fn evaluation_summary_recomputes_from_episodes() {
        let mut env = make_chain_world(&ChainWorldConfig::default()).unwrap();
        let cfg = ChainConfig::default();
        let mut rng = SimRng::seed_from_u64(5);
        let agent = ChainAgent::uniform(&env, &cfg, &mut rng).unwrap();
        let ev = evaluate_chain(&agent, &mut env, 200, &mut rng).unwrap();
        let wins = ev.episodes.iter().filter(|e| e.0).count() as f64;
        assert_eq!(ev.success_rate, wins / 200.0);
        let done: usize = ev.episodes.iter().map(|e| e.1).sum();
        assert_eq!(ev.subtask_completion, done as f64 / 200.0);
        assert!(ev.episodes.iter().all(|e| e.1 <= 3 && (!e.0 || e.1 == 3)));
    }
}
