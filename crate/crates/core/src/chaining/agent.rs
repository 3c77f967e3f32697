use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envcore::{BoxSpace, ChainEnv, SimRng};
use crate::error::{check_dim, Error, Result};
use crate::rl::{SacAgent, SacConfig};
use crate::tensorlite::{box_to_unit, scale_to_box, Checkpoint};

use super::ChainConfig;

/// One decision of the chaining MDP: subgoal `subgoal` (unit range) given at
/// boundary state `state` before subtask `index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTransition {
    pub index: usize,
    pub state: Vec<f64>,
    /// Task-goal features seen at this boundary (empty unless goal-conditioned).
    pub goal: Vec<f64>,
    /// Subgoal in `[-1, 1]^d`, mapped onto the subtask's subgoal box.
    pub subgoal: Vec<f64>,
    /// `R_i`: the task reward collected during subtask `i` (nonzero only for
    /// the last subtask).
    pub subtask_return: f64,
    /// Whether subtask `i` succeeded.
    pub success: bool,
    /// Next boundary state; `None` on failure and after the last subtask.
    pub next_state: Option<Vec<f64>>,
    /// `r_T` of the whole episode.
    pub final_reward: f64,
}

/// Chaining policy and critic. The policy input is the boundary state, a
/// one-hot subtask index and (optionally) the task goal; its action is a unit
/// range subgoal scaled onto the subtask's subgoal box.
#[derive(Debug, Clone)]
pub struct ChainAgent {
    sac: SacAgent,
    k: usize,
    boundary_dim: usize,
    goal_dim: usize,
    spaces: Vec<BoxSpace>,
    uniform: bool,
}

impl ChainAgent {
    /// A learning agent.
    pub fn new<E: ChainEnv + ?Sized>(env: &E, cfg: &ChainConfig, rng: &mut SimRng) -> Result<Self> {
        Self::build(env, cfg, false, rng)
    }

    /// An agent whose policy draws subgoals uniformly and is never trained;
    /// only its critic learns.
    pub fn uniform<E: ChainEnv + ?Sized>(env: &E, cfg: &ChainConfig, rng: &mut SimRng) -> Result<Self> {
        Self::build(env, cfg, true, rng)
    }

    fn build<E: ChainEnv + ?Sized>(env: &E, cfg: &ChainConfig, uniform: bool, rng: &mut SimRng) -> Result<Self> {
        let k = env.num_subtasks();
        let spaces: Vec<BoxSpace> = (1..=k).map(|i| env.subgoal_space(i).clone()).collect();
        let d = spaces[0].dim();
        if spaces.iter().any(|s| s.dim() != d) {
            return Err(Error::InvalidConfig(
                "chaining needs subgoal spaces of equal dimension".into(),
            ));
        }
        let goal_dim = if cfg.goal_conditioned {
            env.goal_features().len()
        } else {
            0
        };
        let boundary_dim = env.boundary_dim();
        let sac = SacAgent::new(boundary_dim + k + goal_dim, d, cfg.sac.clone(), rng)?;
        Ok(Self {
            sac,
            k,
            boundary_dim,
            goal_dim,
            spaces,
            uniform,
        })
    }

    pub fn num_subtasks(&self) -> usize {
        self.k
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn sac(&self) -> &SacAgent {
        &self.sac
    }

    pub(crate) fn sac_mut(&mut self) -> &mut SacAgent {
        &mut self.sac
    }

    pub fn subgoal_dim(&self) -> usize {
        self.spaces[0].dim()
    }

    pub fn goal_conditioned(&self) -> bool {
        self.goal_dim > 0
    }

    /// Policy input for boundary `i`.
    pub fn input(&self, state: &[f64], i: usize, goal: &[f64]) -> Result<Vec<f64>> {
        check_dim("boundary state", self.boundary_dim, state.len())?;
        if i == 0 || i > self.k {
            return Err(Error::SubtaskOutOfRange {
                index: i,
                count: self.k,
            });
        }
        let mut x = Vec::with_capacity(self.boundary_dim + self.k + self.goal_dim);
        x.extend_from_slice(state);
        x.extend((1..=self.k).map(|j| if j == i { 1.0 } else { 0.0 }));
        if self.goal_dim > 0 {
            check_dim("goal features", self.goal_dim, goal.len())?;
            x.extend_from_slice(goal);
        }
        Ok(x)
    }

    /// Stacked inputs of several boundary transitions' current states.
    pub(crate) fn inputs(&self, rows: &[&BoundaryTransition]) -> Result<Vec<f64>> {
        let mut x = Vec::new();
        for t in rows {
            x.extend(self.input(&t.state, t.index, &t.goal)?);
        }
        Ok(x)
    }

    /// Unit-range subgoal for boundary `i < K`.
    pub fn choose(&self, state: &[f64], i: usize, goal: &[f64], deterministic: bool, rng: &mut SimRng) -> Result<Vec<f64>> {
        let x = self.input(state, i, goal)?;
        if self.uniform {
            return Ok((0..self.subgoal_dim()).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        self.sac.act(&x, deterministic, rng)
    }

    /// Maps a unit-range subgoal of subtask `i` onto its box.
    pub fn to_box(&self, i: usize, unit: &[f64]) -> Vec<f64> {
        let s = &self.spaces[i - 1];
        s.clip(&scale_to_box(unit, &s.lo, &s.hi))
    }

    /// Unit-range form of a subgoal of subtask `i`.
    pub fn to_unit(&self, i: usize, subgoal: &[f64]) -> Vec<f64> {
        let s = &self.spaces[i - 1];
        box_to_unit(subgoal, &s.lo, &s.hi)
            .into_iter()
            .map(|u| u.clamp(-1.0, 1.0))
            .collect()
    }

    /// `n` policy subgoal samples for each input row (row-major, repeated).
    fn sample_actions(&self, inputs: &[f64], rows: usize, n: usize, rng: &mut SimRng) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = self.sac.obs_dim();
        let mut rep = Vec::with_capacity(rows * n * w);
        for r in 0..rows {
            for _ in 0..n {
                rep.extend_from_slice(&inputs[r * w..(r + 1) * w]);
            }
        }
        let actions = if self.uniform {
            (0..rows * n * self.subgoal_dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        } else {
            self.sac.act_batch(&rep, rows * n, false, rng)?
        };
        Ok((rep, actions))
    }

    /// Mean over `n` policy subgoals for each input row of `min(Q1, Q2)` on
    /// the target critics when `target` is set, else of `(Q1 + Q2) / 2` on
    /// the online critics. With `entropy` the SAC
    /// soft-value correction is included for learned policies.
    pub(crate) fn values(&self, inputs: &[f64], rows: usize, n: usize, target: bool, entropy: bool, rng: &mut SimRng) -> Result<Vec<f64>> {
        if rows == 0 {
            return Ok(Vec::new());
        }
        let n = n.max(1);
        let q = if target && !self.uniform && entropy {
            let w = self.sac.obs_dim();
            let mut rep = Vec::with_capacity(rows * n * w);
            for r in 0..rows {
                for _ in 0..n {
                    rep.extend_from_slice(&inputs[r * w..(r + 1) * w]);
                }
            }
            self.sac.target_values(&rep, rows * n, rng, true)?
        } else {
            let (rep, actions) = self.sample_actions(inputs, rows, n, rng)?;
            if target {
                self.sac.target_min_q(&rep, &actions, rows * n)?
            } else {
                self.mean_q(&rep, &actions, rows * n)?
            }
        };
        Ok(q.chunks_exact(n)
            .map(|c| c.iter().sum::<f64>() / n as f64)
            .collect())
    }

    /// Raw critic estimate of the whole-task success probability from
    /// boundary state `state` before subtask `i < K`. The last subtask's
    /// subgoal is fixed by the goal; use [`ChainAgent::action_value`] there.
    pub fn raw_value(&self, state: &[f64], i: usize, goal: &[f64], n_samples: usize, rng: &mut SimRng) -> Result<f64> {
        if i >= self.k {
            return Err(Error::SubtaskOutOfRange {
                index: i,
                count: self.k - 1,
            });
        }
        let x = self.input(state, i, goal)?;
        Ok(self.values(&x, 1, n_samples, false, false, rng)?[0])
    }

    /// Critic estimate `(Q1 + Q2) / 2` of handing `subgoal` (in the
    /// subtask's box) to subtask `i`.
    pub fn action_value(&self, state: &[f64], i: usize, goal: &[f64], subgoal: &[f64]) -> Result<f64> {
        let x = self.input(state, i, goal)?;
        check_dim("subgoal", self.subgoal_dim(), subgoal.len())?;
        Ok(self.mean_q(&x, &self.to_unit(i, subgoal), 1)?[0])
    }

    fn mean_q(&self, obs: &[f64], actions: &[f64], n: usize) -> Result<Vec<f64>> {
        let (q1, q2) = self.sac.q_values(obs, actions, n)?;
        Ok(q1.iter().zip(&q2).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn save_into(&self, ck: &mut Checkpoint, prefix: &str) {
        self.sac.save_into(ck, prefix);
        ck.push_scalars(
            &format!("{prefix}.chain"),
            &[
                self.k as f64,
                self.boundary_dim as f64,
                self.goal_dim as f64,
                if self.uniform { 1.0 } else { 0.0 },
            ],
        );
    }

    pub fn load_from<E: ChainEnv + ?Sized>(ck: &Checkpoint, prefix: &str, env: &E, sac: SacConfig) -> Result<Self> {
        let meta = ck.scalars(&format!("{prefix}.chain"))?;
        if meta.len() != 4 {
            return Err(Error::Format(format!("{prefix} is not a chaining agent")));
        }
        let k = env.num_subtasks();
        check_dim("chaining subtasks", k, meta[0] as usize)?;
        check_dim("boundary state", env.boundary_dim(), meta[1] as usize)?;
        Ok(Self {
            sac: SacAgent::load_from(ck, prefix, sac)?,
            k,
            boundary_dim: meta[1] as usize,
            goal_dim: meta[2] as usize,
            spaces: (1..=k).map(|i| env.subgoal_space(i).clone()).collect(),
            uniform: meta[3] == 1.0,
        })
    }
}

/// Reported value estimate: the mean critic value over `n_samples` policy
/// subgoals, clamped to `[0, 1]`.
pub fn estimate_value(agent: &ChainAgent, state: &[f64], i: usize, goal: &[f64], n_samples: usize, rng: &mut SimRng) -> Result<f64> {
    Ok(clamp_report(agent.raw_value(state, i, goal, n_samples, rng)?))
}

/// Reporting clamp applied to value estimates.
pub fn clamp_report(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}
