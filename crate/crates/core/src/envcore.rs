//! Goal-conditioned MDP interface with an explicit subtask decomposition.
//!
//! Two levels are exposed. [`GoalEnv`] is the low-level step interface used
//! to train and roll out skills. [`ChainEnv`] is the boundary-level view the
//! chaining policy sees: one decision per subtask, each resolved by running a
//! frozen skill (or, for analytic test worlds, by sampling an outcome).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

/// Random number generator used for every simulation and training stream.
pub type SimRng = ChaCha8Rng;

pub type State = Vec<f64>;
pub type Action = Vec<f64>;

/// Independent stream for rollout `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Relative slack on tolerance comparisons so that points exactly on the
/// closed ball count as inside despite rounding.
const TOLERANCE_SLACK: f64 = 1e-9;

/// True iff `a` and `b` are within `tol` (closed ball, Euclidean).
pub fn within_tolerance(a: &[f64], b: &[f64], tol: f64) -> bool {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    d2.sqrt() <= tol * (1.0 + TOLERANCE_SLACK)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Axis-aligned box with `lo < hi` in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpace {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpace {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::InvalidConfig("box has no dimensions".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidConfig(format!(
                    "box bounds [{l}, {h}] are empty"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l - 1e-9 && *v <= *h + 1e-9)
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.random_range(*l..*h))
            .collect()
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }
}

/// Task goal: a target position plus its success radius. It stays fixed for
/// the whole episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Goal {
    pub values: Vec<f64>,
    pub tolerance: f64,
}

/// A subgoal handed to skill `index` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Subgoal {
    pub index: usize,
    pub values: Vec<f64>,
}

/// Static description of subtask `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskSpec {
    pub index: usize,
    pub horizon: usize,
    pub subgoal_space: BoxSpace,
    pub tolerance: f64,
}

/// The decomposed long-horizon task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub horizon: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub goal_space: BoxSpace,
    pub subtasks: Vec<SubtaskSpec>,
}

impl TaskSpec {
    pub fn new(
        name: &str,
        horizon: usize,
        state_dim: usize,
        action_dim: usize,
        goal_space: BoxSpace,
        subtasks: Vec<SubtaskSpec>,
    ) -> Result<Self> {
        if subtasks.len() < 2 {
            return Err(Error::InvalidConfig(
                "a task needs at least two subtasks".into(),
            ));
        }
        for (k, s) in subtasks.iter().enumerate() {
            if s.index != k + 1 {
                return Err(Error::InvalidConfig(format!(
                    "subtask {k} carries index {}",
                    s.index
                )));
            }
            if s.horizon == 0 || !(s.tolerance > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "subtask {} needs horizon >= 1 and tolerance > 0",
                    s.index
                )));
            }
        }
        let total: usize = subtasks.iter().map(|s| s.horizon).sum();
        if horizon < total {
            return Err(Error::InvalidConfig(format!(
                "episode horizon {horizon} shorter than the subtask horizons ({total})"
            )));
        }
        Ok(Self {
            name: name.to_string(),
            horizon,
            state_dim,
            action_dim,
            goal_space,
            subtasks,
        })
    }

    pub fn num_subtasks(&self) -> usize {
        self.subtasks.len()
    }

    /// Subtask `i` (1-based).
    pub fn subtask(&self, i: usize) -> Result<&SubtaskSpec> {
        if i == 0 || i > self.subtasks.len() {
            return Err(Error::SubtaskOutOfRange {
                index: i,
                count: self.subtasks.len(),
            });
        }
        Ok(&self.subtasks[i - 1])
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: State,
    pub reward: f64,
    pub done: bool,
}

/// One step of experience under a goal or subgoal.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next_state: State,
    pub done: bool,
    pub goal: Vec<f64>,
    /// Achieved subgoal of `next_state`.
    pub achieved: Vec<f64>,
}

/// A subtask (or full-task) episode with achieved-subgoal annotations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrajectory {
    pub subtask: usize,
    pub goal: Vec<f64>,
    pub transitions: Vec<Transition>,
    pub success: bool,
}

impl EpisodeTrajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Low-level goal-conditioned environment.
pub trait GoalEnv {
    fn spec(&self) -> &TaskSpec;

    /// Starts a new episode at a subtask-1 initial state with a fresh goal.
    fn reset(&mut self, rng: &mut SimRng) -> (State, Goal);

    /// Applies `action`. Reward is the task reward of the next state; the
    /// episode ends on success or when the step count reaches the horizon.
    fn step(&mut self, action: &[f64]) -> Result<Step>;

    /// Places the environment at a start state of subtask `i`, drawn from its
    /// initiation set. The goal is kept and the step counter restarts.
    fn subtask_reset(&mut self, i: usize, rng: &mut SimRng) -> Result<State>;

    /// Overwrites the current state and restarts the step counter.
    fn set_state(&mut self, state: &[f64]) -> Result<()>;

    fn state(&self) -> State;

    fn goal(&self) -> &Goal;

    fn set_goal(&mut self, goal: Goal) -> Result<()>;

    /// Projection of `state` onto the subgoal space of subtask `i`.
    fn achieved_subgoal(&self, i: usize, state: &[f64]) -> Vec<f64>;

    /// 1 iff `state` completes subtask `i` for `subgoal`.
    fn subtask_reward(&self, i: usize, state: &[f64], subgoal: &[f64]) -> f64;

    /// 1 iff `state` completes the whole task for `goal`.
    fn task_reward(&self, state: &[f64], goal: &Goal) -> f64;

    /// The subgoal of the last subtask implied by the task goal.
    fn goal_subgoal(&self, goal: &Goal) -> Vec<f64>;

    /// Policy input features of `state`; the raw state unless overridden.
    fn observation(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    /// Features on which initiation-set membership is decided.
    fn boundary_features(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }

    /// Subtasks completed so far by an undecomposed policy, given the count
    /// `prev` before reaching `state`. Only whole-task success counts unless
    /// overridden.
    fn completed_subtasks(&self, state: &[f64], prev: usize) -> usize {
        if self.task_reward(state, self.goal()) == 1.0 {
            self.spec().num_subtasks()
        } else {
            prev
        }
    }
}

/// Outcome of running one subtask at the boundary level.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskOutcome {
    pub success: bool,
    /// Boundary state reached (the next subtask's start state on success).
    pub terminal: Vec<f64>,
    pub steps: usize,
}

/// Boundary-level view of a decomposed task, as seen by the chaining policy.
pub trait ChainEnv {
    fn num_subtasks(&self) -> usize;

    /// Dimension of boundary states.
    fn boundary_dim(&self) -> usize;

    /// Subgoal box of subtask `i` (1-based).
    fn subgoal_space(&self, i: usize) -> &BoxSpace;

    /// Starts a new episode and returns the first boundary state.
    fn reset_chain(&mut self, rng: &mut SimRng) -> Vec<f64>;

    /// Task-goal features (used only when the chaining policy is
    /// goal-conditioned).
    fn goal_features(&self) -> Vec<f64>;

    /// The subgoal of the last subtask, fixed by the task goal.
    fn final_subgoal(&self) -> Vec<f64>;

    /// Runs subtask `i` from the current boundary state toward `subgoal`.
    fn execute(&mut self, i: usize, subgoal: &[f64], rng: &mut SimRng) -> Result<SubtaskOutcome>;

    /// Task reward of the current state.
    fn task_reward(&self) -> f64;

    /// Draws a start state of subtask `i` from its initiation set.
    fn sample_initiation(&mut self, i: usize, rng: &mut SimRng) -> Result<Vec<f64>>;

    /// Places the environment at boundary state `state` before subtask `i`.
    fn begin_at(&mut self, i: usize, state: &[f64]) -> Result<()>;

    /// Features on which initiation-set membership is decided.
    fn boundary_features(&self, state: &[f64]) -> Vec<f64> {
        state.to_vec()
    }
}
