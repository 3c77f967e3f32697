//! Two-arm planar block transfer: arm 1 picks a block off the start peg,
//! hands it over to arm 2, and arm 2 places it on the target peg.
//!
//! Arm 1 holds the block through a compliant wrist: while it carries the
//! block, vertical motion rotates the block (`theta += coupling * dy`). The
//! orientation freezes once arm 2 takes over, and the task goal requires the
//! block to end upright. So where arm 1 carries the block before the hand-over
//! decides whether the whole task can still succeed, even though every
//! subtask on its own is indifferent to orientation.

use serde::{Deserialize, Serialize};
use rand_distr::{Distribution, Triangular};

use crate::envcore::{
    stream_rng, within_tolerance, wrap_angle, BoxSpace, Goal, GoalEnv, SimRng, State, Step,
    SubtaskSpec, TaskSpec,
};
use crate::error::{check_dim, Error, Result};

pub const STATE_DIM: usize = 11;
pub const ACTION_DIM: usize = 6;
pub const SUBGOAL_DIM: usize = 2;

// state layout
pub const BX: usize = 0;
pub const BY: usize = 1;
pub const BTHETA: usize = 2;
pub const E1X: usize = 3;
pub const E1Y: usize = 4;
pub const J1: usize = 5;
pub const E2X: usize = 6;
pub const E2Y: usize = 7;
pub const J2: usize = 8;
pub const ATT1: usize = 9;
pub const ATT2: usize = 10;

pub const HOME1: [f64; 2] = [0.3, 0.5];
pub const HOME2: [f64; 2] = [0.75, 0.5];
pub const START_PEG_X: f64 = 0.15;
pub const START_PEG_Y: [f64; 2] = [0.35, 0.65];
pub const TARGET_PEG_X: [f64; 2] = [0.8, 0.9];
pub const TARGET_PEG_Y: [f64; 2] = [0.3, 0.7];
/// Horizontal reach of each arm.
pub const REACH1_X: [f64; 2] = [0.0, 0.6];
pub const REACH2_X: [f64; 2] = [0.4, 1.0];

/// A jaw counts as closed below this opening.
pub const JAW_CLOSED_BELOW: f64 = 0.5;

const OFFSET_SCALE: f64 = 10.0;
const JAW_RATE: f64 = 0.6;

const SEED_STREAM_INIT_SETS: u64 = 0x1417;

/// Tunable parameters of [`PlanarTransferEnv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanarConfig {
    /// `[x_lo, y_lo, x_hi, y_hi]`; every fixture of the task must lie inside.
    pub workspace: [f64; 4],
    pub subtask_horizons: [usize; 3],
    pub episode_horizon: usize,
    /// Position success radius.
    pub tolerance: f64,
    /// Largest block tilt (radians) accepted by the task goal.
    pub orientation_tolerance: f64,
    /// End-effector displacement per unit action.
    pub max_delta: f64,
    pub grasp_radius: f64,
    /// Block rotation per unit vertical motion of arm 1 while it holds the block.
    pub wrist_coupling: f64,
    /// Stored start states per initiation set.
    pub init_set_size: usize,
    /// Block tilt `[lo, mode, hi]` of the hand-over initiation set, drawn
    /// from a triangular distribution.
    pub handover_tilt: [f64; 3],
    /// Block tilt `[lo, mode, hi]` of the placing initiation set.
    pub place_tilt: [f64; 3],
}

impl Default for PlanarConfig {
    fn default() -> Self {
        Self {
            workspace: [0.0, 0.0, 1.0, 1.0],
            subtask_horizons: [30, 30, 30],
            episode_horizon: 100,
            tolerance: 0.02,
            orientation_tolerance: 0.2,
            max_delta: 0.05,
            grasp_radius: 0.03,
            wrist_coupling: 4.0,
            init_set_size: 1000,
            handover_tilt: [-0.2, 1.0, 1.2],
            place_tilt: [-0.2, 0.15, 0.5],
        }
    }
}

impl PlanarConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.workspace;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidConfig("workspace has zero area".into()));
        }
        let inside = |x: f64, y: f64| x >= x0 && x <= x1 && y >= y0 && y <= y1;
        let fixtures = [
            (HOME1[0], HOME1[1]),
            (HOME2[0], HOME2[1]),
            (START_PEG_X, START_PEG_Y[0]),
            (START_PEG_X, START_PEG_Y[1]),
            (TARGET_PEG_X[0], TARGET_PEG_Y[0]),
            (TARGET_PEG_X[1], TARGET_PEG_Y[1]),
            (0.1, 0.2),
            (0.95, 0.8),
        ];
        if !fixtures.iter().all(|&(x, y)| inside(x, y)) {
            return Err(Error::InvalidConfig(
                "workspace does not contain the task fixtures".into(),
            ));
        }
        if self.subtask_horizons.contains(&0) {
            return Err(Error::InvalidConfig(
                "subtask horizons must be positive".into(),
            ));
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("orientation_tolerance", self.orientation_tolerance),
            ("max_delta", self.max_delta),
            ("grasp_radius", self.grasp_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, [lo, mode, hi]) in [("handover_tilt", self.handover_tilt), ("place_tilt", self.place_tilt)] {
            if !(lo < hi && lo <= mode && mode <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must satisfy lo <= mode <= hi with lo < hi"
                )));
            }
        }
        if self.init_set_size == 0 {
            return Err(Error::InvalidConfig(
                "initiation sets need at least one state".into(),
            ));
        }
        Ok(())
    }
}

/// The planar transfer environment.
#[derive(Debug, Clone)]
pub struct PlanarTransferEnv {
    cfg: PlanarConfig,
    spec: TaskSpec,
    state: State,
    goal: Goal,
    steps: usize,
    done: bool,
    /// `init_sets[k]` holds the stored start states of subtask `k + 2`.
    init_sets: Vec<Vec<State>>,
}

/// Builds the environment; `seed` fixes the stored initiation sets.
pub fn make_planar_transfer(cfg: &PlanarConfig, seed: u64) -> Result<PlanarTransferEnv> {
    PlanarTransferEnv::new(cfg.clone(), seed)
}

impl PlanarTransferEnv {
    pub fn new(cfg: PlanarConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let boxed = |lo: [f64; 2], hi: [f64; 2]| BoxSpace::new(lo.to_vec(), hi.to_vec());
        let subgoal_boxes = [
            boxed([0.1, 0.2], [0.6, 0.8])?,
            boxed([0.45, 0.2], [0.95, 0.8])?,
            boxed(
                [TARGET_PEG_X[0], TARGET_PEG_Y[0]],
                [TARGET_PEG_X[1], TARGET_PEG_Y[1]],
            )?,
        ];
        let subtasks = subgoal_boxes
            .into_iter()
            .enumerate()
            .map(|(k, b)| SubtaskSpec {
                index: k + 1,
                horizon: cfg.subtask_horizons[k],
                subgoal_space: b,
                tolerance: cfg.tolerance,
            })
            .collect();
        let goal_space = boxed(
            [TARGET_PEG_X[0], TARGET_PEG_Y[0]],
            [TARGET_PEG_X[1], TARGET_PEG_Y[1]],
        )?;
        let spec = TaskSpec::new(
            "planar_transfer",
            cfg.episode_horizon,
            STATE_DIM,
            ACTION_DIM,
            goal_space,
            subtasks,
        )?;

        let mut rng = stream_rng(seed, SEED_STREAM_INIT_SETS);
        let handover = (0..cfg.init_set_size)
            .map(|_| handover_start(&cfg, &mut rng))
            .collect();
        let place = (0..cfg.init_set_size)
            .map(|_| place_start(&cfg, &mut rng))
            .collect();

        let mut env = Self {
            goal: Goal {
                values: spec.goal_space.center(),
                tolerance: cfg.tolerance,
            },
            cfg,
            spec,
            state: vec![0.0; STATE_DIM],
            steps: 0,
            done: false,
            init_sets: vec![handover, place],
        };
        env.state = env.pick_start_at(0.5);
        Ok(env)
    }

    pub fn config(&self) -> &PlanarConfig {
        &self.cfg
    }

    /// Stored start states of subtask `i >= 2`.
    pub fn initiation_set(&self, i: usize) -> Result<&[State]> {
        if i < 2 || i > 3 {
            return Err(Error::SubtaskOutOfRange { index: i, count: 3 });
        }
        Ok(&self.init_sets[i - 2])
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn pick_start_at(&self, y: f64) -> State {
        let mut s = vec![0.0; STATE_DIM];
        s[BX] = START_PEG_X;
        s[BY] = y;
        s[E1X] = HOME1[0];
        s[E1Y] = HOME1[1];
        s[J1] = 1.0;
        s[E2X] = HOME2[0];
        s[E2Y] = HOME2[1];
        s[J2] = 1.0;
        s
    }

    fn clip_arm(&self, x: f64, y: f64, reach: [f64; 2]) -> (f64, f64) {
        let [x0, y0, x1, y1] = self.cfg.workspace;
        (x.clamp(reach[0].max(x0), reach[1].min(x1)), y.clamp(y0, y1))
    }

    fn block_attached_to(s: &[f64]) -> Option<usize> {
        if s[ATT1] > 0.5 {
            Some(1)
        } else if s[ATT2] > 0.5 {
            Some(2)
        } else {
            None
        }
    }

    /// Pure transition function.
    pub fn transition(&self, s: &[f64], a: &[f64]) -> State {
        let a: Vec<f64> = a.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        let mut n = s.to_vec();
        let d = self.cfg.max_delta;
        let (x1, y1) = self.clip_arm(s[E1X] + d * a[0], s[E1Y] + d * a[1], REACH1_X);
        let (x2, y2) = self.clip_arm(s[E2X] + d * a[3], s[E2Y] + d * a[4], REACH2_X);
        n[E1X] = x1;
        n[E1Y] = y1;
        n[E2X] = x2;
        n[E2Y] = y2;

        let holder = Self::block_attached_to(s);
        match holder {
            Some(1) => {
                n[BX] = x1;
                n[BY] = y1;
                n[BTHETA] = wrap_angle(s[BTHETA] + self.cfg.wrist_coupling * (y1 - s[E1Y]));
            }
            Some(2) => {
                n[BX] = x2;
                n[BY] = y2;
            }
            _ => {}
        }

        let was_closed1 = s[J1] < JAW_CLOSED_BELOW;
        let was_closed2 = s[J2] < JAW_CLOSED_BELOW;
        n[J1] = (s[J1] + JAW_RATE * a[2]).clamp(0.0, 1.0);
        n[J2] = (s[J2] + JAW_RATE * a[5]).clamp(0.0, 1.0);
        let closed1 = n[J1] < JAW_CLOSED_BELOW;
        let closed2 = n[J2] < JAW_CLOSED_BELOW;

        let r = self.cfg.grasp_radius;
        let near =
            |n: &[f64], ex: usize, ey: usize| within_tolerance(&[n[ex], n[ey]], &[n[BX], n[BY]], r);
        let attach = |n: &mut [f64], arm: Option<usize>| {
            n[ATT1] = if arm == Some(1) { 1.0 } else { 0.0 };
            n[ATT2] = if arm == Some(2) { 1.0 } else { 0.0 };
            match arm {
                Some(1) => {
                    n[BX] = n[E1X];
                    n[BY] = n[E1Y];
                }
                Some(2) => {
                    n[BX] = n[E2X];
                    n[BY] = n[E2Y];
                }
                _ => {}
            }
        };

        match holder {
            // releasing: hand over if the other jaw is closed around the block
            Some(1) if !closed1 => {
                let to = if closed2 && near(&n, E2X, E2Y) {
                    Some(2)
                } else {
                    None
                };
                attach(&mut n, to);
            }
            Some(2) if !closed2 => {
                let to = if closed1 && near(&n, E1X, E1Y) {
                    Some(1)
                } else {
                    None
                };
                attach(&mut n, to);
            }
            None => {
                if !was_closed1 && closed1 && near(&n, E1X, E1Y) {
                    attach(&mut n, Some(1));
                } else if !was_closed2 && closed2 && near(&n, E2X, E2Y) {
                    attach(&mut n, Some(2));
                }
            }
            _ => {}
        }
        n
    }

    fn check_state(&self, s: &[f64]) -> Result<()> {
        check_dim("planar state", STATE_DIM, s.len())?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("planar state"));
        }
        Ok(())
    }
}

fn triangular([lo, mode, hi]: [f64; 3], rng: &mut SimRng) -> f64 {
    Triangular::new(lo, hi, mode)
        .expect("validated tilt range")
        .sample(rng)
}

fn handover_start(cfg: &PlanarConfig, rng: &mut SimRng) -> State {
    use rand::Rng;
    let mut s = vec![0.0; STATE_DIM];
    s[BX] = rng.random_range(0.42..0.58);
    s[BY] = rng.random_range(0.2..0.8);
    s[BTHETA] = triangular(cfg.handover_tilt, rng);
    s[E1X] = s[BX];
    s[E1Y] = s[BY];
    s[J1] = 0.0;
    s[E2X] = HOME2[0];
    s[E2Y] = HOME2[1];
    s[J2] = 1.0;
    s[ATT1] = 1.0;
    s
}

fn place_start(cfg: &PlanarConfig, rng: &mut SimRng) -> State {
    use rand::Rng;
    let mut s = vec![0.0; STATE_DIM];
    s[BX] = rng.random_range(0.5..0.9);
    s[BY] = rng.random_range(0.2..0.8);
    s[BTHETA] = triangular(cfg.place_tilt, rng);
    // arm 1 lingers near wherever the hand-over happened
    s[E1X] = rng.random_range(0.35..0.6);
    s[E1Y] = rng.random_range(0.2..0.8);
    s[J1] = 1.0;
    s[E2X] = s[BX];
    s[E2Y] = s[BY];
    s[J2] = 0.0;
    s[ATT2] = 1.0;
    s
}

impl GoalEnv for PlanarTransferEnv {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut SimRng) -> (State, Goal) {
        use rand::Rng;
        let y = rng.random_range(START_PEG_Y[0]..START_PEG_Y[1]);
        let goal = Goal {
            values: self.spec.goal_space.sample(rng),
            tolerance: self.cfg.tolerance,
        };
        self.state = self.pick_start_at(y);
        self.goal = goal.clone();
        self.steps = 0;
        self.done = false;
        (self.state.clone(), goal)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        check_dim("planar action", ACTION_DIM, action.len())?;
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        self.state = self.transition(&self.state, action);
        self.steps += 1;
        let reward = self.task_reward(&self.state, &self.goal);
        self.done = reward == 1.0 || self.steps >= self.spec.horizon;
        Ok(Step {
            state: self.state.clone(),
            reward,
            done: self.done,
        })
    }

    fn subtask_reset(&mut self, i: usize, rng: &mut SimRng) -> Result<State> {
        use rand::Rng;
        self.spec.subtask(i)?;
        self.state = if i == 1 {
            let y = rng.random_range(START_PEG_Y[0]..START_PEG_Y[1]);
            self.pick_start_at(y)
        } else {
            let set = &self.init_sets[i - 2];
            set[rng.random_range(0..set.len())].clone()
        };
        self.steps = 0;
        self.done = false;
        Ok(self.state.clone())
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        self.check_state(state)?;
        self.state = state.to_vec();
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    fn state(&self) -> State {
        self.state.clone()
    }

    fn goal(&self) -> &Goal {
        &self.goal
    }

    fn set_goal(&mut self, goal: Goal) -> Result<()> {
        check_dim("planar goal", SUBGOAL_DIM, goal.values.len())?;
        if !(goal.tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "goal tolerance must be positive".into(),
            ));
        }
        self.goal = goal;
        Ok(())
    }

    fn achieved_subgoal(&self, _i: usize, state: &[f64]) -> Vec<f64> {
        vec![state[BX], state[BY]]
    }

    fn subtask_reward(&self, i: usize, state: &[f64], subgoal: &[f64]) -> f64 {
        let phase = match i {
            1 => state[ATT1] > 0.5,
            2 => state[ATT2] > 0.5,
            3 => state[ATT1] < 0.5 && state[ATT2] < 0.5,
            _ => false,
        };
        let reached = within_tolerance(&[state[BX], state[BY]], subgoal, self.cfg.tolerance);
        if phase && reached {
            1.0
        } else {
            0.0
        }
    }

    fn task_reward(&self, state: &[f64], goal: &Goal) -> f64 {
        let released = state[ATT1] < 0.5 && state[ATT2] < 0.5;
        let upright = state[BTHETA].abs() <= self.cfg.orientation_tolerance;
        let placed = within_tolerance(&[state[BX], state[BY]], &goal.values, goal.tolerance);
        if released && upright && placed {
            1.0
        } else {
            0.0
        }
    }

    fn goal_subgoal(&self, goal: &Goal) -> Vec<f64> {
        goal.values.clone()
    }

    /// Grasping with arm 1, then holding with arm 2, then the goal.
    fn completed_subtasks(&self, state: &[f64], prev: usize) -> usize {
        if self.task_reward(state, &self.goal) == 1.0 {
            return 3;
        }
        let mut done = prev;
        if done == 0 && state[ATT1] > 0.5 {
            done = 1;
        }
        if done == 1 && state[ATT2] > 0.5 {
            done = 2;
        }
        done
    }

    /// Block pose: the initiation sets constrain nothing else that a skill
    /// controls at a subtask boundary.
    fn boundary_features(&self, state: &[f64]) -> Vec<f64> {
        vec![state[BX], state[BY], state[BTHETA]]
    }

    /// The state followed by both end-effector offsets to the block, scaled
    /// up so that grasp-radius distances are not lost in the noise.
    fn observation(&self, state: &[f64]) -> Vec<f64> {
        let mut obs = state.to_vec();
        for (ex, ey) in [(E1X, E1Y), (E2X, E2Y)] {
            obs.push(OFFSET_SCALE * (state[ex] - state[BX]));
            obs.push(OFFSET_SCALE * (state[ey] - state[BY]));
        }
        obs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn env() -> PlanarTransferEnv {
        make_planar_transfer(&PlanarConfig::default(), 0).unwrap()
    }

    #[test]
    fn default_shape() {
        let e = env();
        assert_eq!(e.spec().num_subtasks(), 3);
        assert_eq!(e.spec().horizon, 100);
        assert_eq!(e.initiation_set(2).unwrap().len(), PlanarConfig::default().init_set_size);
    }

    #[test]
    fn degenerate_workspace_is_rejected() {
        let cfg = PlanarConfig {
            workspace: [0.0, 0.0, 1.0, 0.0],
            ..Default::default()
        };
        assert!(matches!(
            make_planar_transfer(&cfg, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn reset_is_deterministic() {
        let mut e = env();
        let a = e.reset(&mut SimRng::seed_from_u64(0));
        let b = e.reset(&mut SimRng::seed_from_u64(0));
        assert_eq!(a, b);
        let (s, _) = a;
        assert_eq!(s[ATT1] + s[ATT2], 0.0);
        assert_eq!((s[J1], s[J2]), (1.0, 1.0));
        assert_eq!(s[BX], START_PEG_X);
    }

    #[test]
    fn zero_action_changes_nothing() {
        let mut e = env();
        let mut rng = SimRng::seed_from_u64(1);
        let (s, _) = e.reset(&mut rng);
        let step = e.step(&[0.0; ACTION_DIM]).unwrap();
        assert_eq!(step.state, s);
        assert_eq!(step.reward, 0.0);
        assert_eq!(e.steps(), 1);
    }

    #[test]
    fn goal_state_rewards_and_ends() {
        let mut e = env();
        let mut rng = SimRng::seed_from_u64(2);
        let (mut s, goal) = e.reset(&mut rng);
        s[BX] = goal.values[0];
        s[BY] = goal.values[1];
        e.set_state(&s).unwrap();
        let step = e.step(&[0.0; ACTION_DIM]).unwrap();
        assert_eq!(step.reward, 1.0);
        assert!(step.done);
        assert!(matches!(
            e.step(&[0.0; ACTION_DIM]),
            Err(Error::EpisodeFinished)
        ));
    }

    #[test]
    fn tilted_block_fails_the_goal() {
        let e = env();
        let goal = Goal {
            values: vec![0.85, 0.5],
            tolerance: 0.02,
        };
        let mut s = e.pick_start_at(0.5);
        s[BX] = 0.85;
        s[BY] = 0.5;
        s[BTHETA] = 0.3;
        assert_eq!(e.task_reward(&s, &goal), 0.0);
        assert_eq!(e.subtask_reward(3, &s, &goal.values), 1.0);
        s[BTHETA] = -0.2;
        assert_eq!(e.task_reward(&s, &goal), 1.0);
    }

    #[test]
    fn episode_stops_at_horizon() {
        let mut e = env();
        e.reset(&mut SimRng::seed_from_u64(3));
        for t in 1..=100 {
            let step = e.step(&[0.0; ACTION_DIM]).unwrap();
            assert_eq!(step.done, t == 100);
        }
        assert!(e.step(&[0.0; ACTION_DIM]).is_err());
    }

    #[test]
    fn handover_moves_attachment_atomically() {
        let e = env();
        let mut s = e.initiation_set(2).unwrap()[0].clone();
        s[E2X] = s[BX] + 0.01;
        s[E2Y] = s[BY];
        // arm 2 closes: arm 1 still holds
        let s1 = e.transition(&s, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        assert_eq!((s1[ATT1], s1[ATT2]), (1.0, 0.0));
        // arm 1 opens: block moves to arm 2
        let s2 = e.transition(&s1, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!((s2[ATT1], s2[ATT2]), (0.0, 1.0));
        assert_eq!((s2[BX], s2[BY]), (s2[E2X], s2[E2Y]));
        assert_eq!(s2[BTHETA], s[BTHETA]);
        // arm 2 moving vertically does not rotate the block
        let s3 = e.transition(&s2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(s3[BTHETA], s[BTHETA]);
    }

    #[test]
    fn carrying_with_arm_one_tilts_the_block() {
        let e = env();
        let s = e.initiation_set(2).unwrap()[0].clone();
        let dy = if s[E1Y] < 0.5 { 1.0 } else { -1.0 };
        let n = e.transition(&s, &[0.0, dy, 0.0, 0.0, 0.0, 0.0]);
        let expected = wrap_angle(s[BTHETA] + 4.0 * (n[E1Y] - s[E1Y]));
        assert!((n[BTHETA] - expected).abs() < 1e-12);
        assert!((n[E1Y] - s[E1Y]).abs() > 0.049);
    }

    #[test]
    fn releasing_drops_the_block_in_place() {
        let e = env();
        let s = e.initiation_set(2).unwrap()[3].clone();
        let n = e.transition(&s, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!((n[ATT1], n[ATT2]), (0.0, 0.0));
        assert_eq!((n[BX], n[BY]), (s[BX], s[BY]));
    }

    #[test]
    fn random_rollouts_keep_invariants() {
        let mut e = env();
        let mut rng = SimRng::seed_from_u64(9);
        for ep in 0..200 {
            let s0 = if ep % 3 == 0 {
                e.reset(&mut rng).0
            } else {
                e.subtask_reset(1 + ep % 3, &mut rng).unwrap()
            };
            let mut prev = s0;
            for _ in 0..50 {
                let a: Vec<f64> = (0..ACTION_DIM)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect();
                let Ok(step) = e.step(&a) else { break };
                let s = &step.state;
                assert!(s[ATT1] + s[ATT2] <= 1.0);
                if s[ATT1] == 1.0 {
                    assert_eq!((s[BX], s[BY]), (s[E1X], s[E1Y]));
                }
                if s[ATT2] == 1.0 {
                    assert_eq!((s[BX], s[BY]), (s[E2X], s[E2Y]));
                }
                let jump = ((s[BX] - prev[BX]).powi(2) + (s[BY] - prev[BY]).powi(2)).sqrt();
                assert!(jump <= e.cfg.max_delta * 2f64.sqrt() + 1e-12);
                assert!((0.0..=1.0).contains(&s[J1]) && (0.0..=1.0).contains(&s[J2]));
                assert!(s[BTHETA] > -std::f64::consts::PI && s[BTHETA] <= std::f64::consts::PI);
                assert!(step.reward == 0.0 || step.reward == 1.0);
                prev = step.state.clone();
                if step.done {
                    break;
                }
            }
        }
    }

    #[test]
    fn initiation_samples_come_from_the_stored_set() {
        let mut e = env();
        let mut rng = SimRng::seed_from_u64(4);
        for i in [2, 3] {
            let set = e.initiation_set(i).unwrap().to_vec();
            for _ in 0..300 {
                let s = e.subtask_reset(i, &mut rng).unwrap();
                assert!(set.contains(&s));
            }
        }
        assert!(e.subtask_reset(4, &mut rng).is_err());
        assert!(e.subtask_reset(0, &mut rng).is_err());
        let s = e.subtask_reset(2, &mut rng).unwrap();
        assert_eq!(s[ATT1], 1.0);
    }

    #[test]
    fn goals_cover_the_goal_box() {
        let mut e = env();
        let mut rng = SimRng::seed_from_u64(5);
        let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
        for _ in 0..1000 {
            let (_, g) = e.reset(&mut rng);
            for d in 0..2 {
                lo[d] = lo[d].min(g.values[d]);
                hi[d] = hi[d].max(g.values[d]);
            }
        }
        let b = &e.spec().goal_space;
        for d in 0..2 {
            assert!(hi[d] - lo[d] >= 0.9 * (b.hi[d] - b.lo[d]));
        }
    }

    #[test]
    fn subtask_reward_boundaries() {
        let e = env();
        let s = e.initiation_set(2).unwrap()[0].clone();
        let at = vec![s[BX], s[BY]];
        assert_eq!(e.subtask_reward(1, &s, &at), 1.0);
        assert_eq!(e.subtask_reward(1, &s, &[s[BX] + 0.02, s[BY]]), 1.0);
        assert_eq!(e.subtask_reward(1, &s, &[s[BX] + 0.2, s[BY]]), 0.0);
        // right place, wrong phase
        assert_eq!(e.subtask_reward(2, &s, &at), 0.0);
    }
}
