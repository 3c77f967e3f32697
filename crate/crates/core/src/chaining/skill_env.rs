use crate::envcore::{BoxSpace, ChainEnv, GoalEnv, SimRng, SubtaskOutcome};
use crate::error::{Error, Result};
use crate::skills::{rollout_subtask, SkillPolicy};

/// Boundary view of a low-level environment driven by frozen skills. Skills
/// act deterministically; the boundary state is the raw environment state.
#[derive(Debug)]
pub struct SkillChainEnv<E: GoalEnv> {
    env: E,
    skills: Vec<SkillPolicy>,
}

impl<E: GoalEnv> SkillChainEnv<E> {
    /// `skills[i - 1]` must be the frozen policy of subtask `i`.
    pub fn new(env: E, skills: Vec<SkillPolicy>) -> Result<Self> {
        let k = env.spec().num_subtasks();
        if skills.len() != k {
            return Err(Error::InvalidConfig(format!(
                "{} skills for {k} subtasks",
                skills.len()
            )));
        }
        for (j, s) in skills.iter().enumerate() {
            if s.index() != j + 1 {
                return Err(Error::InvalidConfig(format!(
                    "skill for subtask {} given in slot {}",
                    s.index(),
                    j + 1
                )));
            }
            if !s.is_frozen() {
                return Err(Error::InvalidConfig(format!(
                    "skill {} is not frozen",
                    s.index()
                )));
            }
        }
        Ok(Self { env, skills })
    }

    pub fn skills(&self) -> &[SkillPolicy] {
        &self.skills
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn into_parts(self) -> (E, Vec<SkillPolicy>) {
        (self.env, self.skills)
    }
}

impl<E: GoalEnv> ChainEnv for SkillChainEnv<E> {
    fn num_subtasks(&self) -> usize {
        self.skills.len()
    }

    fn boundary_dim(&self) -> usize {
        self.env.spec().state_dim
    }

    fn subgoal_space(&self, i: usize) -> &BoxSpace {
        &self.env.spec().subtasks[i - 1].subgoal_space
    }

    fn reset_chain(&mut self, rng: &mut SimRng) -> Vec<f64> {
        self.env.reset(rng).0
    }

    fn goal_features(&self) -> Vec<f64> {
        self.env.goal().values.clone()
    }

    fn final_subgoal(&self) -> Vec<f64> {
        self.env.goal_subgoal(self.env.goal())
    }

    fn execute(&mut self, i: usize, subgoal: &[f64], rng: &mut SimRng) -> Result<SubtaskOutcome> {
        let skill = self.skills.get(i - 1).ok_or(Error::SubtaskOutOfRange {
            index: i,
            count: self.skills.len(),
        })?;
        let start = self.env.state();
        let out = rollout_subtask(skill, &mut self.env, Some(&start), subgoal, true, rng)?;
        Ok(SubtaskOutcome {
            success: out.success,
            terminal: out.terminal,
            steps: out.steps,
        })
    }

    fn task_reward(&self) -> f64 {
        self.env.task_reward(&self.env.state(), self.env.goal())
    }

    fn sample_initiation(&mut self, i: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.env.subtask_reset(i, rng)
    }

    fn begin_at(&mut self, _i: usize, state: &[f64]) -> Result<()> {
        self.env.set_state(state)
    }

    fn boundary_features(&self, state: &[f64]) -> Vec<f64> {
        self.env.boundary_features(state)
    }
}
