//! Scripted demonstrations and their binary file format (magic `CSKD`).
//!
//! ```text
//! magic "CSKD" | version u16 | subtask u16 | state_dim u16 | action_dim u16
//! | subgoal_dim u16 | episode_count u32
//! episode: steps u32 | steps * (state f32* | action f32* | subgoal f32*) | final state f32*
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::planar::PlanarTransferEnv;
use super::scripted::scripted_action;
use crate::envcore::{GoalEnv, SimRng, State};
use crate::error::{Error, Result};
use crate::tensorlite::checkpoint::{get_f32s, get_u16, get_u32, put_f32s, put_u16, put_u32};

pub const DEMO_MAGIC: &[u8; 4] = b"CSKD";
pub const DEMO_VERSION: u16 = 1;

/// Give up when fewer than half of the first attempts succeed.
const MIN_SUCCESS_RATE: f64 = 0.5;
const MIN_ATTEMPTS_BEFORE_ABORT: usize = 20;

/// One successful expert episode of subtask `subtask`.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub subtask: usize,
    pub subgoal: Vec<f64>,
    /// `actions.len() + 1` states, starting with the initial state.
    pub states: Vec<State>,
    pub actions: Vec<Vec<f64>>,
    pub success: bool,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Runs the scripted controller for subtask `i` from the environment's
/// current state. Returns the recorded episode (successful or not).
pub fn scripted_episode(
    env: &mut PlanarTransferEnv,
    i: usize,
    subgoal: &[f64],
) -> Result<Demonstration> {
    let horizon = env.spec().subtask(i)?.horizon;
    let mut states = vec![env.state()];
    let mut actions = Vec::new();
    let mut success = env.subtask_reward(i, &states[0], subgoal) == 1.0;
    while !success && actions.len() < horizon {
        let s = states.last().unwrap();
        let a = scripted_action(env.config(), i, s, subgoal);
        let step = env.step(&a)?;
        success = env.subtask_reward(i, &step.state, subgoal) == 1.0;
        actions.push(a);
        states.push(step.state);
        if step.done && !success {
            break;
        }
    }
    Ok(Demonstration {
        subtask: i,
        subgoal: subgoal.to_vec(),
        states,
        actions,
        success,
    })
}

/// Collects exactly `n_episodes` successful scripted demonstrations of
/// subtask `i`, starting from its initiation set with uniform subgoals.
/// Failed attempts are discarded and re-sampled.
pub fn collect_demonstrations(
    env: &mut PlanarTransferEnv,
    i: usize,
    n_episodes: usize,
    rng: &mut SimRng,
) -> Result<Vec<Demonstration>> {
    if n_episodes == 0 {
        return Err(Error::Demonstration("requested zero episodes".into()));
    }
    let space = env.spec().subtask(i)?.subgoal_space.clone();
    let mut demos = Vec::with_capacity(n_episodes);
    let mut attempts = 0usize;
    while demos.len() < n_episodes {
        env.reset(rng);
        env.subtask_reset(i, rng)?;
        let subgoal = space.sample(rng);
        let demo = scripted_episode(env, i, &subgoal)?;
        attempts += 1;
        if demo.success {
            demos.push(demo);
        }
        if attempts >= MIN_ATTEMPTS_BEFORE_ABORT
            && (demos.len() as f64) < MIN_SUCCESS_RATE * attempts as f64
        {
            return Err(Error::Demonstration(format!(
                "scripted controller solved only {} of {attempts} attempts of subtask {i}; check the task configuration",
                demos.len()
            )));
        }
    }
    Ok(demos)
}

/// Chains the scripted controllers over the whole task from a fresh reset:
/// uniform subgoals for the intermediate subtasks and the goal's subgoal for
/// the last. The result has `subtask == 0` and the task goal as `subgoal`;
/// `success` says whether every subtask completed, which does not imply
/// that the task reward was earned.
pub fn scripted_task_episode(env: &mut PlanarTransferEnv, rng: &mut SimRng) -> Result<Demonstration> {
    let (first, goal) = env.reset(rng);
    let k = env.spec().num_subtasks();
    let mut states = vec![first];
    let mut actions = Vec::new();
    let mut completed = true;
    for i in 1..=k {
        let subgoal = if i < k {
            env.spec().subtask(i)?.subgoal_space.sample(rng)
        } else {
            env.goal_subgoal(&goal)
        };
        let part = scripted_episode(env, i, &subgoal)?;
        states.extend(part.states.into_iter().skip(1));
        actions.extend(part.actions);
        if !part.success {
            completed = false;
            break;
        }
    }
    Ok(Demonstration {
        subtask: 0,
        subgoal: goal.values,
        states,
        actions,
        success: completed,
    })
}

/// Collects `n_episodes` whole-task scripted demonstrations in which every
/// subtask completed. They are not filtered on the task reward.
pub fn collect_task_demonstrations(env: &mut PlanarTransferEnv, n_episodes: usize, rng: &mut SimRng) -> Result<Vec<Demonstration>> {
    if n_episodes == 0 {
        return Err(Error::Demonstration("requested zero episodes".into()));
    }
    let max_attempts = n_episodes.saturating_mul(4).max(MIN_ATTEMPTS_BEFORE_ABORT);
    let mut demos = Vec::with_capacity(n_episodes);
    let mut attempts = 0;
    while demos.len() < n_episodes {
        if attempts == max_attempts {
            return Err(Error::Demonstration(format!(
                "only {} of {attempts} chained scripted episodes completed every subtask",
                demos.len()
            )));
        }
        attempts += 1;
        let d = scripted_task_episode(env, rng)?;
        if d.success {
            demos.push(d);
        }
    }
    Ok(demos)
}

/// Writes demonstrations of one subtask.
pub fn write_demos<W: Write>(w: &mut W, demos: &[Demonstration]) -> Result<()> {
    let first = demos
        .first()
        .ok_or_else(|| Error::Demonstration("nothing to write".into()))?;
    let (sd, ad, gd) = (
        first.states[0].len(),
        first.actions.first().map_or(0, |a| a.len()),
        first.subgoal.len(),
    );
    w.write_all(DEMO_MAGIC)?;
    put_u16(w, DEMO_VERSION)?;
    put_u16(w, first.subtask as u16)?;
    put_u16(w, sd as u16)?;
    put_u16(w, ad as u16)?;
    put_u16(w, gd as u16)?;
    put_u32(w, demos.len() as u32)?;
    for d in demos {
        if d.subtask != first.subtask {
            return Err(Error::Demonstration(
                "a demo file holds a single subtask".into(),
            ));
        }
        put_u32(w, d.actions.len() as u32)?;
        for (s, a) in d.states.iter().zip(&d.actions) {
            put_f32s(w, s)?;
            put_f32s(w, a)?;
            put_f32s(w, &d.subgoal)?;
        }
        put_f32s(w, d.states.last().unwrap())?;
    }
    Ok(())
}

/// Reads a demonstration file written by [`write_demos`].
pub fn read_demos<R: Read>(r: &mut R) -> Result<Vec<Demonstration>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DEMO_MAGIC {
        return Err(Error::Format("bad demonstration magic".into()));
    }
    let version = get_u16(r)?;
    if version != DEMO_VERSION {
        return Err(Error::Format(format!(
            "unsupported demonstration version {version}"
        )));
    }
    let subtask = get_u16(r)? as usize;
    let sd = get_u16(r)? as usize;
    let ad = get_u16(r)? as usize;
    let gd = get_u16(r)? as usize;
    let count = get_u32(r)? as usize;
    let mut demos = Vec::with_capacity(count);
    for _ in 0..count {
        let steps = get_u32(r)? as usize;
        let mut states = Vec::with_capacity(steps + 1);
        let mut actions = Vec::with_capacity(steps);
        let mut subgoal = Vec::new();
        for _ in 0..steps {
            states.push(get_f32s(r, sd)?);
            actions.push(get_f32s(r, ad)?);
            subgoal = get_f32s(r, gd)?;
        }
        states.push(get_f32s(r, sd)?);
        if steps == 0 {
            subgoal = vec![0.0; gd];
        }
        demos.push(Demonstration {
            subtask,
            subgoal,
            states,
            actions,
            success: true,
        });
    }
    Ok(demos)
}

pub fn save_demos(path: impl AsRef<Path>, demos: &[Demonstration]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_demos(&mut w, demos)?;
    w.flush()?;
    Ok(())
}

pub fn load_demos(path: impl AsRef<Path>) -> Result<Vec<Demonstration>> {
    read_demos(&mut BufReader::new(File::open(path)?))
}
