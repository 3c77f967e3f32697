//! Goal-conditioned behaviour cloning with hindsight goals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::flat::{task_observation, FlatPolicy};
use crate::envcore::{GoalEnv, SimRng};
use crate::error::{Error, Result};
use crate::tasks::Demonstration;
use crate::tensorlite::{hidden_sizes, Adam, Head, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcbcConfig {
    pub hidden: usize,
    pub layers: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Probability that a sample's goal is replaced by a later achieved position.
    pub relabel_prob: f64,
}

impl Default for GcbcConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            layers: 3,
            lr: 1e-3,
            batch_size: 256,
            epochs: 100,
            relabel_prob: 0.5,
        }
    }
}

/// Fits a tanh-headed network to demonstration actions by mean squared
/// error. Returns the policy and the mean loss of every epoch.
pub fn train_gcbc<E: GoalEnv + ?Sized>(env: &E, demos: &[Demonstration], cfg: &GcbcConfig, rng: &mut SimRng) -> Result<(FlatPolicy, Vec<f64>)> {
    let rows: Vec<(usize, usize)> = demos
        .iter()
        .enumerate()
        .flat_map(|(d, demo)| (0..demo.len()).map(move |t| (d, t)))
        .collect();
    if rows.is_empty() {
        return Err(Error::Demonstration("no demonstration steps to clone".into()));
    }
    if demos.iter().any(|d| d.subtask != 0) {
        return Err(Error::Demonstration(
            "behaviour cloning needs whole-task demonstrations".into(),
        ));
    }
    let k = env.spec().num_subtasks();
    let act_dim = env.spec().action_dim;
    let first = &demos[0];
    let obs_dim = task_observation(env, &first.states[0], &first.subgoal).len();
    let head = Head::Tanh {
        lo: vec![-1.0; act_dim],
        hi: vec![1.0; act_dim],
    };
    let mut net = Mlp::new(obs_dim, &hidden_sizes(cfg.layers, cfg.hidden), act_dim, head, rng)?;
    let mut opt = Adam::new(net.num_params(), cfg.lr);
    let batch = cfg.batch_size.max(1);
    let steps_per_epoch = rows.len().div_ceil(batch);
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut x = Vec::with_capacity(batch * obs_dim);
    let mut y = Vec::with_capacity(batch * act_dim);
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..steps_per_epoch {
            x.clear();
            y.clear();
            for _ in 0..batch {
                let (d, t) = rows[rng.random_range(0..rows.len())];
                let demo = &demos[d];
                let goal = if rng.random::<f64>() < cfg.relabel_prob {
                    let future = rng.random_range(t + 1..=demo.len());
                    env.achieved_subgoal(k, &demo.states[future])
                } else {
                    demo.subgoal.clone()
                };
                x.extend(task_observation(env, &demo.states[t], &goal));
                y.extend_from_slice(&demo.actions[t]);
            }
            let tape = net.forward_cached(&x, batch)?;
            let scale = 1.0 / (batch * act_dim) as f64;
            let mut up = Vec::with_capacity(y.len());
            let mut loss = 0.0;
            for (p, t) in tape.output().iter().zip(&y) {
                loss += (p - t) * (p - t) * scale;
                up.push(2.0 * (p - t) * scale);
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite("behaviour cloning loss"));
            }
            let g = net.backward(&tape, &up)?;
            opt.step(net.params_mut(), &g.params)?;
            total += loss;
        }
        losses.push(total / steps_per_epoch as f64);
    }
    Ok((FlatPolicy::Cloned(net), losses))
}
