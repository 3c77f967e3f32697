//! Logistic classifiers scoring whether a boundary state lies in the next
//! subtask's initiation set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envcore::{ChainEnv, SimRng};
use crate::error::{check_dim, Error, Result};
use crate::tensorlite::{hidden_sizes, Adam, Checkpoint, Head, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    /// Positives and negatives collected per boundary (each).
    pub samples: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub lr: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            samples: 2_000,
            steps: 10_000,
            batch_size: 128,
            hidden: 64,
            layers: 3,
            lr: 1e-3,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    net: Mlp,
    opt: Adam,
}

impl Discriminator {
    pub fn new(input: usize, cfg: &DiscriminatorConfig, rng: &mut SimRng) -> Result<Self> {
        let net = Mlp::new(input, &hidden_sizes(cfg.layers, cfg.hidden), 1, Head::Identity, rng)?;
        Ok(Self {
            opt: Adam::new(net.num_params(), cfg.lr),
            net,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Probability in `(0, 1)` that boundary features `features` belong to
    /// the target set.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.net.forward(features, 1)?[0]))
    }

    pub fn scores(&self, states: &[f64], n: usize) -> Result<Vec<f64>> {
        Ok(self.net.forward(states, n)?.into_iter().map(sigmoid).collect())
    }

    /// Logistic regression of positives (label 1) against negatives (label 0)
    /// with balanced minibatches. Returns the mean loss of the last step.
    pub fn fit(&mut self, positives: &[Vec<f64>], negatives: &[Vec<f64>], steps: usize, batch: usize, rng: &mut SimRng) -> Result<f64> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::Training(
                "discriminator needs positives and negatives".into(),
            ));
        }
        let d = self.input_dim();
        for s in positives.iter().chain(negatives) {
            check_dim("discriminator sample", d, s.len())?;
        }
        let half = (batch / 2).max(1);
        let n = 2 * half;
        let mut x = Vec::with_capacity(n * d);
        let mut last = 0.0;
        for _ in 0..steps {
            x.clear();
            for _ in 0..half {
                x.extend_from_slice(&positives[rng.random_range(0..positives.len())]);
            }
            for _ in 0..half {
                x.extend_from_slice(&negatives[rng.random_range(0..negatives.len())]);
            }
            let tape = self.net.forward_cached(&x, n)?;
            let mut up = Vec::with_capacity(n);
            let mut loss = 0.0;
            for (r, z) in tape.output().iter().enumerate() {
                let y = if r < half { 1.0 } else { 0.0 };
                loss += softplus(*z) - y * z;
                up.push((sigmoid(*z) - y) / n as f64);
            }
            last = loss / n as f64;
            let g = self.net.backward(&tape, &up)?;
            self.opt.step(self.net.params_mut(), &g.params)?;
        }
        Ok(last)
    }

    pub fn save_into(&self, ck: &mut Checkpoint, name: &str) {
        ck.push_network(name, &self.net, Some(&self.opt));
    }

    pub fn load_from(ck: &Checkpoint, name: &str, lr: f64) -> Result<Self> {
        let (net, opt) = ck.network(name)?;
        Ok(Self {
            opt: opt.unwrap_or_else(|| Adam::new(net.num_params(), lr)),
            net,
        })
    }
}

/// Positives and negatives for the discriminator of boundary `i` (between
/// subtasks `i` and `i + 1`): boundary features of start states of subtask
/// `i + 1` and of terminal states of successful subtask-`i` runs under
/// uniform subgoals.
pub fn discriminator_data<E: ChainEnv + ?Sized>(env: &mut E, i: usize, samples: usize, rng: &mut SimRng) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let positives = (0..samples)
        .map(|_| {
            let s = env.sample_initiation(i + 1, rng)?;
            Ok(env.boundary_features(&s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut negatives = Vec::with_capacity(samples);
    let max_attempts = samples.saturating_mul(50).max(1_000);
    let mut attempts = 0;
    while negatives.len() < samples && attempts < max_attempts {
        attempts += 1;
        let start = env.sample_initiation(i, rng)?;
        env.begin_at(i, &start)?;
        let g = env.subgoal_space(i).sample(rng);
        let out = env.execute(i, &g, rng)?;
        if out.success {
            negatives.push(env.boundary_features(&out.terminal));
        }
    }
    if negatives.is_empty() {
        return Err(Error::Training(format!(
            "subtask {i} never succeeded while collecting discriminator data"
        )));
    }
    Ok((positives, negatives))
}

/// Trains one discriminator per boundary `1..K-1`.
pub fn train_discriminators<E: ChainEnv + ?Sized>(env: &mut E, cfg: &DiscriminatorConfig, rng: &mut SimRng) -> Result<Vec<Discriminator>> {
    let k = env.num_subtasks();
    let mut out = Vec::with_capacity(k - 1);
    for i in 1..k {
        let (pos, neg) = discriminator_data(env, i, cfg.samples, rng)?;
        let mut d = Discriminator::new(pos[0].len(), cfg, rng)?;
        d.fit(&pos, &neg, cfg.steps, cfg.batch_size, rng)?;
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{make_chain_world, ChainWorldConfig};
    use rand::SeedableRng;

    #[test]
    fn untrained_scores_are_near_one_half() {
        let mut rng = SimRng::seed_from_u64(0);
        let d = Discriminator::new(3, &DiscriminatorConfig::default(), &mut rng).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -1.0, 0.5], [0.3, 0.9, -0.2]] {
            assert!((d.score(&x).unwrap() - 0.5).abs() < 0.1);
        }
    }

    #[test]
    fn separates_initiation_set_from_outside_states() {
        let mut env = make_chain_world(&ChainWorldConfig::conflict()).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        let cfg = DiscriminatorConfig {
            samples: 500,
            steps: 1_500,
            ..DiscriminatorConfig::default()
        };
        let ds = train_discriminators(&mut env, &cfg, &mut rng).unwrap();
        assert_eq!(ds.len(), 2);
        // second subtask starts in [0.3, 1]
        assert!(ds[0].score(&[0.8]).unwrap() > 0.5);
        assert!(ds[0].score(&[0.05]).unwrap() < 0.5);
        // third subtask starts in [0.7, 1]
        assert!(ds[1].score(&[0.9]).unwrap() > 0.5);
        assert!(ds[1].score(&[0.35]).unwrap() < 0.5);
    }
}
