//! Soft actor-critic with twin critics, EMA targets, automatic temperature
//! and two optional actor regularizers: a demonstration term and a weighted
//! self-imitation term.
//!
//! Actions live in `[-1, 1]^d`. Observations are flat feature rows.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::replay::Batch;
use crate::envcore::SimRng;
use crate::error::{check_dim, Error, Result};
use crate::tensorlite::gaussian::SQUASH_CLIP;
use crate::tensorlite::{
    ema_update, hidden_sizes, squashed_from_noise, squashed_log_prob, squashed_mean, Adam,
    Checkpoint, Head, Mlp, DEFAULT_HIDDEN, DEFAULT_LAYERS, LOG_STD_MAX, LOG_STD_MIN,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub hidden: usize,
    pub layers: usize,
    pub lr: f64,
    pub tau: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub init_temperature: f64,
    pub learn_temperature: bool,
    /// Defaults to `-action_dim`.
    pub target_entropy: Option<f64>,
    /// Initial log standard deviation of the actor.
    pub init_log_std: f64,
    /// Demonstration coefficient at step 0.
    pub demo_coef: f64,
    /// The demonstration coefficient halves every this many environment steps.
    pub demo_halving: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            layers: DEFAULT_LAYERS,
            lr: 1e-4,
            tau: 5e-3,
            gamma: 0.99,
            batch_size: 256,
            init_temperature: 0.1,
            learn_temperature: true,
            target_entropy: None,
            init_log_std: -0.5,
            demo_coef: 0.3,
            demo_halving: 200_000,
        }
    }
}

impl SacConfig {
    /// Annealed demonstration coefficient after `env_steps` steps.
    pub fn demo_coef_at(&self, env_steps: u64) -> f64 {
        if self.demo_halving == 0 {
            return self.demo_coef;
        }
        self.demo_coef * 0.5f64.powi((env_steps / self.demo_halving) as i32)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.layers >= 1
            && self.hidden >= 1
            && self.lr > 0.0
            && self.tau > 0.0
            && self.tau <= 1.0
            && (0.0..=1.0).contains(&self.gamma)
            && self.batch_size >= 1
            && self.init_temperature >= 0.0
            && !(self.learn_temperature && self.init_temperature == 0.0)
            && self.demo_coef >= 0.0
            && (LOG_STD_MIN..LOG_STD_MAX).contains(&self.init_log_std);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid SAC settings: {self:?}")))
        }
    }
}

/// Demonstration regularizer: `coef * mean ||u(s) - atanh(a^e)||^2`, where
/// `u(s)` is the actor's pre-squash mean.
#[derive(Debug, Clone, Copy)]
pub struct DemoTerm<'a> {
    pub obs: &'a [f64],
    pub actions: &'a [f64],
    pub n: usize,
    pub coef: f64,
}

/// Weighted log-likelihood term: `-coef * mean w * log pi(a | s)`.
#[derive(Debug, Clone, Copy)]
pub struct ImitationTerm<'a> {
    pub obs: &'a [f64],
    pub actions: &'a [f64],
    pub weights: &'a [f64],
    pub n: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorStats {
    /// Total minimized loss.
    pub loss: f64,
    pub sac_loss: f64,
    pub demo_loss: f64,
    pub imitation_loss: f64,
    /// `-mean log pi` of the on-policy samples.
    pub entropy: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    cfg: SacConfig,
    obs_dim: usize,
    act_dim: usize,
    actor: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    log_temp: f64,
    temp_opt: Adam,
    updates: u64,
}

fn join_rows(a: &[f64], da: usize, b: &[f64], db: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (da + db));
    for r in 0..n {
        out.extend_from_slice(&a[r * da..(r + 1) * da]);
        out.extend_from_slice(&b[r * db..(r + 1) * db]);
    }
    out
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, cfg: SacConfig, rng: &mut SimRng) -> Result<Self> {
        cfg.validate()?;
        let hidden = hidden_sizes(cfg.layers, cfg.hidden);
        let mut actor = Mlp::new(obs_dim, &hidden, act_dim, Head::Gaussian, rng)?;
        // bias the log-std half so the initial policy explores at init_log_std
        let raw = (2.0 * (cfg.init_log_std - LOG_STD_MIN) / (LOG_STD_MAX - LOG_STD_MIN) - 1.0).atanh();
        let n = actor.num_params();
        for b in &mut actor.params_mut()[n - act_dim..] {
            *b = raw;
        }
        let q1 = Mlp::new(obs_dim + act_dim, &hidden, 1, Head::Identity, rng)?;
        let q2 = Mlp::new(obs_dim + act_dim, &hidden, 1, Head::Identity, rng)?;
        let log_temp = if cfg.init_temperature > 0.0 {
            cfg.init_temperature.ln()
        } else {
            f64::NEG_INFINITY
        };
        Ok(Self {
            actor_opt: Adam::new(actor.num_params(), cfg.lr),
            q1_opt: Adam::new(q1.num_params(), cfg.lr),
            q2_opt: Adam::new(q2.num_params(), cfg.lr),
            temp_opt: Adam::new(1, cfg.lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            log_temp,
            obs_dim,
            act_dim,
            cfg,
            updates: 0,
        })
    }

    /// Replaces the online critics (and their targets) with given networks.
    pub fn with_critics(mut self, q1: Mlp, q2: Mlp) -> Result<Self> {
        for q in [&q1, &q2] {
            check_dim("critic input", self.obs_dim + self.act_dim, q.input_dim())?;
            check_dim("critic output", 1, q.output_dim())?;
        }
        self.q1_opt = Adam::new(q1.num_params(), self.cfg.lr);
        self.q2_opt = Adam::new(q2.num_params(), self.cfg.lr);
        self.q1_target = q1.clone();
        self.q2_target = q2.clone();
        self.q1 = q1;
        self.q2 = q2;
        Ok(self)
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critics(&self) -> (&Mlp, &Mlp) {
        (&self.q1, &self.q2)
    }

    pub fn target_critics(&self) -> (&Mlp, &Mlp) {
        (&self.q1_target, &self.q2_target)
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Scales the network learning rates to `factor * cfg.lr` (the
    /// temperature keeps its rate).
    pub fn set_lr_factor(&mut self, factor: f64) {
        let lr = self.cfg.lr * factor;
        self.actor_opt.lr = lr;
        self.q1_opt.lr = lr;
        self.q2_opt.lr = lr;
    }

    pub fn temperature(&self) -> f64 {
        self.log_temp.exp()
    }

    /// Digest of every network parameter.
    pub fn checksum(&self) -> u64 {
        [&self.actor, &self.q1, &self.q2, &self.q1_target, &self.q2_target]
            .iter()
            .fold(0u64, |h, net| h.rotate_left(13) ^ net.checksum())
    }

    /// `(mean, log_std)` rows of the actor.
    fn split_head(&self, out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.act_dim;
        let mut mean = Vec::with_capacity(out.len() / 2);
        let mut log_std = Vec::with_capacity(out.len() / 2);
        for row in out.chunks_exact(2 * d) {
            mean.extend_from_slice(&row[..d]);
            log_std.extend_from_slice(&row[d..]);
        }
        (mean, log_std)
    }

    /// Actions for `n` observation rows: the squashed mean when
    /// `deterministic`, otherwise a sample.
    pub fn act_batch(&self, obs: &[f64], n: usize, deterministic: bool, rng: &mut SimRng) -> Result<Vec<f64>> {
        let out = self.actor.forward(obs, n)?;
        let (mean, log_std) = self.split_head(&out);
        if deterministic {
            return Ok(squashed_mean(&mean));
        }
        let d = self.act_dim;
        let mut actions = Vec::with_capacity(n * d);
        for r in 0..n {
            let noise: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let s = squashed_from_noise(&mean[r * d..(r + 1) * d], &log_std[r * d..(r + 1) * d], &noise);
            actions.extend(s.action);
        }
        Ok(actions)
    }

    pub fn act(&self, obs: &[f64], deterministic: bool, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.act_batch(obs, 1, deterministic, rng)
    }

    /// Pre-squash actor means.
    pub fn actor_means(&self, obs: &[f64], n: usize) -> Result<Vec<f64>> {
        let out = self.actor.forward(obs, n)?;
        Ok(self.split_head(&out).0)
    }

    /// Log density of `actions` under the current policy, one per row.
    pub fn log_prob(&self, obs: &[f64], actions: &[f64], n: usize) -> Result<Vec<f64>> {
        check_dim("log-prob actions", n * self.act_dim, actions.len())?;
        let out = self.actor.forward(obs, n)?;
        let (mean, log_std) = self.split_head(&out);
        let d = self.act_dim;
        Ok((0..n)
            .map(|r| {
                let rows = r * d..(r + 1) * d;
                squashed_log_prob(&mean[rows.clone()], &log_std[rows.clone()], &actions[rows]).0
            })
            .collect())
    }

    /// Online critic values `(q1, q2)`.
    pub fn q_values(&self, obs: &[f64], actions: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("critic observations", n * self.obs_dim, obs.len())?;
        check_dim("critic actions", n * self.act_dim, actions.len())?;
        let x = join_rows(obs, self.obs_dim, actions, self.act_dim, n);
        Ok((self.q1.forward(&x, n)?, self.q2.forward(&x, n)?))
    }

    /// `min(Q1, Q2)(s, a)` on the online critics.
    pub fn min_q(&self, obs: &[f64], actions: &[f64], n: usize) -> Result<Vec<f64>> {
        let (a, b) = self.q_values(obs, actions, n)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
    }

    /// `min(Q1', Q2')(s, a)` on the target critics.
    pub fn target_min_q(&self, obs: &[f64], actions: &[f64], n: usize) -> Result<Vec<f64>> {
        check_dim("critic observations", n * self.obs_dim, obs.len())?;
        check_dim("critic actions", n * self.act_dim, actions.len())?;
        let x = join_rows(obs, self.obs_dim, actions, self.act_dim, n);
        let a = self.q1_target.forward(&x, n)?;
        let b = self.q2_target.forward(&x, n)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
    }

    /// `min(Q1', Q2')(s, a) - temperature * log pi(a | s)` with `a ~ pi(.|s)`
    /// evaluated on the target critics. The entropy part is optional.
    pub fn target_values(&self, obs: &[f64], n: usize, rng: &mut SimRng, with_entropy: bool) -> Result<Vec<f64>> {
        let out = self.actor.forward(obs, n)?;
        let (mean, log_std) = self.split_head(&out);
        let d = self.act_dim;
        let mut actions = Vec::with_capacity(n * d);
        let mut logp = Vec::with_capacity(n);
        for r in 0..n {
            let noise: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let s = squashed_from_noise(&mean[r * d..(r + 1) * d], &log_std[r * d..(r + 1) * d], &noise);
            actions.extend(s.action);
            logp.push(s.log_prob);
        }
        let x = join_rows(obs, self.obs_dim, &actions, d, n);
        let t1 = self.q1_target.forward(&x, n)?;
        let t2 = self.q2_target.forward(&x, n)?;
        let temp = if with_entropy { self.temperature() } else { 0.0 };
        Ok((0..n)
            .map(|r| {
                let q = t1[r].min(t2[r]);
                if temp > 0.0 {
                    q - temp * logp[r]
                } else {
                    q
                }
            })
            .collect())
    }

    /// One gradient step of both critics toward fixed `targets` (mean squared
    /// error), followed by the EMA target update. Returns the mean loss of the
    /// two critics.
    pub fn fit_critics(&mut self, obs: &[f64], actions: &[f64], targets: &[f64], n: usize) -> Result<f64> {
        check_dim("critic targets", n, targets.len())?;
        check_dim("critic observations", n * self.obs_dim, obs.len())?;
        check_dim("critic actions", n * self.act_dim, actions.len())?;
        if n == 0 {
            return Err(Error::Training("empty critic batch".into()));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("critic target"));
        }
        let x = join_rows(obs, self.obs_dim, actions, self.act_dim, n);
        let mut total = 0.0;
        for (q, opt) in [(&mut self.q1, &mut self.q1_opt), (&mut self.q2, &mut self.q2_opt)] {
            let tape = q.forward_cached(&x, n)?;
            let mut up = Vec::with_capacity(n);
            let mut loss = 0.0;
            for (p, y) in tape.output().iter().zip(targets) {
                let e = p - y;
                loss += e * e;
                up.push(2.0 * e / n as f64);
            }
            loss /= n as f64;
            if !loss.is_finite() {
                return Err(Error::NonFinite("critic loss"));
            }
            total += loss;
            let g = q.backward(&tape, &up)?;
            opt.step(q.params_mut(), &g.params)?;
        }
        ema_update(self.q1_target.params_mut(), self.q1.params(), self.cfg.tau)?;
        ema_update(self.q2_target.params_mut(), self.q2.params(), self.cfg.tau)?;
        Ok(0.5 * total)
    }

    /// Standard SAC critic step on a replay batch.
    pub fn critic_update(&mut self, batch: &Batch, rng: &mut SimRng) -> Result<f64> {
        let v = self.target_values(&batch.next_obs, batch.n, rng, true)?;
        let y = sac_targets(&batch.rewards, &batch.terminals, &v, self.cfg.gamma);
        self.fit_critics(&batch.obs, &batch.actions, &y, batch.n)
    }

    /// As [`SacAgent::critic_update`] with targets clipped to the range
    /// `[lo, hi]` of achievable returns. With sparse rewards this stops
    /// bootstrapped overestimates from feeding on themselves.
    pub fn critic_update_bounded(&mut self, batch: &Batch, lo: f64, hi: f64, rng: &mut SimRng) -> Result<f64> {
        let v = self.target_values(&batch.next_obs, batch.n, rng, true)?;
        let y: Vec<f64> = sac_targets(&batch.rewards, &batch.terminals, &v, self.cfg.gamma)
            .into_iter()
            .map(|y| y.clamp(lo, hi))
            .collect();
        self.fit_critics(&batch.obs, &batch.actions, &y, batch.n)
    }

    /// One actor step on `E[temperature * log pi - min Q]` over `obs`, plus
    /// the optional regularizers, followed by a temperature step.
    pub fn actor_update(
        &mut self,
        obs: &[f64],
        n: usize,
        demo: Option<DemoTerm<'_>>,
        imitation: Option<ImitationTerm<'_>>,
        rng: &mut SimRng,
    ) -> Result<ActorStats> {
        if n == 0 {
            return Err(Error::Training("empty actor batch".into()));
        }
        let d = self.act_dim;
        let temp = self.temperature();
        let tape = self.actor.forward_cached(obs, n)?;
        let (mean, log_std) = self.split_head(tape.output());
        let mut samples = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n * d);
        for r in 0..n {
            let noise: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let s = squashed_from_noise(&mean[r * d..(r + 1) * d], &log_std[r * d..(r + 1) * d], &noise);
            actions.extend_from_slice(&s.action);
            samples.push(s);
        }
        let x = join_rows(obs, self.obs_dim, &actions, d, n);
        let t1 = self.q1.forward_cached(&x, n)?;
        let t2 = self.q2.forward_cached(&x, n)?;
        // route each row's gradient through whichever critic is smaller
        let mut up1 = vec![0.0; n];
        let mut up2 = vec![0.0; n];
        let mut sac_loss = 0.0;
        let mut logp_sum = 0.0;
        for r in 0..n {
            let (a, b) = (t1.output()[r], t2.output()[r]);
            if a <= b {
                up1[r] = 1.0;
            } else {
                up2[r] = 1.0;
            }
            sac_loss += temp_term(temp, samples[r].log_prob) - a.min(b);
            logp_sum += samples[r].log_prob;
        }
        sac_loss /= n as f64;
        let g1 = self.q1.input_gradient(&t1, &up1)?;
        let g2 = self.q2.input_gradient(&t2, &up2)?;
        let width = self.obs_dim + d;
        let inv_n = 1.0 / n as f64;
        let mut upstream = vec![0.0; n * 2 * d];
        for (r, s) in samples.iter().enumerate() {
            let row = &mut upstream[r * 2 * d..(r + 1) * 2 * d];
            for j in 0..d {
                let dq = g1[r * width + self.obs_dim + j] + g2[r * width + self.obs_dim + j];
                let dl_da = -dq;
                let (dm, ds) = if temp > 0.0 {
                    (temp * s.dlogp_dmean[j], temp * s.dlogp_dlogstd[j])
                } else {
                    (0.0, 0.0)
                };
                row[j] = inv_n * (dm + dl_da * s.da_dmean[j]);
                row[d + j] = inv_n * (ds + dl_da * s.da_dlogstd[j]);
            }
        }
        let mut grads = self.actor.backward(&tape, &upstream)?.params;

        let mut demo_loss = 0.0;
        if let Some(t) = demo.filter(|t| t.n > 0) {
            check_dim("demonstration actions", t.n * d, t.actions.len())?;
            let dt = self.actor.forward_cached(t.obs, t.n)?;
            let mut up = vec![0.0; t.n * 2 * d];
            for r in 0..t.n {
                for j in 0..d {
                    let m = dt.output()[r * 2 * d + j];
                    let target = t.actions[r * d + j].clamp(-SQUASH_CLIP, SQUASH_CLIP).atanh();
                    let e = m - target;
                    demo_loss += e * e;
                    up[r * 2 * d + j] = t.coef * 2.0 * e / t.n as f64;
                }
            }
            demo_loss = t.coef * demo_loss / t.n as f64;
            add_into(&mut grads, &self.actor.backward(&dt, &up)?.params);
        }

        let mut imitation_loss = 0.0;
        if let Some(t) = imitation.filter(|t| t.n > 0) {
            check_dim("imitation actions", t.n * d, t.actions.len())?;
            check_dim("imitation weights", t.n, t.weights.len())?;
            let it = self.actor.forward_cached(t.obs, t.n)?;
            let (im, is) = self.split_head(it.output());
            let mut up = vec![0.0; t.n * 2 * d];
            for r in 0..t.n {
                let w = t.weights[r];
                if w == 0.0 {
                    continue;
                }
                let rows = r * d..(r + 1) * d;
                let (lp, dm, ds) = squashed_log_prob(&im[rows.clone()], &is[rows.clone()], &t.actions[rows]);
                imitation_loss -= t.coef * w * lp / t.n as f64;
                let scale = -t.coef * w / t.n as f64;
                for j in 0..d {
                    up[r * 2 * d + j] = scale * dm[j];
                    up[r * 2 * d + d + j] = scale * ds[j];
                }
            }
            add_into(&mut grads, &self.actor.backward(&it, &up)?.params);
        }

        let loss = sac_loss + demo_loss + imitation_loss;
        if !loss.is_finite() {
            return Err(Error::NonFinite("actor loss"));
        }
        self.actor_opt.step(self.actor.params_mut(), &grads)?;

        let mean_logp = logp_sum * inv_n;
        if self.cfg.learn_temperature {
            let target = self.cfg.target_entropy.unwrap_or(-(d as f64));
            // d/d log_temp of -log_temp * (log pi + target)
            let g = [-(mean_logp + target)];
            let mut lt = [self.log_temp];
            self.temp_opt.step(&mut lt, &g)?;
            self.log_temp = lt[0];
        }
        self.updates += 1;
        Ok(ActorStats {
            loss,
            sac_loss,
            demo_loss,
            imitation_loss,
            entropy: -mean_logp,
            temperature: self.temperature(),
        })
    }

    /// Writes every network, optimizer and the temperature under `prefix`.
    pub fn save_into(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.push_network(&format!("{prefix}.actor"), &self.actor, Some(&self.actor_opt));
        ck.push_network(&format!("{prefix}.q1"), &self.q1, Some(&self.q1_opt));
        ck.push_network(&format!("{prefix}.q2"), &self.q2, Some(&self.q2_opt));
        ck.push_network(&format!("{prefix}.q1_target"), &self.q1_target, None);
        ck.push_network(&format!("{prefix}.q2_target"), &self.q2_target, None);
        ck.push_scalars(
            &format!("{prefix}.state"),
            &[self.log_temp.max(-1e30), self.updates as f64],
        );
    }

    /// Restores an agent written by [`SacAgent::save_into`].
    pub fn load_from(ck: &Checkpoint, prefix: &str, cfg: SacConfig) -> Result<Self> {
        cfg.validate()?;
        let (actor, actor_opt) = ck.network(&format!("{prefix}.actor"))?;
        let (q1, q1_opt) = ck.network(&format!("{prefix}.q1"))?;
        let (q2, q2_opt) = ck.network(&format!("{prefix}.q2"))?;
        let (q1_target, _) = ck.network(&format!("{prefix}.q1_target"))?;
        let (q2_target, _) = ck.network(&format!("{prefix}.q2_target"))?;
        let state = ck.scalars(&format!("{prefix}.state"))?;
        if state.len() != 2 || actor.head() != &Head::Gaussian {
            return Err(Error::Format(format!("{prefix} is not a SAC agent")));
        }
        let act_dim = actor.output_dim() / 2;
        let obs_dim = actor.input_dim();
        check_dim("critic input", obs_dim + act_dim, q1.input_dim())?;
        let log_temp = if cfg.init_temperature == 0.0 && !cfg.learn_temperature {
            f64::NEG_INFINITY
        } else {
            state[0]
        };
        Ok(Self {
            actor_opt: actor_opt.unwrap_or_else(|| Adam::new(actor.num_params(), cfg.lr)),
            q1_opt: q1_opt.unwrap_or_else(|| Adam::new(q1.num_params(), cfg.lr)),
            q2_opt: q2_opt.unwrap_or_else(|| Adam::new(q2.num_params(), cfg.lr)),
            temp_opt: Adam::new(1, cfg.lr),
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            log_temp,
            obs_dim,
            act_dim,
            updates: state[1] as u64,
            cfg,
        })
    }
}

fn temp_term(temp: f64, log_prob: f64) -> f64 {
    if temp > 0.0 {
        temp * log_prob
    } else {
        0.0
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// `y = r + gamma * (1 - terminal) * v`.
pub fn sac_targets(rewards: &[f64], terminals: &[f64], next_values: &[f64], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(terminals)
        .zip(next_values)
        .map(|((r, t), v)| r + gamma * (1.0 - t) * v)
        .collect()
}
