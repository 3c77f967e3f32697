use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chaining::{chain_rollout_from, estimate_value, ChainAgent};
use crate::envcore::{ChainEnv, SimRng};
use crate::error::{Error, Result};

/// One bucket of calibration episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBucket {
    pub episodes: usize,
    pub mean_value: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Buckets in increasing order of estimated value.
    pub buckets: Vec<CalibrationBucket>,
    /// Success rates never decrease from one bucket to the next.
    pub monotone: bool,
    /// Top-bucket minus bottom-bucket success rate.
    pub spread: f64,
    /// All estimates were equal, so the buckets carry no information.
    pub degenerate: bool,
    /// Fewer episodes than requested were available; trailing buckets are
    /// smaller or missing.
    pub insufficient: bool,
}

impl CalibrationReport {
    /// Monotone, non-degenerate, complete and with at least `min_spread`
    /// between the extreme buckets.
    pub fn passes(&self, min_spread: f64) -> bool {
        self.monotone && !self.degenerate && !self.insufficient && self.spread >= min_spread
    }
}

/// Sorts `(value, success)` samples by value and cuts them into `n_buckets`
/// consecutive groups of `per_bucket`.
pub fn bucket_report(samples: &[(f64, bool)], n_buckets: usize, per_bucket: usize) -> Result<CalibrationReport> {
    if n_buckets == 0 || per_bucket == 0 {
        return Err(Error::InvalidConfig("calibration needs non-empty buckets".into()));
    }
    if samples.iter().any(|(v, _)| !v.is_finite()) {
        return Err(Error::NonFinite("calibration value"));
    }
    let mut sorted = samples.to_vec();
    // stable, so ties keep collection order
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted.truncate(n_buckets * per_bucket);
    let buckets: Vec<CalibrationBucket> = sorted
        .chunks(per_bucket)
        .map(|c| {
            let n = c.len() as f64;
            CalibrationBucket {
                episodes: c.len(),
                mean_value: c.iter().map(|s| s.0).sum::<f64>() / n,
                success_rate: c.iter().filter(|s| s.1).count() as f64 / n,
            }
        })
        .collect();
    let lo = sorted.first().map_or(0.0, |s| s.0);
    let hi = sorted.last().map_or(0.0, |s| s.0);
    Ok(CalibrationReport {
        monotone: buckets.windows(2).all(|w| w[1].success_rate >= w[0].success_rate),
        spread: match (buckets.first(), buckets.last()) {
            (Some(a), Some(b)) => b.success_rate - a.success_rate,
            _ => 0.0,
        },
        degenerate: hi - lo <= 1e-12,
        insufficient: samples.len() < n_buckets * per_bucket,
        buckets,
    })
}

/// Runs `n` chained episodes and pairs each with `value(state)` at the second
/// boundary (0 when the first subtask failed) and its whole-task outcome.
/// With probability `explore` the first subgoal is drawn uniformly instead
/// of from the policy, which spreads the boundary states; every other
/// decision is the policy's deterministic one.
pub fn calibration_samples<E, V>(agent: &ChainAgent, env: &mut E, n: usize, explore: f64, mut value: V, rng: &mut SimRng) -> Result<Vec<(f64, bool)>>
where
    E: ChainEnv + ?Sized,
    V: FnMut(&[f64], &mut SimRng) -> Result<f64>,
{
    let d = agent.subgoal_dim();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let first = env.reset_chain(rng);
        let forced = if rng.random::<f64>() < explore {
            Some((0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        } else {
            None
        };
        let ep = chain_rollout_from(agent, env, first, true, forced, rng)?;
        let v = match &ep.transitions[0].next_state {
            Some(s) => value(s, rng)?,
            None => 0.0,
        };
        out.push((v, ep.final_reward == 1.0));
    }
    Ok(out)
}

/// Calibration of the agent's own reported value against empirical success.
#[allow(clippy::too_many_arguments)]
pub fn value_calibration_report<E: ChainEnv + ?Sized>(
    agent: &ChainAgent,
    env: &mut E,
    n_buckets: usize,
    per_bucket: usize,
    explore: f64,
    value_samples: usize,
    rng: &mut SimRng,
) -> Result<CalibrationReport> {
    let goal = if agent.goal_conditioned() {
        env.goal_features()
    } else {
        Vec::new()
    };
    // with K = 2 the second boundary is the last one and its subgoal is fixed
    let samples = if agent.num_subtasks() > 2 {
        calibration_samples(agent, env, n_buckets * per_bucket, explore, |s, r| estimate_value(agent, s, 2, &goal, value_samples, r), rng)?
    } else {
        let g = env.final_subgoal();
        calibration_samples(agent, env, n_buckets * per_bucket, explore, |s, _| Ok(crate::chaining::clamp_report(agent.action_value(s, 2, &goal, &g)?)), rng)?
    };
    bucket_report(&samples, n_buckets, per_bucket)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_follow_value_order() {
        let samples: Vec<(f64, bool)> = (0..9).map(|i| (8.0 - i as f64, i < 3)).collect();
        let r = bucket_report(&samples, 3, 3).unwrap();
        assert_eq!(r.buckets.len(), 3);
        assert_eq!(r.buckets[0].mean_value, 1.0);
        assert_eq!(r.buckets[2].success_rate, 1.0);
        assert_eq!(r.buckets[0].success_rate, 0.0);
        assert!(r.monotone && !r.degenerate && !r.insufficient);
        assert_eq!(r.spread, 1.0);
        assert!(r.passes(0.2));
    }

    #[test]
    fn constant_values_are_flagged() {
        let samples: Vec<(f64, bool)> = (0..6).map(|i| (0.4, i % 2 == 0)).collect();
        let r = bucket_report(&samples, 3, 2).unwrap();
        assert!(r.degenerate);
        assert!(!r.passes(0.0));
    }

    #[test]
    fn short_sample_sets_are_reported() {
        let samples = vec![(0.1, false), (0.9, true), (0.5, true)];
        let r = bucket_report(&samples, 2, 2).unwrap();
        assert!(r.insufficient);
        assert_eq!(r.buckets.len(), 2);
        assert_eq!(r.buckets[1].episodes, 1);
    }
}
