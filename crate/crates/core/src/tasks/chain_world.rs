//! Analytic chain world: each boundary state is a scalar `x` in `[0, 1]`.
//!
//! Subtask `i` started at `x` with subgoal `g` succeeds with probability
//! `p_i(x) * q_i(g)` provided `|g - x| <= reach_i`, and then leaves the
//! system at `x' = g`. The last subtask ignores its subgoal and succeeds with
//! probability `p_K(x)`; the task reward is 1 iff it does. Everything is
//! known in closed form, so exact chaining values follow from a grid DP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envcore::{BoxSpace, ChainEnv, SimRng, SubtaskOutcome};
use crate::error::{Error, Result};

/// A map `[0, 1] -> [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessMap {
    Constant {
        value: f64,
    },
    /// `clamp(1 - slope * |x - center|, 0, 1)`
    Tent {
        center: f64,
        slope: f64,
    },
    /// 1 on `[lo, hi]`, 0 elsewhere.
    Step {
        lo: f64,
        hi: f64,
    },
    /// `base + (1 - base) * max(0, 1 - slope * |x - center|)` on `[lo, hi]`, 0 elsewhere.
    RaisedTent {
        base: f64,
        center: f64,
        slope: f64,
        lo: f64,
        hi: f64,
    },
    /// `clamp(intercept + slope * x, 0, 1)`
    Linear {
        intercept: f64,
        slope: f64,
    },
}

impl SuccessMap {
    pub fn eval(&self, x: f64) -> f64 {
        let v = match *self {
            SuccessMap::Constant { value } => value,
            SuccessMap::Tent { center, slope } => 1.0 - slope * (x - center).abs(),
            SuccessMap::Step { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            SuccessMap::RaisedTent {
                base,
                center,
                slope,
                lo,
                hi,
            } => {
                if x >= lo && x <= hi {
                    base + (1.0 - base) * (1.0 - slope * (x - center).abs()).max(0.0)
                } else {
                    0.0
                }
            }
            SuccessMap::Linear { intercept, slope } => intercept + slope * x,
        };
        v.clamp(0.0, 1.0)
    }

    /// Smallest interval of `[0, 1]` containing every point with positive value,
    /// resolved on a fine grid.
    pub fn support(&self) -> Option<(f64, f64)> {
        const N: usize = 100_000;
        let mut lo = None;
        let mut hi = None;
        for k in 0..=N {
            let x = k as f64 / N as f64;
            if self.eval(x) > 0.0 {
                lo.get_or_insert(x);
                hi = Some(x);
            }
        }
        Some((lo?, hi?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainWorldConfig {
    /// Start-state success maps `p_1..p_K`.
    pub start: Vec<SuccessMap>,
    /// Subgoal success maps `q_1..q_K` (the last one is unused).
    pub subgoal: Vec<SuccessMap>,
    /// Largest subgoal jump per subtask; `None` is unlimited.
    pub reach: Vec<Option<f64>>,
}

impl Default for ChainWorldConfig {
    /// Three subtasks with a peaked preference for boundary states near 0.7.
    fn default() -> Self {
        Self::peaked(3)
    }
}

impl ChainWorldConfig {
    /// `k` subtasks, `p_1 = 1`, `p_i(x) = clamp(1 - 2|x - 0.7|, 0, 1)` after.
    pub fn peaked(k: usize) -> Self {
        let tent = SuccessMap::Tent {
            center: 0.7,
            slope: 2.0,
        };
        let mut start = vec![SuccessMap::Constant { value: 1.0 }];
        start.extend(std::iter::repeat_n(tent, k.saturating_sub(1)));
        Self {
            start,
            subgoal: vec![SuccessMap::Constant { value: 1.0 }; k],
            reach: vec![None; k],
        }
    }

    /// A three-subtask world where greedy subgoals are globally bad: the first
    /// subtask prefers low subgoals, the second can only move a short distance
    /// and prefers high ones, and the last succeeds most often near 0.8.
    pub fn conflict() -> Self {
        Self {
            start: vec![
                SuccessMap::Constant { value: 1.0 },
                SuccessMap::Step { lo: 0.3, hi: 1.0 },
                SuccessMap::RaisedTent {
                    base: 0.45,
                    center: 0.8,
                    slope: 5.0,
                    lo: 0.7,
                    hi: 1.0,
                },
            ],
            subgoal: vec![
                SuccessMap::Linear {
                    intercept: 1.0,
                    slope: -0.6,
                },
                SuccessMap::Linear {
                    intercept: 0.2,
                    slope: 0.8,
                },
                SuccessMap::Constant { value: 1.0 },
            ],
            reach: vec![None, Some(0.25), None],
        }
    }

    pub fn num_subtasks(&self) -> usize {
        self.start.len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let k = self.start.len();
        if k < 2 {
            return Err(Error::InvalidConfig(format!(
                "chain world needs K >= 2, got {k}"
            )));
        }
        if self.subgoal.len() != k || self.reach.len() != k {
            return Err(Error::InvalidConfig(
                "chain world maps must have one entry per subtask".into(),
            ));
        }
        if self.reach.iter().flatten().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidConfig("reach must be positive".into()));
        }
        for (i, p) in self.start.iter().enumerate().skip(1) {
            if p.support().is_none() {
                return Err(Error::InvalidConfig(format!(
                    "subtask {} can never succeed",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// The chain world environment.
#[derive(Debug, Clone)]
pub struct ChainWorld {
    cfg: ChainWorldConfig,
    space: BoxSpace,
    x: f64,
    next: usize,
    solved: bool,
}

pub fn make_chain_world(cfg: &ChainWorldConfig) -> Result<ChainWorld> {
    ChainWorld::new(cfg.clone())
}

/// Uniform grid on `[0, 1]` with `n >= 2` points.
pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// Linear interpolation of a table defined on [`grid`].
pub fn interpolate(table: &[f64], x: f64) -> f64 {
    let n = table.len();
    let t = x.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (t.floor() as usize).min(n - 2);
    let w = t - k as f64;
    table[k] * (1.0 - w) + table[k + 1] * w
}

impl ChainWorld {
    pub fn new(cfg: ChainWorldConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            space: BoxSpace::new(vec![0.0], vec![1.0])?,
            x: 0.0,
            next: 1,
            solved: false,
        })
    }

    pub fn config(&self) -> &ChainWorldConfig {
        &self.cfg
    }

    /// `p_i(x)`, 1-based.
    pub fn start_success(&self, i: usize, x: f64) -> f64 {
        self.cfg.start[i - 1].eval(x)
    }

    /// Probability that subtask `i < K` started at `x` reaches `g`.
    pub fn transfer_success(&self, i: usize, x: f64, g: f64) -> f64 {
        if let Some(r) = self.cfg.reach[i - 1] {
            if (g - x).abs() > r + 1e-12 {
                return 0.0;
            }
        }
        self.start_success(i, x) * self.cfg.subgoal[i - 1].eval(g)
    }

    /// Exact values on an `n`-point grid. `values[i - 1][j]` is the value of
    /// boundary state `j / (n - 1)` before subtask `i`. With `optimal` the
    /// chaining policy maximizes over grid subgoals; otherwise subgoals are
    /// uniform on `[0, 1]`.
    pub fn dp_values(&self, n: usize, optimal: bool) -> Vec<Vec<f64>> {
        let k = self.cfg.num_subtasks();
        let xs = grid(n);
        let mut values = vec![vec![0.0; n]; k];
        values[k - 1] = xs.iter().map(|&x| self.start_success(k, x)).collect();
        for i in (1..k).rev() {
            let next = values[i].clone();
            values[i - 1] = xs
                .iter()
                .map(|&x| {
                    let cont = xs
                        .iter()
                        .zip(&next)
                        .map(|(&g, &v)| self.transfer_success(i, x, g) * v);
                    if optimal {
                        cont.fold(0.0, f64::max)
                    } else {
                        // trapezoid rule over g in [0, 1]
                        let vals: Vec<f64> = cont.collect();
                        let inner: f64 = vals[1..n - 1].iter().sum();
                        (inner + 0.5 * (vals[0] + vals[n - 1])) / (n - 1) as f64
                    }
                })
                .collect();
        }
        values
    }

    /// Expected whole-task success over uniform initial states.
    pub fn expected_success(&self, n: usize, optimal: bool) -> f64 {
        let v = &self.dp_values(n, optimal)[0];
        let inner: f64 = v[1..n - 1].iter().sum();
        (inner + 0.5 * (v[0] + v[n - 1])) / (n - 1) as f64
    }

    /// Greedy subgoal maximizing the continuation value before subtask `i < K`.
    pub fn optimal_subgoal(&self, values: &[Vec<f64>], i: usize, x: f64) -> f64 {
        let next = &values[i];
        let xs = grid(next.len());
        let mut best = (f64::MIN, 0.0);
        for (&g, &v) in xs.iter().zip(next) {
            let c = self.transfer_success(i, x, g) * v;
            if c > best.0 {
                best = (c, g);
            }
        }
        best.1
    }

    pub fn position(&self) -> f64 {
        self.x
    }
}

impl ChainEnv for ChainWorld {
    fn num_subtasks(&self) -> usize {
        self.cfg.num_subtasks()
    }

    fn boundary_dim(&self) -> usize {
        1
    }

    fn subgoal_space(&self, _i: usize) -> &BoxSpace {
        &self.space
    }

    fn reset_chain(&mut self, rng: &mut SimRng) -> Vec<f64> {
        self.x = rng.random_range(0.0..1.0);
        self.next = 1;
        self.solved = false;
        vec![self.x]
    }

    fn goal_features(&self) -> Vec<f64> {
        Vec::new()
    }

    fn final_subgoal(&self) -> Vec<f64> {
        vec![0.5]
    }

    fn execute(&mut self, i: usize, subgoal: &[f64], rng: &mut SimRng) -> Result<SubtaskOutcome> {
        let k = self.num_subtasks();
        if i == 0 || i > k {
            return Err(Error::SubtaskOutOfRange { index: i, count: k });
        }
        if i != self.next {
            return Err(Error::InvalidConfig(format!(
                "subtask {i} executed out of order (expected {})",
                self.next
            )));
        }
        if subgoal.len() != 1 || !self.space.contains(subgoal) {
            return Err(Error::InvalidSubgoal(i));
        }
        let g = subgoal[0];
        let p = if i == k {
            self.start_success(k, self.x)
        } else {
            self.transfer_success(i, self.x, g)
        };
        let success = rng.random::<f64>() < p;
        if success {
            if i < k {
                self.x = g;
            } else {
                self.solved = true;
            }
            self.next = i + 1;
        } else {
            self.next = k + 1;
        }
        Ok(SubtaskOutcome {
            success,
            terminal: vec![self.x],
            steps: 1,
        })
    }

    fn task_reward(&self) -> f64 {
        if self.solved {
            1.0
        } else {
            0.0
        }
    }

    fn sample_initiation(&mut self, i: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let k = self.num_subtasks();
        if i == 0 || i > k {
            return Err(Error::SubtaskOutOfRange { index: i, count: k });
        }
        let (lo, hi) = if i == 1 {
            (0.0, 1.0)
        } else {
            self.cfg.start[i - 1].support().expect("validated support")
        };
        Ok(vec![if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }])
    }

    fn begin_at(&mut self, i: usize, state: &[f64]) -> Result<()> {
        let k = self.num_subtasks();
        if i == 0 || i > k {
            return Err(Error::SubtaskOutOfRange { index: i, count: k });
        }
        if state.len() != 1 || !state[0].is_finite() {
            return Err(Error::DimensionMismatch {
                context: "chain world state",
                expected: 1,
                got: state.len(),
            });
        }
        self.x = state[0].clamp(0.0, 1.0);
        self.next = i;
        self.solved = false;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn k_below_two_is_rejected() {
        let mut cfg = ChainWorldConfig::peaked(2);
        cfg.start.pop();
        assert!(make_chain_world(&cfg).is_err());
    }

    #[test]
    fn step_map_gives_indicator_values() {
        let cfg = ChainWorldConfig {
            start: vec![
                SuccessMap::Constant { value: 1.0 },
                SuccessMap::Step { lo: 0.4, hi: 0.6 },
            ],
            subgoal: vec![SuccessMap::Constant { value: 1.0 }; 2],
            reach: vec![None; 2],
        };
        let w = make_chain_world(&cfg).unwrap();
        let v = w.dp_values(101, true);
        for (j, x) in grid(101).iter().enumerate() {
            let inside = (0.4..=0.6).contains(x);
            assert_eq!(v[1][j], if inside { 1.0 } else { 0.0 });
            assert_eq!(v[0][j], 1.0);
        }
    }

    #[test]
    fn default_world_values() {
        let w = make_chain_world(&ChainWorldConfig::default()).unwrap();
        let opt = w.dp_values(1001, true);
        assert!((w.expected_success(1001, true) - 1.0).abs() < 1e-12);
        let j = 700;
        assert!((opt[1][j] - 1.0).abs() < 1e-12);
        // uniform subgoals: the tent over [0.2, 1] has mean 0.46
        let uni = w.dp_values(1001, false);
        assert!((uni[1][j] - 0.46).abs() < 1e-4);
        assert!((uni[0][0] - 0.46 * 0.46).abs() < 1e-4);
    }

    #[test]
    fn conflict_world_optimum() {
        let w = make_chain_world(&ChainWorldConfig::conflict()).unwrap();
        let v = w.dp_values(1001, true);
        // best first subgoal 0.55 then 0.8: (1 - 0.33) * (0.2 + 0.64) * 1
        assert!((v[0][0] - 0.5628).abs() < 1e-9);
        assert!((w.optimal_subgoal(&v, 1, 0.1) - 0.55).abs() < 1e-9);
    }

    #[test]
    fn execute_follows_protocol() {
        let mut w = make_chain_world(&ChainWorldConfig::default()).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        w.reset_chain(&mut rng);
        assert!(matches!(
            w.execute(2, &[0.7], &mut rng),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            w.execute(1, &[1.5], &mut rng),
            Err(Error::InvalidSubgoal(1))
        ));
        let o = w.execute(1, &[0.7], &mut rng).unwrap();
        assert!(o.success);
        assert_eq!(o.terminal, vec![0.7]);
    }

    #[test]
    fn initiation_samples_stay_in_support() {
        let mut w = make_chain_world(&ChainWorldConfig::conflict()).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = w.sample_initiation(3, &mut rng).unwrap()[0];
            assert!((0.7..=1.0).contains(&x));
            assert!(w.start_success(3, x) > 0.0);
        }
    }

    #[test]
    fn interpolation_is_exact_on_linear_tables() {
        let t: Vec<f64> = grid(11).iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((interpolate(&t, 0.33) - 1.66).abs() < 1e-12);
        assert_eq!(interpolate(&t, 1.0), 3.0);
    }
}
