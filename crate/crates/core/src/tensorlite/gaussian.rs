//! Tanh-squashed diagonal Gaussian used by every stochastic actor.
//!
//! All functions work on a single row (one sample); callers loop over the
//! batch. The squashed action lives in `[-1, 1]^d`; [`scale_to_box`] maps it
//! to a task range and [`box_log_det`] gives the matching density correction.

use rand::Rng;
use rand_distr::StandardNormal;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

/// Actions are clipped to `[-SQUASH_CLIP, SQUASH_CLIP]` before `atanh`.
pub const SQUASH_CLIP: f64 = 1.0 - 1e-3;

/// A reparameterized sample and the partial derivatives the actor losses need.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    /// d action_j / d mean_j
    pub da_dmean: Vec<f64>,
    /// d action_j / d log_std_j
    pub da_dlogstd: Vec<f64>,
    /// d log_prob / d mean_j
    pub dlogp_dmean: Vec<f64>,
    /// d log_prob / d log_std_j
    pub dlogp_dlogstd: Vec<f64>,
}

/// `log(1 - tanh(u)^2)` without cancellation for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let x = -2.0 * u;
    let softplus = if x > 30.0 { x } else { x.exp().ln_1p() };
    2.0 * (std::f64::consts::LN_2 - u - softplus)
}

/// Draws `tanh(mean + std * noise)` with standard normal noise.
pub fn sample_squashed<R: Rng + ?Sized>(
    mean: &[f64],
    log_std: &[f64],
    rng: &mut R,
) -> SquashedSample {
    let noise: Vec<f64> = mean.iter().map(|_| rng.sample(StandardNormal)).collect();
    squashed_from_noise(mean, log_std, &noise)
}

/// Deterministic core of [`sample_squashed`] for a given noise vector.
pub fn squashed_from_noise(mean: &[f64], log_std: &[f64], noise: &[f64]) -> SquashedSample {
    let d = mean.len();
    let mut s = SquashedSample {
        action: Vec::with_capacity(d),
        log_prob: 0.0,
        da_dmean: Vec::with_capacity(d),
        da_dlogstd: Vec::with_capacity(d),
        dlogp_dmean: Vec::with_capacity(d),
        dlogp_dlogstd: Vec::with_capacity(d),
    };
    for j in 0..d {
        let std = log_std[j].exp();
        let eps = noise[j];
        let u = mean[j] + std * eps;
        let a = u.tanh();
        let sech2 = 1.0 - a * a;
        s.action.push(a);
        s.log_prob += -0.5 * eps * eps - log_std[j] - HALF_LOG_2PI - log_one_minus_tanh_sq(u);
        s.da_dmean.push(sech2);
        s.da_dlogstd.push(sech2 * std * eps);
        s.dlogp_dmean.push(2.0 * a);
        s.dlogp_dlogstd.push(-1.0 + 2.0 * a * std * eps);
    }
    s
}

/// Log density of a given squashed action, with gradients w.r.t. the
/// distribution parameters: `(log_prob, d/d mean, d/d log_std)`.
pub fn squashed_log_prob(
    mean: &[f64],
    log_std: &[f64],
    action: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let d = mean.len();
    let mut lp = 0.0;
    let mut dm = Vec::with_capacity(d);
    let mut ds = Vec::with_capacity(d);
    for j in 0..d {
        let a = action[j].clamp(-SQUASH_CLIP, SQUASH_CLIP);
        let u = a.atanh();
        let std = log_std[j].exp();
        let z = (u - mean[j]) / std;
        lp += -0.5 * z * z - log_std[j] - HALF_LOG_2PI - log_one_minus_tanh_sq(u);
        dm.push(z / std);
        ds.push(z * z - 1.0);
    }
    (lp, dm, ds)
}

/// Deterministic (mean) action `tanh(mean)`.
pub fn squashed_mean(mean: &[f64]) -> Vec<f64> {
    mean.iter().map(|m| m.tanh()).collect()
}

/// Maps `[-1, 1]` onto `[lo, hi]` per dimension.
pub fn scale_to_box(unit: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    unit.iter()
        .zip(lo.iter().zip(hi))
        .map(|(u, (l, h))| l + 0.5 * (u + 1.0) * (h - l))
        .collect()
}

/// Inverse of [`scale_to_box`].
pub fn box_to_unit(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| 2.0 * (v - l) / (h - l) - 1.0)
        .collect()
}

/// Log-density correction for scaling `[-1, 1]` to `[lo, hi]`; add it to a
/// unit-range log-probability.
pub fn box_log_det(lo: &[f64], hi: &[f64]) -> f64 {
    -lo.iter()
        .zip(hi)
        .map(|(l, h)| (0.5 * (h - l)).ln())
        .sum::<f64>()
}
