//! Value rules of the chaining ablations.

use rand::SeedableRng;

use super::Discriminator;
use crate::chaining::{estimate_value, ChainAgent};
use crate::envcore::SimRng;
use crate::error::{Error, Result};

fn check_index(ds: &[Discriminator], i: usize) -> Result<()> {
    if i == 0 || i > ds.len() {
        return Err(Error::SubtaskOutOfRange {
            index: i,
            count: ds.len(),
        });
    }
    Ok(())
}

/// Feasibility of the next subtask only: `D_i(features)`, where `features`
/// describe the terminal state of subtask `i`.
pub fn value_dm(discriminators: &[Discriminator], features: &[f64], i: usize) -> Result<f64> {
    check_index(discriminators, i)?;
    discriminators[i - 1].score(features)
}

/// Feasibility of every later subtask along a rollout: the product of
/// `D_j(terminal_j)` for `j >= i`, where `terminals[j - i]` holds the
/// boundary features after subtask `j`. Missing terminals (the rollout
/// failed first) count as 0.
pub fn value_ldm(discriminators: &[Discriminator], terminals: &[Vec<f64>], i: usize) -> Result<f64> {
    check_index(discriminators, i)?;
    let mut v = 1.0;
    for j in i..=discriminators.len() {
        match terminals.get(j - i) {
            Some(f) => v *= discriminators[j - 1].score(f)?,
            None => return Ok(0.0),
        }
    }
    Ok(v)
}

/// Value reported by a critic trained on subtask-success targets.
pub fn value_sr(agent: &ChainAgent, state: &[f64], i: usize, goal: &[f64], n_samples: usize, seed: u64) -> Result<f64> {
    let mut rng = SimRng::seed_from_u64(seed);
    estimate_value(agent, state, i, goal, n_samples, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::DiscriminatorConfig;

    fn confident(sign: f64, rng: &mut SimRng) -> Discriminator {
        let mut d = Discriminator::new(1, &DiscriminatorConfig::default(), rng).unwrap();
        let pos = vec![vec![sign]; 4];
        let neg = vec![vec![-sign]; 4];
        d.fit(&pos, &neg, 300, 8, rng).unwrap();
        d
    }

    #[test]
    fn long_value_is_a_product_bounded_by_each_factor() {
        let mut rng = SimRng::seed_from_u64(0);
        let ds = vec![confident(1.0, &mut rng), confident(1.0, &mut rng)];
        let both = value_ldm(&ds, &[vec![1.0], vec![1.0]], 1).unwrap();
        assert!(both > 0.95);
        let f1 = value_dm(&ds, &[1.0], 1).unwrap();
        let f2 = value_dm(&ds, &[0.3], 2).unwrap();
        let mixed = value_ldm(&ds, &[vec![1.0], vec![0.3]], 1).unwrap();
        assert!((mixed - f1 * f2).abs() < 1e-12);
        assert!(mixed <= f1.min(f2));
        assert!(value_ldm(&ds, &[vec![-1.0], vec![1.0]], 1).unwrap() < 0.05);
        assert_eq!(value_ldm(&ds, &[vec![1.0]], 1).unwrap(), 0.0);
        assert!(value_dm(&ds, &[1.0], 3).is_err());
    }
}
