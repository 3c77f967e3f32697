mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillchain::tensorlite::{sample_squashed, squashed_log_prob, Head, Mlp};

use common::{all_heads, grad_check};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backprop_matches_finite_differences(
        seed in any::<u64>(),
        hidden in prop::collection::vec(3usize..12, 1..4),
        out in 1usize..4,
        batch in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for head in all_heads(out) {
            let mut net = Mlp::new(8, &hidden, out, head, &mut rng).unwrap();
            // larger final layer so the heads are exercised away from zero
            for p in net.params_mut() {
                *p *= 2.0;
            }
            let width = net.output_dim();
            let input: Vec<f64> = (0..batch * 8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let upstream: Vec<f64> = (0..batch * width).map(|_| rng.random_range(-1.0..1.0)).collect();
            let report = grad_check(&net, &input, batch, &upstream, 1e-4);
            prop_assert!(report.max_rel_err < 1e-4, "rel err {}", report.max_rel_err);
            // one unit near its kink invalidates every coordinate upstream of it,
            // so small nets can lose a sizeable share; most must still be checked
            prop_assert!(report.skipped * 4 <= report.checked + report.skipped, "skipped {} of {}", report.skipped, report.checked + report.skipped);
        }
    }

    #[test]
    fn wide_inputs_stay_finite(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for head in all_heads(3) {
            let net = Mlp::new(6, &[32, 32, 32], 3, head, &mut rng).unwrap();
            let input: Vec<f64> = (0..6 * 16).map(|_| rng.random_range(-10.0..=10.0)).collect();
            let tape = net.forward_cached(&input, 16).unwrap();
            prop_assert!(tape.output().iter().all(|v| v.is_finite()));
            let g = net.backward(&tape, &vec![1.0; 16 * net.output_dim()]).unwrap();
            prop_assert!(g.params.iter().chain(&g.input).all(|v| v.is_finite()));
        }
    }
}

#[test]
fn same_seed_same_network_and_samples() {
    let build = || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(4, &[16, 16], 2, Head::Gaussian, &mut rng).unwrap();
        let s = sample_squashed(&[0.1, -0.4], &[-1.0, 0.3], &mut rng);
        (net, s.action)
    };
    let (a, sa) = build();
    let (b, sb) = build();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}

#[test]
fn squashed_density_matches_histogram() {
    let mean = [0.3];
    let log_std = [-0.5];
    let n = 1_000_000;
    let (lo, hi, bins) = (-1.0, 1.0, 40);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..n {
        let a = sample_squashed(&mean, &log_std, &mut rng).action[0];
        let b = (((a - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    // bin-averaged analytic density by the midpoint rule on 50 sub-points
    let density: Vec<f64> = (0..bins)
        .map(|b| {
            (0..50)
                .map(|k| {
                    let a = lo + width * (b as f64 + (k as f64 + 0.5) / 50.0);
                    squashed_log_prob(&mean, &log_std, &[a]).0.exp()
                })
                .sum::<f64>()
                / 50.0
        })
        .collect();
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let mut compared = 0;
    for b in 0..bins {
        if density[b] < 0.5 * peak {
            continue;
        }
        let empirical = counts[b] as f64 / (n as f64 * width);
        let rel = (empirical - density[b]).abs() / density[b];
        assert!(
            rel < 0.02,
            "bin {b}: empirical {empirical}, analytic {}",
            density[b]
        );
        compared += 1;
    }
    assert!(compared >= 5);
}
