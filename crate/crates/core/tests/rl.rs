use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use skillchain::envcore::{EpisodeTrajectory, SimRng, Transition};
use skillchain::rl::{her_relabel, sac_targets, DemoTerm, ReplayBuffer, SacAgent, SacConfig};

fn small_sac() -> SacConfig {
    SacConfig {
        hidden: 32,
        layers: 2,
        lr: 3e-3,
        batch_size: 64,
        ..SacConfig::default()
    }
}

#[test]
fn demonstration_term_clones_a_smooth_expert() {
    let mut rng = SimRng::seed_from_u64(0);
    let mut agent = SacAgent::new(2, 1, small_sac(), &mut rng).unwrap();
    let expert = |x: &[f64]| (0.8 * x[0] - 0.4 * x[1]).tanh() * 0.9;
    let mut obs = Vec::new();
    let mut act = Vec::new();
    for _ in 0..512 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        obs.extend(x);
        act.push(expert(&x));
    }
    for _ in 0..1500 {
        let idx: Vec<usize> = (0..64).map(|_| rng.random_range(0..512)).collect();
        let o: Vec<f64> = idx.iter().flat_map(|&i| obs[2 * i..2 * i + 2].to_vec()).collect();
        let a: Vec<f64> = idx.iter().map(|&i| act[i]).collect();
        let demo = DemoTerm {
            obs: &o,
            actions: &a,
            n: 64,
            coef: 10.0,
        };
        agent.actor_update(&o, 64, Some(demo), None, &mut rng).unwrap();
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
        let a = agent.act(&x, true, &mut rng).unwrap()[0];
        worst = worst.max((a - expert(&x)).abs());
    }
    assert!(worst < 0.1, "largest deviation from the expert {worst}");
}

#[test]
fn replay_sampling_is_reproducible() {
    let mut buf = ReplayBuffer::new(100, 1, 1);
    for i in 0..50 {
        buf.push(&[i as f64], &[0.0], 0.0, &[i as f64 + 1.0], false).unwrap();
    }
    let a = buf.sample(16, &mut SimRng::seed_from_u64(7));
    let b = buf.sample(16, &mut SimRng::seed_from_u64(7));
    assert_eq!(a.obs, b.obs);
}

fn reached(s: &[f64], g: &[f64]) -> f64 {
    if (s[0] - g[0]).abs() <= 0.05 {
        1.0
    } else {
        0.0
    }
}

fn walk(steps: &[f64], goal: f64) -> EpisodeTrajectory {
    let mut x = 0.0;
    let transitions = steps
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let next = x + d;
            let tr = Transition {
                state: vec![x],
                action: vec![*d],
                reward: reached(&[next], &[goal]),
                next_state: vec![next],
                done: t + 1 == steps.len(),
                goal: vec![goal],
                achieved: vec![next],
            };
            x = next;
            tr
        })
        .collect();
    EpisodeTrajectory {
        subtask: 1,
        goal: vec![goal],
        transitions,
        success: false,
    }
}

proptest! {
    #[test]
    fn relabeled_goals_and_rewards_are_consistent(
        steps in prop::collection::vec(-0.2f64..0.2, 1..30),
        goal in -1.0f64..1.0,
        k in 0usize..6,
        seed in any::<u64>(),
    ) {
        let ep = walk(&steps, goal);
        let out = her_relabel(&ep, k, &mut SimRng::seed_from_u64(seed), reached);
        prop_assert_eq!(out.len(), steps.len() * (k + 1));
        for (t, chunk) in out.chunks(k + 1).enumerate() {
            prop_assert_eq!(&chunk[0], &ep.transitions[t]);
            let future: Vec<&Vec<f64>> = ep.transitions[t..].iter().map(|x| &x.achieved).collect();
            for c in &chunk[1..] {
                prop_assert!(future.contains(&&c.goal));
                prop_assert_eq!(c.reward, reached(&c.next_state, &c.goal));
                prop_assert_eq!(&c.state, &ep.transitions[t].state);
                prop_assert_eq!(c.done, c.reward == 1.0 || t + 1 == steps.len());
            }
        }
    }

    #[test]
    fn terminal_targets_are_the_reward(
        r in prop::collection::vec(0.0f64..1.0, 1..20),
        v in prop::collection::vec(-5.0f64..5.0, 20),
        gamma in 0.0f64..1.0,
    ) {
        let n = r.len();
        let y = sac_targets(&r, &vec![1.0; n], &v[..n], gamma);
        prop_assert_eq!(y, r.clone());
        let y = sac_targets(&r, &vec![0.0; n], &v[..n], gamma);
        for i in 0..n {
            prop_assert!((y[i] - (r[i] + gamma * v[i])).abs() < 1e-12);
        }
    }
}
