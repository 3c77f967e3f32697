use rand::SeedableRng;

use skillchain::baselines::{evaluate_flat, flat_episode, task_observation, train_flat, train_gcbc, FlatConfig, FlatPolicy, GcbcConfig};
use skillchain::envcore::{GoalEnv, SimRng};
use skillchain::rl::SacConfig;
use skillchain::tasks::{collect_task_demonstrations, make_planar_transfer, PlanarConfig};

#[test]
fn behaviour_cloning_fits_a_handful_of_demonstrations() {
    let mut env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(2);
    let demos = collect_task_demonstrations(&mut env, 3, &mut rng).unwrap();
    let cfg = GcbcConfig {
        batch_size: 64,
        epochs: 2_000,
        relabel_prob: 0.0,
        ..GcbcConfig::default()
    };
    let (policy, losses) = train_gcbc(&env, &demos, &cfg, &mut rng).unwrap();
    assert_eq!(losses.len(), 2_000);
    assert!(losses[1_999] < 0.1 * losses[0], "{} -> {}", losses[0], losses[1_999]);
    let FlatPolicy::Cloned(net) = &policy else {
        panic!("behaviour cloning returns a cloned network");
    };
    let mut err: f64 = 0.0;
    let mut n = 0;
    for d in &demos {
        for (s, a) in d.states.iter().zip(&d.actions) {
            let out = net.forward(&task_observation(&env, s, &d.subgoal), 1).unwrap();
            err += out.iter().zip(a).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64;
            n += 1;
        }
    }
    assert!(err / n as f64 <= 0.05, "mean action error {}", err / n as f64);
}

#[test]
fn whole_task_demonstrations_are_required() {
    let env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(0);
    let mut penv = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let sub = skillchain::tasks::collect_demonstrations(&mut penv, 1, 2, &mut rng).unwrap();
    assert!(train_gcbc(&env, &sub, &GcbcConfig::default(), &mut rng).is_err());
    assert!(train_gcbc(&env, &[], &GcbcConfig::default(), &mut rng).is_err());
}

#[test]
fn flat_episodes_report_consistent_progress() {
    let mut env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(4);
    let demos = collect_task_demonstrations(&mut env, 5, &mut rng).unwrap();
    let cfg = FlatConfig {
        sac: SacConfig {
            hidden: 32,
            layers: 2,
            batch_size: 32,
            ..SacConfig::default()
        },
        env_steps: 500,
        ..FlatConfig::default()
    };
    let (policy, curve) = train_flat(&mut env, &demos, &cfg, 250, 2, &mut rng).unwrap();
    assert_eq!(curve.len(), 2);
    let k = env.spec().num_subtasks();
    for _ in 0..10 {
        let (success, done, steps) = flat_episode(&policy, &mut env, true, &mut rng).unwrap();
        assert!(done <= k);
        assert!(steps >= 1);
        if success {
            assert_eq!(done, k);
        }
    }
    let eval = evaluate_flat(&policy, &mut env, 10, &mut rng).unwrap();
    assert_eq!(eval.episodes.len(), 10);
    assert!(eval.subtask_completion <= k as f64);
}
