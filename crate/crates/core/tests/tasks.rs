use rand::SeedableRng;
use skillchain::envcore::{ChainEnv, GoalEnv, SimRng};
use skillchain::tasks::demos::{read_demos, scripted_episode, write_demos};
use skillchain::tasks::planar::{BX, BY};
use skillchain::tasks::{
    collect_demonstrations, make_chain_world, make_planar_transfer, ChainWorldConfig, PlanarConfig,
};

#[test]
fn scripted_controller_solves_each_subtask() {
    let mut env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(10);
    for i in 1..=3 {
        let space = env.spec().subtask(i).unwrap().subgoal_space.clone();
        let mut wins = 0;
        for _ in 0..1000 {
            env.reset(&mut rng);
            env.subtask_reset(i, &mut rng).unwrap();
            let g = space.sample(&mut rng);
            if scripted_episode(&mut env, i, &g).unwrap().success {
                wins += 1;
            }
        }
        assert!(wins >= 990, "subtask {i}: {wins}/1000");
    }
}

#[test]
fn scripted_controller_solves_the_whole_task() {
    let mut env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(11);
    let mut wins = 0;
    for _ in 0..100 {
        let (s0, goal) = env.reset(&mut rng);
        // keep arm 1 level while carrying so the block stays upright
        let g1 = [0.5, s0[BY]];
        let first = scripted_episode(&mut env, 1, &g1).unwrap();
        let s1 = first.states.last().unwrap().clone();
        let g2 = [0.7, s1[BY]];
        env.set_state(&s1).unwrap();
        let second = scripted_episode(&mut env, 2, &g2).unwrap();
        env.set_state(second.states.last().unwrap()).unwrap();
        let g3 = env.goal_subgoal(&goal);
        let third = scripted_episode(&mut env, 3, &g3).unwrap();
        let end = third.states.last().unwrap();
        if first.success && second.success && env.task_reward(end, &goal) == 1.0 {
            wins += 1;
        }
    }
    assert!(wins >= 99, "{wins}/100");
}

#[test]
fn demos_replay_open_loop_from_file() {
    let mut env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(12);
    for i in 1..=3 {
        let demos = collect_demonstrations(&mut env, i, 20, &mut rng).unwrap();
        let mut bytes = Vec::new();
        write_demos(&mut bytes, &demos).unwrap();
        for (orig, loaded) in demos.iter().zip(read_demos(&mut bytes.as_slice()).unwrap()) {
            for d in [orig, &loaded] {
                env.set_state(&d.states[0]).unwrap();
                let mut s = d.states[0].clone();
                for a in &d.actions {
                    s = env.step(a).unwrap().state;
                }
                assert_eq!(env.subtask_reward(i, &s, &d.subgoal), 1.0);
            }
            // in-memory replay is bit-exact
            env.set_state(&orig.states[0]).unwrap();
            for (k, a) in orig.actions.iter().enumerate() {
                assert_eq!(env.step(a).unwrap().state, orig.states[k + 1]);
            }
        }
    }
}

#[test]
fn task_success_implies_last_subtask_success() {
    let mut env = make_planar_transfer(&PlanarConfig::default(), 0).unwrap();
    let mut rng = SimRng::seed_from_u64(13);
    let mut checked = 0;
    for _ in 0..300 {
        let (_, goal) = env.reset(&mut rng);
        let mut s = env.subtask_reset(3, &mut rng).unwrap();
        let g3 = env.goal_subgoal(&goal);
        let ep = scripted_episode(&mut env, 3, &g3).unwrap();
        s = ep.states.last().cloned().unwrap_or(s);
        if env.task_reward(&s, &goal) == 1.0 {
            assert_eq!(env.subtask_reward(3, &s, &g3), 1.0);
            assert!((s[BX] - g3[0]).abs() <= 0.02 && (s[BY] - g3[1]).abs() <= 0.02);
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn last_subtask_value_matches_monte_carlo() {
    let mut w = make_chain_world(&ChainWorldConfig::default()).unwrap();
    let v = w.dp_values(1001, true);
    let mut rng = SimRng::seed_from_u64(14);
    for &x in &[0.3, 0.55, 0.7, 0.9] {
        let mut wins = 0;
        for _ in 0..10_000 {
            w.begin_at(3, &[x]).unwrap();
            w.execute(3, &w.final_subgoal(), &mut rng).unwrap();
            wins += w.task_reward() as usize;
        }
        let exact = v[2][(x * 1000.0).round() as usize];
        assert!((wins as f64 / 1e4 - exact).abs() < 0.02, "x={x}");
    }
}
