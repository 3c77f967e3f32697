use rand::SeedableRng;

use skillchain::chaining::{chain_rollout_from, ChainAgent, ChainConfig};
use skillchain::envcore::{ChainEnv, SimRng};
use skillchain::harness::{
    bucket_report, calibration_samples, read_metrics, run_experiment, EvalMetrics, ExperimentConfig, StageStatus,
};
use skillchain::tasks::{make_chain_world, ChainWorldConfig};

fn tent(x: f64) -> f64 {
    (1.0 - 2.0 * (x - 0.7f64).abs()).clamp(0.0, 1.0)
}

#[test]
fn perfect_handoffs_score_full_success_and_completion() {
    let mut env = make_chain_world(&ChainWorldConfig::peaked(2)).unwrap();
    let mut rng = SimRng::seed_from_u64(0);
    let agent = ChainAgent::uniform(&env, &ChainConfig::default(), &mut rng).unwrap();
    let episodes: Vec<_> = (0..200)
        .map(|_| {
            let first = env.reset_chain(&mut rng);
            let ep = chain_rollout_from(&agent, &mut env, first, true, Some(agent.to_unit(1, &[0.7])), &mut rng).unwrap();
            (ep.final_reward == 1.0, ep.completed_subtasks(), ep.steps)
        })
        .collect();
    let m = EvalMetrics::from_episodes(episodes.clone());
    assert_eq!(m.success_rate, 1.0);
    assert_eq!(m.subtask_completion, 2.0);
    assert_eq!(m.rollout_length, 2.0);

    // recomputing from the stored episodes reproduces every summary
    let wins = m.episodes.iter().filter(|e| e.0).count() as f64;
    assert_eq!(wins / m.episodes.len() as f64, m.success_rate);
    assert_eq!(m.episodes, episodes);
}

#[test]
fn exact_values_are_calibrated_under_uniform_subgoals() {
    let mut env = make_chain_world(&ChainWorldConfig::default()).unwrap();
    let mut rng = SimRng::seed_from_u64(3);
    let agent = ChainAgent::uniform(&env, &ChainConfig::default(), &mut rng).unwrap();
    // value before the second subtask: p_2(x) times the mean of p_3 over uniform subgoals
    let c = 0.46;
    let samples = calibration_samples(&agent, &mut env, 1200, 1.0, |s, _| Ok(c * tent(s[0])), &mut rng).unwrap();
    let report = bucket_report(&samples, 3, 400).unwrap();
    assert!(report.passes(0.2), "{report:?}");
    for b in &report.buckets {
        assert!((b.mean_value - b.success_rate).abs() <= 0.1, "{b:?}");
    }

    let flat = calibration_samples(&agent, &mut env, 300, 1.0, |_, _| Ok(0.5), &mut rng).unwrap();
    let report = bucket_report(&flat, 3, 100).unwrap();
    assert!(report.degenerate);
    assert!(!report.passes(0.0));
}

#[test]
fn unknown_methods_and_keys_are_rejected() {
    assert!(ExperimentConfig::from_toml("method = \"options\"\n").is_err());
    assert!(ExperimentConfig::from_toml("task = \"chain_world\"\nmethod = \"gcbc\"\n").is_err());
    assert!(ExperimentConfig::from_toml("[calibration]\nbuckets = 0\n").is_err());
}

fn chain_world_config(out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
task = "chain_world"
method = "viskill"
seeds = [0, 1]
out_dir = "{}"
eval_episodes = 50

[chain]
budget = 600
warmup = 64
eval_interval = 300
eval_episodes = 20

[chain.sac]
hidden = 16
layers = 2
batch_size = 32

[calibration]
per_bucket = 10
"#,
        out.display()
    ))
    .unwrap()
}

#[test]
fn reruns_write_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = chain_world_config(dir.path());
    let first = run_experiment(&cfg).unwrap();
    assert!(!first.failed());
    let bytes = std::fs::read(cfg.metrics_path().unwrap()).unwrap();
    let second = run_experiment(&cfg).unwrap();
    assert_eq!(std::fs::read(cfg.metrics_path().unwrap()).unwrap(), bytes);
    assert_eq!(first.evaluations, second.evaluations);

    let rows = read_metrics(cfg.metrics_path().unwrap()).unwrap();
    for seed in [0, 1] {
        let evals: Vec<_> = rows.iter().filter(|r| r.seed == seed && r.stage == "eval").collect();
        assert_eq!(evals.len(), 1);
        let (_, m) = first.evaluations.iter().find(|(s, _)| *s == seed).unwrap();
        assert_eq!(evals[0].success_rate, Some(m.success_rate));
        assert!(rows.iter().any(|r| r.seed == seed && r.stage == "chain"));
    }
}

#[test]
fn a_failed_gate_is_recorded_and_earlier_outputs_kept() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
method = "viskill"
seeds = [0]
out_dir = "{}"

[demos]
per_subtask = 5

[skills]
max_env_steps = 100
eval_interval = 100
eval_episodes = 2
gate_episodes = 5
gate_threshold = 0.99

[skills.sac]
hidden = 16
layers = 2
batch_size = 16
"#,
        dir.path().display()
    ))
    .unwrap();
    let manifest = run_experiment(&cfg).unwrap();
    assert!(manifest.failed());
    let stages: Vec<_> = manifest.stages.iter().map(|s| (s.stage.as_str(), s.status)).collect();
    assert_eq!(stages, [("collect-demos", StageStatus::Ok), ("train-skills", StageStatus::Failed)]);
    assert!(manifest.stages[1].error.is_some());
    assert!(manifest.evaluations.is_empty());
    assert!(cfg.artifact(0, "demos1.bin").unwrap().exists());
    assert!(cfg.manifest_path().unwrap().exists());
    assert!(!cfg.artifact(0, "policy.ck").unwrap().exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}
