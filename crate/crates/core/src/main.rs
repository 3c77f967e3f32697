use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skillchain::harness::{self, ExperimentConfig, MethodName};
use skillchain::Result;

#[derive(Parser)]
#[command(name = "skillchain", version, about = "Train and evaluate chained skills")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed to run; defaults to every seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration's.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Record scripted demonstrations.
    CollectDemos(Common),
    /// Train and freeze the subtask policies.
    TrainSkills(Common),
    /// Train the chaining policy of a chained method.
    TrainChain(Common),
    /// Train a whole-task or chained baseline.
    TrainBaseline(Common),
    /// Evaluate the stored policy.
    Eval(Common),
    /// Value-calibration report of a stored chaining policy.
    Calibrate(Common),
    /// All stages for all requested seeds, with a run manifest.
    Run(Common),
}

fn load(c: &Common) -> Result<(ExperimentConfig, Vec<u64>)> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    let seeds = match c.seed {
        Some(s) => vec![s],
        None => cfg.seeds.clone(),
    };
    Ok((cfg, seeds))
}

fn execute(verb: Verb) -> Result<bool> {
    let (Verb::CollectDemos(c) | Verb::TrainSkills(c) | Verb::TrainChain(c) | Verb::TrainBaseline(c) | Verb::Eval(c) | Verb::Calibrate(c) | Verb::Run(c)) = &verb;
    let (mut cfg, seeds) = load(c)?;
    if let Verb::Run(_) = verb {
        cfg.seeds = seeds;
        let manifest = harness::run_experiment(&cfg)?;
        for (seed, m) in &manifest.evaluations {
            println!(
                "seed {seed}: success {:.3} completion {:.3} length {:.1}",
                m.success_rate, m.subtask_completion, m.rollout_length
            );
        }
        for s in manifest.stages.iter().filter(|s| s.error.is_some()) {
            eprintln!("seed {} {} failed: {}", s.seed, s.stage, s.error.as_deref().unwrap_or(""));
        }
        println!("manifest {}", cfg.manifest_path()?.display());
        return Ok(!manifest.failed());
    }
    let mut ok = true;
    for seed in seeds {
        match &verb {
            Verb::CollectDemos(_) => {
                let paths = harness::collect_demos(&cfg, seed)?;
                if paths.is_empty() {
                    println!("seed {seed}: {} needs no demonstrations", cfg.task.as_str());
                }
                for p in paths {
                    println!("seed {seed}: {}", p.display());
                }
            }
            Verb::TrainSkills(_) => {
                for r in harness::train_skills(&cfg, seed)? {
                    println!("seed {seed}: skill {} success {:.3} after {} steps", r.subtask, r.success_rate, r.env_steps);
                }
            }
            Verb::TrainChain(_) | Verb::TrainBaseline(_) => {
                let chain_verb = matches!(verb, Verb::TrainChain(_));
                let fits = if chain_verb {
                    cfg.method.is_chained()
                } else {
                    cfg.method != MethodName::Viskill
                };
                if !fits {
                    return Err(skillchain::Error::InvalidConfig(format!(
                        "method {} is not trained by this verb",
                        cfg.method.as_str()
                    )));
                }
                println!("seed {seed}: {}", harness::train_policy(&cfg, seed)?.display());
            }
            Verb::Eval(_) => {
                let m = harness::evaluate(&cfg, seed)?;
                println!(
                    "seed {seed}: success {:.3} completion {:.3} length {:.1}",
                    m.success_rate, m.subtask_completion, m.rollout_length
                );
            }
            Verb::Calibrate(_) => {
                let r = harness::calibrate(&cfg, seed)?;
                for (b, bucket) in r.buckets.iter().enumerate() {
                    println!(
                        "seed {seed}: bucket {b} value {:.3} success {:.3} ({} episodes)",
                        bucket.mean_value, bucket.success_rate, bucket.episodes
                    );
                }
                println!("seed {seed}: monotone {} spread {:.3} degenerate {}", r.monotone, r.spread, r.degenerate);
                ok &= r.monotone && !r.degenerate && !r.insufficient;
            }
            Verb::Run(_) => unreachable!(),
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    match execute(Cli::parse().verb) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
