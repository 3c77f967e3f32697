//! Experiment plumbing: configuration, staged seeded runs, evaluation
//! metrics, value calibration and the files they leave behind.

pub mod calibration;
pub mod config;
pub mod metrics;
pub mod run;

pub use calibration::{bucket_report, calibration_samples, value_calibration_report, CalibrationBucket, CalibrationReport};
pub use config::{CalibrationConfig, DemoConfig, ExperimentConfig, MethodName, TaskName};
pub use metrics::{aggregate, append_metrics, read_metrics, EvalMetrics, MeanStd, MetricsRow, SeedAggregate, METRICS_HEADER};
pub use run::{calibrate, chain_env, collect_demos, evaluate, load_discriminators, num_subtasks, run_experiment, train_policy, train_skills, RunManifest, StageRecord, StageStatus};
