use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chaining::ChainEval;
use crate::error::{Error, Result};

/// Evaluation summary over deterministic episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub success_rate: f64,
    /// Mean number of completed subtasks.
    pub subtask_completion: f64,
    /// Mean steps of successful episodes (0 when none succeeded).
    pub rollout_length: f64,
    /// Per-episode `(success, completed subtasks, steps)`.
    pub episodes: Vec<(bool, usize, usize)>,
}

impl EvalMetrics {
    pub fn from_episodes(episodes: Vec<(bool, usize, usize)>) -> Self {
        crate::chaining::summarize(episodes).into()
    }
}

impl From<ChainEval> for EvalMetrics {
    fn from(e: ChainEval) -> Self {
        Self {
            success_rate: e.success_rate,
            subtask_completion: e.subtask_completion,
            rollout_length: e.rollout_length,
            episodes: e.episodes,
        }
    }
}

/// Mean and (population) standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Across-seed summary of [`EvalMetrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub success_rate: MeanStd,
    pub subtask_completion: MeanStd,
    pub rollout_length: MeanStd,
}

pub fn aggregate(per_seed: &[EvalMetrics]) -> SeedAggregate {
    let col = |f: fn(&EvalMetrics) -> f64| MeanStd::of(&per_seed.iter().map(f).collect::<Vec<_>>());
    SeedAggregate {
        success_rate: col(|m| m.success_rate),
        subtask_completion: col(|m| m.subtask_completion),
        rollout_length: col(|m| m.rollout_length),
    }
}

/// One line of the metrics CSV. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task: String,
    pub method: String,
    pub seed: u64,
    /// `skill1`..`skillK`, `chain`, `baseline` for training curves and
    /// `eval` for the final evaluation.
    pub stage: String,
    pub step: u64,
    pub success_rate: Option<f64>,
    pub subtask_completion: Option<f64>,
    pub rollout_length: Option<f64>,
    pub wallclock_s: Option<f64>,
}

pub const METRICS_HEADER: [&str; 9] = [
    "task",
    "method",
    "seed",
    "stage",
    "step",
    "success_rate",
    "subtask_completion",
    "rollout_length",
    "wallclock_s",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("metrics csv: {e}"))
}

/// Appends rows to the CSV at `path`, writing the header if the file is new
/// or empty.
pub fn append_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(METRICS_HEADER).map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != METRICS_HEADER {
        return Err(Error::Format(format!("unexpected metrics header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(stage: &str, step: u64, rate: Option<f64>) -> MetricsRow {
        MetricsRow {
            task: "chain_world".into(),
            method: "viskill".into(),
            seed: 2,
            stage: stage.into(),
            step,
            success_rate: rate,
            subtask_completion: None,
            rollout_length: Some(3.0),
            wallclock_s: None,
        }
    }

    #[test]
    fn appends_keep_one_header_and_blank_missing_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        append_metrics(&p, &[row("chain", 10, Some(0.5))]).unwrap();
        append_metrics(&p, &[row("eval", 0, None)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER.join(","));
        assert_eq!(lines[1], "chain_world,viskill,2,chain,10,0.5,,3.0,");
        assert_eq!(lines.len(), 3);
        let back = read_metrics(&p).unwrap();
        assert_eq!(back, vec![row("chain", 10, Some(0.5)), row("eval", 0, None)]);
    }

    #[test]
    fn aggregate_matches_hand_computation() {
        let m = |s: f64| EvalMetrics {
            success_rate: s,
            subtask_completion: 3.0 * s,
            rollout_length: 10.0,
            episodes: Vec::new(),
        };
        let a = aggregate(&[m(0.2), m(0.6)]);
        assert!((a.success_rate.mean - 0.4).abs() < 1e-12);
        assert!((a.success_rate.std - 0.2).abs() < 1e-12);
        assert!((a.subtask_completion.std - 0.6).abs() < 1e-12);
        assert_eq!(a.rollout_length.std, 0.0);
    }

    #[test]
    fn episode_log_recomputes_the_reported_means() {
        let log = vec![(true, 3, 40), (false, 1, 100), (true, 3, 60), (false, 0, 30)];
        let m = EvalMetrics::from_episodes(log.clone());
        assert_eq!(m.success_rate, 0.5);
        assert_eq!(m.subtask_completion, 7.0 / 4.0);
        assert_eq!(m.rollout_length, 50.0);
        assert_eq!(m.episodes, log);
    }
}
