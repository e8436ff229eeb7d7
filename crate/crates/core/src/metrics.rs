//! Per-task metric rows, scenario summaries and their CSV forms.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::TaskOutcome;

/// Tasks in the trailing timing window.
pub const TIMING_WINDOW: usize = 100;
/// Tasks in the reward moving average.
pub const REWARD_WINDOW: usize = 50;

pub const TASK_COLUMNS: [&str; 8] = [
    "task_id",
    "strategy",
    "completion_time_s",
    "diversity",
    "correct",
    "retries",
    "distinct_sources",
    "total_reward",
];

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "strategy",
    "mean_time_last100",
    "std_time_last100",
    "mean_diversity",
    "accuracy",
    "success_rate",
    "mean_retries",
    "accesses_per_task",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task_id: u64,
    pub strategy: String,
    pub completion_time_s: f64,
    pub diversity: f64,
    pub correct: u8,
    pub retries: u32,
    pub distinct_sources: usize,
    pub total_reward: u32,
}

impl MetricsRow {
    pub fn from_outcome(strategy: &str, o: &TaskOutcome) -> Self {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for s in &o.winning_sources {
            *counts.entry(s.0).or_default() += 1;
        }
        let counts: Vec<usize> = counts.into_values().collect();
        Self {
            task_id: o.task_id.0,
            strategy: strategy.to_string(),
            completion_time_s: o.completion_time,
            diversity: diversity_index(&counts).unwrap_or(0.0),
            correct: o.correct as u8,
            retries: o.retries,
            distinct_sources: counts.len(),
            total_reward: o.total_reward(),
        }
    }

    /// A task is delivered exactly when its winners were rewarded.
    pub fn delivered(&self) -> bool {
        self.total_reward > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("diversity of an empty multiset")]
pub struct EmptyMultiset;

/// `D = 1 - sum p_i^2` over category counts.
pub fn diversity_index(counts: &[usize]) -> std::result::Result<f64, EmptyMultiset> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(EmptyMultiset);
    }
    let total = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / total).powi(2)).sum::<f64>())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and sample standard deviation of completion time over the last
/// `window` rows (fewer if there are fewer rows).
pub fn window_stats(rows: &[MetricsRow], window: usize) -> (f64, f64) {
    let tail: Vec<f64> = rows[rows.len().saturating_sub(window)..].iter().map(|r| r.completion_time_s).collect();
    let m = mean(&tail);
    let sd = if tail.len() < 2 {
        0.0
    } else {
        (tail.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (tail.len() - 1) as f64).sqrt()
    };
    (m, sd)
}

/// Share of delivered tasks whose value matched the ground truth. Tasks that
/// were never delivered count against [`success_rate`] instead; with nothing
/// delivered the accuracy is reported as 0.
pub fn accuracy(rows: &[MetricsRow]) -> f64 {
    let delivered: Vec<&MetricsRow> = rows.iter().filter(|r| r.delivered()).collect();
    if delivered.is_empty() {
        return 0.0;
    }
    delivered.iter().filter(|r| r.correct == 1).count() as f64 / delivered.len() as f64
}

/// Share of tasks delivered before the retry budget ran out.
pub fn success_rate(rows: &[MetricsRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.delivered()).count() as f64 / rows.len() as f64
}

/// Number of tasks per retry count.
pub fn retry_histogram(rows: &[MetricsRow]) -> BTreeMap<u32, usize> {
    let mut h = BTreeMap::new();
    for r in rows {
        *h.entry(r.retries).or_default() += 1;
    }
    h
}

/// Trailing mean over up to `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            sum += v;
            if i >= w {
                sum -= values[i - w];
            }
            sum / (i + 1).min(w) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategy: String,
    pub mean_time_last100: f64,
    pub std_time_last100: f64,
    pub mean_diversity: f64,
    pub accuracy: f64,
    pub success_rate: f64,
    pub mean_retries: f64,
    pub accesses_per_task: f64,
}

/// Summary of one scenario. `accesses_per_task` is `None` when the rows come
/// from a CSV without access counts.
pub fn summarize(strategy: &str, rows: &[MetricsRow], accesses_per_task: Option<f64>) -> Summary {
    let (m, sd) = window_stats(rows, TIMING_WINDOW);
    let diversities: Vec<f64> = rows.iter().filter(|r| r.delivered()).map(|r| r.diversity).collect();
    Summary {
        strategy: strategy.to_string(),
        mean_time_last100: m,
        std_time_last100: sd,
        mean_diversity: mean(&diversities),
        accuracy: accuracy(rows),
        success_rate: success_rate(rows),
        mean_retries: mean(&rows.iter().map(|r| r.retries as f64).collect::<Vec<_>>()),
        accesses_per_task: accesses_per_task.unwrap_or(f64::NAN),
    }
}

/// Mean total source queries per task.
pub fn accesses_per_task(outcomes: &[TaskOutcome]) -> f64 {
    mean(&outcomes.iter().map(|o| o.accesses.iter().map(|&a| a as f64).sum()).collect::<Vec<_>>())
}

pub fn rows_from_outcomes(strategy: &str, outcomes: &[TaskOutcome]) -> Vec<MetricsRow> {
    outcomes.iter().map(|o| MetricsRow::from_outcome(strategy, o)).collect()
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TASK_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.task_id.to_string(),
            r.strategy.clone(),
            f6(r.completion_time_s),
            f6(r.diversity),
            r.correct.to_string(),
            r.retries.to_string(),
            r.distinct_sources.to_string(),
            r.total_reward.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TASK_COLUMNS {
        return Err(Error::InvalidConfig(format!("unexpected task CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_summary<W: Write>(rows: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for s in rows {
        w.write_record([
            s.strategy.clone(),
            f6(s.mean_time_last100),
            f6(s.std_time_last100),
            f6(s.mean_diversity),
            f6(s.accuracy),
            f6(s.success_rate),
            f6(s.mean_retries),
            f6(s.accesses_per_task),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn parse_summary<R: Read>(input: R) -> Result<Vec<Summary>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_csv(rows, create(path)?)
}

pub fn emit_summary(rows: &[Summary], path: &Path) -> Result<()> {
    write_summary(rows, create(path)?)
}

/// Raw per-task total reward next to its moving average.
pub fn emit_rewards(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let raw: Vec<f64> = rows.iter().map(|r| r.total_reward as f64).collect();
    let smooth = moving_average(&raw, REWARD_WINDOW);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["task_id", "total_reward", "moving_average"])?;
    for (r, s) in rows.iter().zip(smooth) {
        w.write_record([r.task_id.to_string(), r.total_reward.to_string(), f6(s)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
