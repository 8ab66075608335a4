//! Plot data and end-of-run summaries from a metrics log.
//!
//! [`write_report`] emits four CSV files, one row per logged step:
//!
//! | file | columns |
//! |---|---|
//! | `length.csv` | `step,mean_length_tokens` |
//! | `mask_ratio.csv` | `step,positive,negative,zero` |
//! | `rewards.csv` | `step,total,accuracy,format,aux_raw,masked_aux` |
//! | `tool_use.csv` | `step,aux_helps,aux_hurts,neutral` |
//!
//! Mask ratios absent from the log are written as `0`. Tool-use cells for a
//! category the step did not draw are left empty.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::train::{read_metrics, CategoryRates, MetricsRecord};

/// Steps averaged by the final-window summary.
pub const SUMMARY_WINDOW: usize = 10;

/// Means over the last `steps` records of a log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSummary {
    pub steps: usize,
    pub mean_total_reward: f64,
    pub mean_accuracy: f64,
    pub mean_length_tokens: f64,
    pub positive_mask_ratio: f64,
    pub negative_mask_ratio: f64,
    pub zero_mask_ratio: f64,
    /// Means over the steps that drew the category.
    pub tool_use_aux_helps: Option<f64>,
    pub tool_use_aux_hurts: Option<f64>,
    pub tool_use_neutral: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Summary of the last `window` records, or `None` for an empty log.
pub fn window_summary(records: &[MetricsRecord], window: usize) -> Option<WindowSummary> {
    let tail = &records[records.len().saturating_sub(window)..];
    if tail.is_empty() {
        return None;
    }
    let avg = |f: fn(&MetricsRecord) -> f64| mean(tail.iter().map(f)).unwrap_or(0.0);
    let rate = |f: fn(&CategoryRates) -> Option<f64>| mean(tail.iter().filter_map(|r| f(&r.tool_use_rate)));
    Some(WindowSummary {
        steps: tail.len(),
        mean_total_reward: avg(|r| r.mean_total_reward),
        mean_accuracy: avg(|r| r.mean_accuracy),
        mean_length_tokens: avg(|r| r.mean_length_tokens),
        positive_mask_ratio: avg(|r| r.positive_mask_ratio.unwrap_or(0.0)),
        negative_mask_ratio: avg(|r| r.negative_mask_ratio.unwrap_or(0.0)),
        zero_mask_ratio: avg(|r| r.zero_mask_ratio.unwrap_or(0.0)),
        tool_use_aux_helps: rate(|c| c.aux_helps),
        tool_use_aux_hurts: rate(|c| c.aux_hurts),
        tool_use_neutral: rate(|c| c.neutral),
    })
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV tables as `(file name, contents)` pairs.
pub fn series_tables(records: &[MetricsRecord]) -> Vec<(&'static str, String)> {
    let mut length = String::from("step,mean_length_tokens\n");
    let mut mask = String::from("step,positive,negative,zero\n");
    let mut rewards = String::from("step,total,accuracy,format,aux_raw,masked_aux\n");
    let mut tool = String::from("step,aux_helps,aux_hurts,neutral\n");
    for r in records {
        let s = r.step;
        writeln!(length, "{s},{}", r.mean_length_tokens).unwrap();
        writeln!(
            mask,
            "{s},{},{},{}",
            r.positive_mask_ratio.unwrap_or(0.0),
            r.negative_mask_ratio.unwrap_or(0.0),
            r.zero_mask_ratio.unwrap_or(0.0)
        )
        .unwrap();
        writeln!(
            rewards,
            "{s},{},{},{},{},{}",
            r.mean_total_reward, r.mean_accuracy, r.mean_format, r.mean_aux_raw, r.mean_masked_aux
        )
        .unwrap();
        let t = &r.tool_use_rate;
        writeln!(
            tool,
            "{s},{},{},{}",
            cell(t.aux_helps),
            cell(t.aux_hurts),
            cell(t.neutral)
        )
        .unwrap();
    }
    vec![
        ("length.csv", length),
        ("mask_ratio.csv", mask),
        ("rewards.csv", rewards),
        ("tool_use.csv", tool),
    ]
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub steps: usize,
    pub files: Vec<PathBuf>,
    pub summary: Option<WindowSummary>,
}

/// Reads `metrics_path` and writes the CSV series into `out_dir`.
pub fn write_report(metrics_path: &Path, out_dir: &Path) -> Result<ReportOutput> {
    let text = std::fs::read_to_string(metrics_path).map_err(|e| Error::io(metrics_path, e))?;
    let records = read_metrics(&text)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    for (name, body) in series_tables(&records) {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(ReportOutput {
        steps: records.len(),
        files,
        summary: window_summary(&records, SUMMARY_WINDOW),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, length: f64, contrast: bool) -> MetricsRecord {
        let ratio = |x: f64| contrast.then_some(x);
        MetricsRecord {
            schema_version: 1,
            step,
            mean_total_reward: step as f64 * 0.5,
            mean_accuracy: 0.25,
            mean_format: 1.0,
            mean_length_tokens: length,
            mean_aux_raw: 0.5,
            mean_masked_aux: 0.0,
            positive_mask_ratio: ratio(0.5),
            negative_mask_ratio: ratio(0.25),
            zero_mask_ratio: ratio(0.25),
            tool_use_rate: CategoryRates {
                aux_helps: step.is_multiple_of(2).then_some(1.0),
                aux_hurts: Some(0.0),
                neutral: None,
            },
            accuracy_rate: CategoryRates::default(),
            surrogate: 0.0,
            kl: 0.0,
            objective: 0.0,
            grad_norm: 0.0,
            advantage_inputs: 64,
            free_rollouts: 64,
            contrastive_rollouts: 0,
            degenerate_groups: 0,
            wall_clock_ms: None,
        }
    }

    #[test]
    fn one_row_per_step() {
        let log: Vec<_> = (1..=100).map(|s| record(s, 7.0, true)).collect();
        for (_, body) in series_tables(&log) {
            assert_eq!(body.lines().count(), 101);
        }
    }

    #[test]
    fn missing_mask_ratios_are_zero_columns() {
        let log: Vec<_> = (1..=5).map(|s| record(s, 7.0, false)).collect();
        let tables = series_tables(&log);
        let mask = &tables[1].1;
        for line in mask.lines().skip(1) {
            assert!(line.ends_with(",0,0,0"), "{line}");
        }
        assert!(tables[3].1.lines().nth(1).unwrap().ends_with(",0,"));
    }

    #[test]
    fn window_mean_matches_hand_computation() {
        let log: Vec<_> = (1..=30).map(|s| record(s, s as f64, true)).collect();
        let w = window_summary(&log, SUMMARY_WINDOW).unwrap();
        assert_eq!(w.steps, 10);
        let by_hand: f64 = (21..=30).map(|s| s as f64).sum::<f64>() / 10.0;
        assert!((w.mean_length_tokens - by_hand).abs() < 1e-12);
        assert!((w.mean_total_reward - by_hand * 0.5).abs() < 1e-12);
        assert_eq!(w.tool_use_aux_helps, Some(1.0));
        assert_eq!(w.tool_use_neutral, None);
        assert!(window_summary(&[], 10).is_none());
        assert_eq!(window_summary(&log[..3], 10).unwrap().steps, 3);
    }

    #[test]
    fn corrupt_log_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let good = serde_json::to_string(&record(1, 5.0, true)).unwrap();
        let path = dir.path().join("metrics.jsonl");
        std::fs::write(&path, format!("{good}\n{{broken\n")).unwrap();
        let err = write_report(&path, &dir.path().join("out")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
