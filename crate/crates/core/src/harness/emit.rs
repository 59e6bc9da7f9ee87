//! Per-trial CSV rows and the JSON summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Fixed CSV header.
pub const CSV_HEADER: [&str; 13] = [
    "scenario",
    "trial",
    "seed",
    "D",
    "M",
    "epsilon",
    "delta",
    "mode",
    "copies_consumed",
    "copies_predicted",
    "max_error",
    "success",
    "iterations",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub scenario: String,
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: String,
    pub copies_consumed: u64,
    pub copies_predicted: Option<u64>,
    pub max_error: Option<f64>,
    pub success: bool,
    pub iterations: usize,
    /// Scenario-specific numbers; averaged into the summary, not in the CSV.
    #[serde(skip)]
    pub extras: BTreeMap<String, f64>,
    /// Set when the trial ended in an error.
    #[serde(skip)]
    pub error: Option<String>,
    /// Optional per-trial transcript.
    #[serde(skip)]
    pub detail: Option<serde_json::Value>,
}

impl TrialRow {
    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.get(key).copied()
    }

    fn record(&self) -> [String; 13] {
        let opt = |x: Option<String>| x.unwrap_or_default();
        [
            self.scenario.clone(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.dim.to_string(),
            self.m.to_string(),
            self.epsilon.to_string(),
            self.delta.to_string(),
            self.mode.clone(),
            self.copies_consumed.to_string(),
            opt(self.copies_predicted.map(|x| x.to_string())),
            opt(self.max_error.map(|x| x.to_string())),
            self.success.to_string(),
            self.iterations.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialError {
    pub trial: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub trials: usize,
    pub seed: u64,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: String,
    pub successes: usize,
    pub success_rate: f64,
    pub pass_rate: f64,
    pub passed: bool,
    pub copies_consumed_mean: f64,
    pub copies_consumed_max: u64,
    pub copies_predicted_max: Option<u64>,
    pub max_error_mean: Option<f64>,
    pub max_error_max: Option<f64>,
    pub iterations_mean: f64,
    pub iterations_max: usize,
    /// Means of the per-row extras over the rows that report them.
    pub extras: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, f64>,
    pub errors: Vec<TrialError>,
}

/// Context needed to summarize a set of rows.
#[derive(Clone, Debug)]
pub struct SummaryContext {
    pub scenario: String,
    pub seed: u64,
    pub dim: usize,
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub mode: String,
    pub pass_rate: f64,
    pub constants: BTreeMap<String, f64>,
}

pub fn summarize(rows: &[TrialRow], ctx: SummaryContext) -> Summary {
    let n = rows.len();
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        (c > 0).then(|| s / c as f64)
    };
    let successes = rows.iter().filter(|r| r.success).count();
    let success_rate = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
    let mut keys: Vec<&String> = rows.iter().flat_map(|r| r.extras.keys()).collect();
    keys.sort();
    keys.dedup();
    let extras = keys
        .into_iter()
        .filter_map(|k| mean(&mut rows.iter().filter_map(|r| r.extras.get(k).copied())).map(|v| (k.clone(), v)))
        .collect();
    Summary {
        scenario: ctx.scenario,
        trials: n,
        seed: ctx.seed,
        dim: ctx.dim,
        m: ctx.m,
        epsilon: ctx.epsilon,
        delta: ctx.delta,
        mode: ctx.mode,
        successes,
        success_rate,
        pass_rate: ctx.pass_rate,
        passed: n > 0 && successes as f64 >= ctx.pass_rate * n as f64 - 1e-9,
        copies_consumed_mean: mean(&mut rows.iter().map(|r| r.copies_consumed as f64)).unwrap_or(0.0),
        copies_consumed_max: rows.iter().map(|r| r.copies_consumed).max().unwrap_or(0),
        copies_predicted_max: rows.iter().filter_map(|r| r.copies_predicted).max(),
        max_error_mean: mean(&mut rows.iter().filter_map(|r| r.max_error)),
        max_error_max: rows.iter().filter_map(|r| r.max_error).reduce(f64::max),
        iterations_mean: mean(&mut rows.iter().map(|r| r.iterations as f64)).unwrap_or(0.0),
        iterations_max: rows.iter().map(|r| r.iterations).max().unwrap_or(0),
        extras,
        constants: ctx.constants,
        errors: rows
            .iter()
            .filter_map(|r| {
                r.error.as_ref().map(|m| TrialError {
                    trial: r.trial,
                    message: m.clone(),
                })
            })
            .collect(),
    }
}

pub fn write_csv<W: Write>(rows: &[TrialRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record(r.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &Summary, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    Ok(())
}

/// Writes the CSV and JSON files, creating parent directories as needed.
pub fn emit_results(rows: &[TrialRow], summary: &Summary, csv_path: &Path, json_path: &Path) -> Result<()> {
    for p in [csv_path, json_path] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_csv(rows, BufWriter::new(File::create(csv_path)?))?;
    let mut json = BufWriter::new(File::create(json_path)?);
    write_summary(summary, &mut json)?;
    json.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, success: bool) -> TrialRow {
        TrialRow {
            scenario: "x".into(),
            trial,
            seed: 3,
            dim: 2,
            m: 4,
            epsilon: 0.25,
            delta: 0.1,
            mode: "m".into(),
            copies_consumed: 10 * trial as u64,
            copies_predicted: Some(100),
            max_error: Some(0.1 * trial as f64),
            success,
            iterations: trial,
            extras: BTreeMap::from([("a".to_string(), trial as f64)]),
            error: None,
            detail: None,
        }
    }

    fn ctx() -> SummaryContext {
        SummaryContext {
            scenario: "x".into(),
            seed: 3,
            dim: 2,
            m: 4,
            epsilon: 0.25,
            delta: 0.1,
            mode: "m".into(),
            pass_rate: 0.5,
            constants: BTreeMap::new(),
        }
    }

    #[test]
    fn header_only_for_no_rows() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn one_row_per_trial() {
        let mut buf = Vec::new();
        write_csv(&[row(0, true)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "x,0,3,2,4,0.25,0.1,m,0,100,0,true,0");
    }

    #[test]
    fn summary_aggregates() {
        let rows = vec![row(0, true), row(1, false), row(2, true), row(3, false)];
        let s = summarize(&rows, ctx());
        assert_eq!(s.success_rate, 0.5);
        assert!(s.passed);
        assert_eq!(s.extras["a"], 1.5);
        assert_eq!(s.copies_consumed_max, 30);
        assert!((s.max_error_max.unwrap() - 0.3).abs() < 1e-12);
        assert!(!summarize(&[], ctx()).passed);
    }
}
