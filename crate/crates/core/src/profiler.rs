//! Per-component token accounting over prompt logs.
//!
//! A log is JSON lines, one record per LLM invocation:
//!
//! ```text
//! {"record_id":"r1","model":"gpt-4o","benchmark":"aitw","agent":"react",
//!  "components":{"system":"...","ui":"..."},"counts":{"ui":2793}}
//! ```
//!
//! `counts` is optional; when present it replaces counting for that record
//! (used for logs that were tokenized elsewhere) and the row is flagged.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::evaluation::{EvalError, TokenCounter};
use crate::representations::{PromptBundle, COMPONENT_NAMES};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("prompt log is empty")]
    EmptyLog,
    #[error("log line {line}: {detail}")]
    Record { line: usize, detail: String },
    #[error("reading log: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Count(#[from] EvalError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCounts {
    #[serde(default)]
    pub system: u64,
    #[serde(default)]
    pub action_space: u64,
    #[serde(default)]
    pub task: u64,
    #[serde(default)]
    pub ui: u64,
    #[serde(default)]
    pub context: u64,
    #[serde(default)]
    pub format: u64,
}

impl ComponentCounts {
    fn as_array(&self) -> [u64; 6] {
        [self.system, self.action_space, self.task, self.ui, self.context, self.format]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct PromptLogRecord {
    pub record_id: String,
    #[serde(rename = "model")]
    pub model_label: String,
    #[serde(rename = "benchmark")]
    pub benchmark_label: String,
    #[serde(rename = "agent")]
    pub agent_label: String,
    #[serde(default)]
    pub components: PromptBundle,
    #[serde(default)]
    pub counts: Option<ComponentCounts>,
}

pub type GroupKey = (String, String, String);

const UI: usize = 3;

/// Integer sums per group; merging two accumulators is exact, so any
/// sharding of the log gives the same rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Accumulator {
    records: u64,
    sums: [u64; 6],
    precounted: u64,
}

impl Accumulator {
    fn merge(&mut self, o: &Accumulator) {
        self.records += o.records;
        self.precounted += o.precounted;
        for (a, b) in self.sums.iter_mut().zip(o.sums) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub model: String,
    pub benchmark: String,
    pub agent: String,
    pub records: u64,
    /// Mean tokens per component, in `COMPONENT_NAMES` order.
    pub means: [f64; 6],
    pub total: f64,
    /// Mean UI tokens over mean total; 0 when the total is 0.
    pub ui_ratio: f64,
    /// Number of records whose counts came from the log rather than the counter.
    pub precounted: u64,
}

impl BreakdownRow {
    pub fn rounded_means(&self) -> [u64; 6] {
        self.means.map(|m| m.round() as u64)
    }

    pub fn rounded_total(&self) -> u64 {
        self.total.round() as u64
    }

    /// e.g. `86.7%`
    pub fn ui_percent(&self) -> String {
        format!("{:.1}%", self.ui_ratio * 100.0)
    }
}

pub fn parse_log<R: BufRead>(reader: R) -> Result<Vec<PromptLogRecord>, ProfileError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |detail: String| ProfileError::Record { line: i + 1, detail };
        let r: PromptLogRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        for (name, v) in [("model", &r.model_label), ("benchmark", &r.benchmark_label), ("agent", &r.agent_label)] {
            if v.trim().is_empty() {
                return Err(err(format!("empty `{name}` label")));
            }
        }
        out.push(r);
    }
    Ok(out)
}

fn record_counts(r: &PromptLogRecord, counter: &TokenCounter) -> Result<[u64; 6], ProfileError> {
    if let Some(c) = &r.counts {
        return Ok(c.as_array());
    }
    let mut out = [0u64; 6];
    for (o, text) in out.iter_mut().zip(r.components.components()) {
        *o = counter.count(text)? as u64;
    }
    Ok(out)
}

pub fn profile(records: &[PromptLogRecord], counter: &TokenCounter) -> Result<Vec<BreakdownRow>, ProfileError> {
    if records.is_empty() {
        return Err(ProfileError::EmptyLog);
    }
    let groups = records
        .par_iter()
        .map(|r| -> Result<BTreeMap<GroupKey, Accumulator>, ProfileError> {
            let key = (r.model_label.clone(), r.benchmark_label.clone(), r.agent_label.clone());
            let acc = Accumulator { records: 1, sums: record_counts(r, counter)?, precounted: r.counts.is_some() as u64 };
            Ok(BTreeMap::from([(key, acc)]))
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                a.entry(k).or_default().merge(&v);
            }
            Ok(a)
        })?;

    Ok(groups
        .into_iter()
        .map(|((model, benchmark, agent), acc)| {
            let n = acc.records as f64;
            let means = acc.sums.map(|s| s as f64 / n);
            let total_sum: u64 = acc.sums.iter().sum();
            let ui_ratio = if total_sum == 0 { 0.0 } else { acc.sums[UI] as f64 / total_sum as f64 };
            BreakdownRow {
                model,
                benchmark,
                agent,
                records: acc.records,
                means,
                total: total_sum as f64 / n,
                ui_ratio,
                precounted: acc.precounted,
            }
        })
        .collect())
}

const HEADER: [&str; 13] = [
    "model",
    "benchmark",
    "agent",
    "records",
    "system",
    "action_space",
    "task",
    "ui",
    "context",
    "format",
    "total",
    "ui_ratio",
    "precounted",
];

fn row_fields(r: &BreakdownRow) -> Vec<String> {
    let mut f = vec![r.model.clone(), r.benchmark.clone(), r.agent.clone(), r.records.to_string()];
    f.extend(r.rounded_means().iter().map(u64::to_string));
    f.push(r.rounded_total().to_string());
    f.push(r.ui_percent());
    f.push(r.precounted.to_string());
    f
}

/// Fixed-width text table.
pub fn render_table(rows: &[BreakdownRow]) -> String {
    debug_assert_eq!(HEADER.len(), 4 + COMPONENT_NAMES.len() + 3);
    let body: Vec<Vec<String>> = rows.iter().map(row_fields).collect();
    let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
    for r in &body {
        for (w, f) in widths.iter_mut().zip(r) {
            *w = (*w).max(f.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |fields: Vec<&str>| {
        let cells: Vec<String> = fields.iter().zip(&widths).map(|(f, w)| format!("{f:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    };
    line(HEADER.to_vec());
    for r in &body {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn render_csv(rows: &[BreakdownRow]) -> Result<String, ProfileError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| ProfileError::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(row_fields(r)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| ProfileError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
