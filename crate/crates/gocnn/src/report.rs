//! Schema-versioned JSON reports and per-run CSV histories.
//!
//! A report lists every per-seed measurement in `runs`; `summary` is derived
//! from those rows only (median and mean per variant and metric), so each
//! median can be recomputed from the listed values. The JSON schema ships as
//! `docs/report.schema.json`.

use std::collections::BTreeMap;
use std::path::Path;

use gocnn_core::train::EpochRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
/// Fewer seeds than this sets the `insufficient_replication` flag.
pub const MIN_SEEDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub variant: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub metric: String,
    /// In run order.
    pub values: Vec<f64>,
    pub median: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub key: String,
    pub value: f64,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub total: usize,
    pub first_layer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub experiment: String,
    pub dtype: String,
    pub seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub param_counts: BTreeMap<String, ParamCounts>,
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
    /// Named scalar differences between summary medians.
    pub differences: BTreeMap<String, f64>,
    pub gates: Vec<Gate>,
    pub annotations: Vec<Annotation>,
    pub flags: Vec<String>,
    pub config: serde_json::Value,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl Report {
    pub fn new(experiment: &str, dtype: &str, seeds: &[u64], config: serde_json::Value) -> Self {
        let mut flags = Vec::new();
        if seeds.len() < MIN_SEEDS {
            flags.push("insufficient_replication".to_owned());
        }
        Self {
            format_version: FORMAT_VERSION,
            experiment: experiment.to_owned(),
            dtype: dtype.to_owned(),
            seeds: seeds.to_vec(),
            wall_clock_seconds: 0.0,
            param_counts: BTreeMap::new(),
            runs: Vec::new(),
            summary: Vec::new(),
            differences: BTreeMap::new(),
            gates: Vec::new(),
            annotations: Vec::new(),
            flags,
            config,
        }
    }

    pub fn push_run(&mut self, variant: &str, seed: u64, metrics: impl IntoIterator<Item = (String, f64)>) {
        self.runs.push(RunRow {
            variant: variant.to_owned(),
            seed,
            metrics: metrics.into_iter().collect(),
        });
    }

    /// Rebuild `summary` from `runs`, keeping first-appearance order of variants.
    pub fn summarize(&mut self) {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.runs {
            for m in r.metrics.keys() {
                let k = (r.variant.clone(), m.clone());
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
        }
        self.summary = keys
            .into_iter()
            .map(|(variant, metric)| {
                let values: Vec<f64> = self
                    .runs
                    .iter()
                    .filter(|r| r.variant == variant)
                    .filter_map(|r| r.metrics.get(&metric).copied())
                    .collect();
                SummaryRow {
                    median: median(&values),
                    mean: mean(&values),
                    variant,
                    metric,
                    values,
                }
            })
            .collect();
    }

    pub fn median_of(&self, variant: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.variant == variant && s.metric == metric)
            .map(|s| s.median)
    }

    /// Record `observed <= threshold` (or `>=` when `at_least`).
    pub fn gate(&mut self, name: &str, observed: f64, threshold: f64, at_least: bool, rule: &str) {
        let passed = if at_least {
            observed >= threshold
        } else {
            observed <= threshold
        };
        self.gates.push(Gate {
            name: name.to_owned(),
            passed,
            observed,
            threshold,
            rule: rule.to_owned(),
        });
    }

    pub fn annotate(&mut self, key: &str, value: f64, note: &str) {
        self.annotations.push(Annotation {
            key: key.to_owned(),
            value,
            note: note.to_owned(),
        });
    }

    pub fn all_gates_pass(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }
}

/// `epoch,split,loss,accuracy` rows.
pub fn write_history(records: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "split", "loss", "accuracy"])?;
    for r in records {
        w.write_record([r.epoch.to_string(), r.split.clone(), r.loss.to_string(), r.accuracy.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
