use std::collections::BTreeMap;
use std::path::Path;

use distress_core::models::{Metrics, ModelKind};
use distress_core::transfer::{Condition, TransferRun};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::{CliError, Stage};

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSplit {
    /// Held-out source rows.
    Source,
    /// Labeled target sample.
    Target,
}

impl DataSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSplit::Source => "source",
            DataSplit::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub condition: Condition,
    pub model: ModelKind,
    pub data: DataSplit,
    pub accuracy: f64,
    pub specificity: f64,
    pub sensitivity: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub selected: bool,
}

impl MetricRow {
    fn new(condition: Condition, model: ModelKind, data: DataSplit, m: &Metrics, selected: bool) -> Self {
        MetricRow {
            condition,
            model,
            data,
            accuracy: m.accuracy,
            specificity: m.specificity,
            sensitivity: m.sensitivity,
            tp: m.tp,
            fp: m.fp,
            tn: m.tn,
            fn_: m.fn_,
            selected,
        }
    }
}

/// Source and target rows for every candidate, in model order.
pub fn metric_rows(run: &TransferRun) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for data in [DataSplit::Source, DataSplit::Target] {
        for c in &run.candidates {
            let m = match data {
                DataSplit::Source => &c.source_test,
                DataSplit::Target => &c.target_sample,
            };
            rows.push(MetricRow::new(run.condition, c.kind, data, m, c.kind == run.selected));
        }
    }
    rows
}

pub fn write_metrics_csv(rows: &[MetricRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u64,
}

/// Everything needed to tell whether two runs are comparable or identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub condition: Condition,
    pub config_path: String,
    pub config_hash: String,
    pub overrides: Vec<String>,
    pub versions: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of each input file, keyed by config field.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file written next to the manifest.
    pub outputs: BTreeMap<String, String>,
    pub selected: ModelKind,
    pub metrics: Vec<MetricRow>,
    pub timings: Vec<StageTiming>,
    /// Digest over every field except `timings` and itself.
    pub run_digest: String,
}

impl RunManifest {
    pub fn compute_digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        let obj = v.as_object_mut().expect("object");
        obj.remove("timings");
        obj.remove("run_digest");
        hex::encode(Sha256::digest(serde_json::to_vec(&v).expect("value serializes")))
    }

    pub fn seal(mut self) -> Self {
        self.run_digest = self.compute_digest();
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::new(Stage::Report, format!("report: {}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::new(
                Stage::Report,
                format!("report: {}: manifest format {} unsupported", path.display(), m.format),
            ));
        }
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
