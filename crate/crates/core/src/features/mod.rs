//! Numeric feature matrices built from daily documents, plus the
//! selection and scaling steps applied to them.

mod extract;
mod lexicon;
mod scaling;
mod select;

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::DistressLabel;

pub use extract::{build_unigram_vocab, extract_features, process_documents, present_spec, Vocabulary};
pub use lexicon::{lexicon_percentages, Lexicon, Pattern};
pub use scaling::{apply_scaling, fit_scaling, ScalingParams};
pub use select::{correlation_prune, drop_meta, intersect_features, pearson_r2, PruneReport};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("duplicate feature name {0:?}")]
    DuplicateName(String),
    #[error("feature spec is empty after {0}")]
    EmptySpec(&'static str),
    #[error("source and target share no features")]
    EmptyIntersection,
    #[error("no distress-labeled documents with any stems")]
    NoDistressDocuments,
    #[error("coverage must lie in (0, 1], got {0}")]
    InvalidCoverage(f64),
    #[error("r² threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("feature specs differ")]
    SpecMismatch,
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Where a feature comes from; decides which adaptation step may drop it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    LexiconPct,
    Unigram,
    Time,
    Engagement,
    EgoNetwork,
    Meta,
}

impl FeatureKind {
    pub fn is_user_level(self) -> bool {
        matches!(self, FeatureKind::Engagement | FeatureKind::EgoNetwork)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Feature { name: name.into(), kind }
    }
}

/// Ordered, uniquely named feature list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    features: Vec<Feature>,
}

impl FeatureSpec {
    pub fn new(features: Vec<Feature>) -> Result<Self, FeatureError> {
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(FeatureError::DuplicateName(f.name.clone()));
            }
        }
        Ok(FeatureSpec { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn count_kind(&self, kind: FeatureKind) -> usize {
        self.features.iter().filter(|f| f.kind == kind).count()
    }

    /// Sub-spec keeping features that satisfy `keep`, in order.
    pub fn retain(&self, mut keep: impl FnMut(&Feature) -> bool) -> FeatureSpec {
        FeatureSpec {
            features: self.features.iter().filter(|f| keep(f)).cloned().collect(),
        }
    }

    /// Hex SHA-256 over names and kinds; models refuse matrices with another fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.features {
            h.update(f.name.as_bytes());
            h.update([0u8]);
            h.update(format!("{:?}", f.kind).as_bytes());
            h.update([0xffu8]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub user_id: String,
    pub date: NaiveDate,
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.user_id, self.date)
    }
}

/// Dense row-major matrix with one labeled, keyed row per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    spec: FeatureSpec,
    data: Vec<f64>,
    labels: Vec<DistressLabel>,
    row_keys: Vec<RowKey>,
}

impl FeatureMatrix {
    /// `data` is row-major with `labels.len()` rows of `spec.len()` values.
    pub fn new(spec: FeatureSpec, data: Vec<f64>, labels: Vec<DistressLabel>, row_keys: Vec<RowKey>) -> Self {
        assert_eq!(labels.len(), row_keys.len(), "labels and keys disagree");
        assert_eq!(data.len(), labels.len() * spec.len(), "data shape mismatch");
        assert!(data.iter().all(|v| v.is_finite()), "feature values must be finite");
        FeatureMatrix {
            spec,
            data,
            labels,
            row_keys,
        }
    }

    /// Builds a matrix from per-row vectors; keys default to synthetic ones.
    pub fn from_rows(spec: FeatureSpec, rows: &[Vec<f64>], labels: Vec<DistressLabel>) -> Self {
        let keys = (0..rows.len())
            .map(|i| RowKey {
                user_id: format!("row{i:06}"),
                date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            })
            .collect();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        FeatureMatrix::new(spec, data, labels, keys)
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.spec.len()
    }

    pub fn labels(&self) -> &[DistressLabel] {
        &self.labels
    }

    pub fn row_keys(&self) -> &[RowKey] {
        &self.row_keys
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.spec.index_of(name).map(|j| self.column(j))
    }

    pub fn column_mean(&self, j: usize) -> f64 {
        let n = self.n_rows() as f64;
        (0..self.n_rows()).map(|i| self.get(i, j)).sum::<f64>() / n
    }

    pub fn count_label(&self, label: DistressLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Rows by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            spec: self.spec.clone(),
            data,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            row_keys: idx.iter().map(|&i| self.row_keys[i].clone()).collect(),
        }
    }

    /// Indices of rows carrying a Distress or Control label.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.labels[i].is_labeled()).collect()
    }

    /// Columns named in `spec`, reordered to match it.
    pub fn select_spec(&self, spec: &FeatureSpec) -> Result<FeatureMatrix, FeatureError> {
        let cols = spec
            .names()
            .map(|n| self.spec.index_of(n).ok_or_else(|| FeatureError::UnknownFeature(n.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Ok(FeatureMatrix {
            spec: spec.clone(),
            data,
            labels: self.labels.clone(),
            row_keys: self.row_keys.clone(),
        })
    }

    /// Applies `f(column, value)` to every cell.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> FeatureMatrix {
        let c = self.n_cols();
        let data = self.data.iter().enumerate().map(|(k, &v)| f(k % c, v)).collect();
        FeatureMatrix {
            data,
            ..self.clone()
        }
    }

    pub fn with_labels(&self, labels: Vec<DistressLabel>) -> FeatureMatrix {
        assert_eq!(labels.len(), self.n_rows());
        FeatureMatrix {
            labels,
            ..self.clone()
        }
    }

    /// CSV with leading `user_id,date,label` columns then one column per feature.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["user_id".to_string(), "date".into(), "label".into()];
        header.extend(self.spec.names().map(str::to_string));
        out.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![
                self.row_keys[i].user_id.clone(),
                self.row_keys[i].date.to_string(),
                self.labels[i].to_string(),
            ];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| FeatureError::Csv(e.into()))?;
        Ok(())
    }
}
