//! Supervised classifiers trained from scratch, cross-validation, grid
//! search and evaluation metrics. Distress is the positive class throughout.

mod cv;
mod forest;
mod logistic;
mod metrics;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DistressLabel;
use crate::features::FeatureMatrix;

pub use cv::{grid_search, kfold_split, train_test_split, CvRow, Fold, GridResult};
pub use forest::{Forest, Node, RfParams, Tree};
pub use logistic::{logistic_gradient, logistic_loss, LogisticModel, LrParams};
pub use metrics::{evaluate, metrics_from_predictions, Metrics};
pub use svm::{default_svm_grid, log_space, rbf_kernel, solve_dual, DualSolution, SvmModel, SvmParams};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("training and evaluation rows must be labeled")]
    UnlabeledRows,
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("feature spec fingerprint {found} does not match the model's {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("logistic regression diverged at learning rate {learning_rate}; try a smaller rate")]
    Diverged { learning_rate: f64 },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("need at least {k} rows for {k}-fold split, got {n}")]
    TooFewRows { n: usize, k: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("every grid point failed to train")]
    AllGridPointsFailed,
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model artifact: {0}")]
    Json(#[from] serde_json::Error),
}

/// Declaration order is the selection tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "RF")]
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lr, ModelKind::Svm, ModelKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Svm => "SVM",
            ModelKind::Rf => "RF",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default settings for every classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Hyperparams {
    pub lr: LrParams,
    pub rf: RfParams,
    pub svm: SvmParams,
}

/// Settings for one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Params {
    #[serde(rename = "LR")]
    Lr(LrParams),
    #[serde(rename = "SVM")]
    Svm(SvmParams),
    #[serde(rename = "RF")]
    Rf(RfParams),
}

impl Params {
    pub fn kind(&self) -> ModelKind {
        match self {
            Params::Lr(_) => ModelKind::Lr,
            Params::Svm(_) => ModelKind::Svm,
            Params::Rf(_) => ModelKind::Rf,
        }
    }

    /// Compact `key=value;...` label used in CV tables.
    pub fn label(&self) -> String {
        match self {
            Params::Lr(p) => format!("lambda={};lr={}", p.l2_lambda, p.learning_rate),
            Params::Svm(p) => format!("C={};sigma={}", p.c, p.sigma),
            Params::Rf(p) => format!("trees={};depth={}", p.n_trees, p.max_depth),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters")]
pub enum Model {
    #[serde(rename = "LR")]
    Lr(LogisticModel),
    #[serde(rename = "SVM")]
    Svm(SvmModel),
    #[serde(rename = "RF")]
    Rf(Forest),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub params: Params,
    pub n_rows: usize,
    pub n_distress: usize,
    pub n_control: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub version: u32,
    pub kind: ModelKind,
    pub model: Model,
    pub spec_fingerprint: String,
    pub feature_names: Vec<String>,
    pub manifest: TrainingManifest,
}

/// Rows, labels (true for Distress) and a canonical row order.
pub(crate) struct TrainingSet<'a> {
    pub rows: Vec<&'a [f64]>,
    pub y: Vec<bool>,
}

impl<'a> TrainingSet<'a> {
    /// Rows sorted by key then values, so training never depends on input order.
    pub fn from_matrix(m: &'a FeatureMatrix) -> Result<Self, ModelError> {
        if m.n_rows() == 0 {
            return Err(ModelError::EmptyMatrix);
        }
        if m.labels().iter().any(|l| !l.is_labeled()) {
            return Err(ModelError::UnlabeledRows);
        }
        let mut order: Vec<usize> = (0..m.n_rows()).collect();
        order.sort_by(|&a, &b| {
            m.row_keys()[a].cmp(&m.row_keys()[b]).then_with(|| {
                m.row(a)
                    .iter()
                    .zip(m.row(b))
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let y: Vec<bool> = order.iter().map(|&i| m.labels()[i] == DistressLabel::Distress).collect();
        if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
            return Err(ModelError::SingleClass);
        }
        Ok(TrainingSet {
            rows: order.iter().map(|&i| m.row(i)).collect(),
            y,
        })
    }
}

/// Trains the classifier described by `params` on every row of `x`.
pub fn train(x: &FeatureMatrix, params: &Params) -> Result<TrainedClassifier, ModelError> {
    let set = TrainingSet::from_matrix(x)?;
    let model = match params {
        Params::Lr(p) => Model::Lr(logistic::fit(&set, p)?),
        Params::Svm(p) => Model::Svm(svm::fit(&set, p, None)?),
        Params::Rf(p) => Model::Rf(forest::fit(&set, p)?),
    };
    Ok(wrap(x, params, model))
}

pub(crate) fn wrap(x: &FeatureMatrix, params: &Params, model: Model) -> TrainedClassifier {
    TrainedClassifier {
        version: ARTIFACT_VERSION,
        kind: params.kind(),
        model,
        spec_fingerprint: x.spec().fingerprint(),
        feature_names: x.spec().names().map(str::to_string).collect(),
        manifest: TrainingManifest {
            params: params.clone(),
            n_rows: x.n_rows(),
            n_distress: x.count_label(DistressLabel::Distress),
            n_control: x.count_label(DistressLabel::Control),
        },
    }
}

pub fn train_lr(x: &FeatureMatrix, hp: &LrParams) -> Result<TrainedClassifier, ModelError> {
    train(x, &Params::Lr(hp.clone()))
}

pub fn train_rf(x: &FeatureMatrix, hp: &RfParams) -> Result<TrainedClassifier, ModelError> {
    train(x, &Params::Rf(hp.clone()))
}

pub fn train_svm_rbf(x: &FeatureMatrix, hp: &SvmParams) -> Result<TrainedClassifier, ModelError> {
    train(x, &Params::Svm(hp.clone()))
}

impl TrainedClassifier {
    fn check(&self, x: &FeatureMatrix) -> Result<(), ModelError> {
        let found = x.spec().fingerprint();
        if found != self.spec_fingerprint {
            return Err(ModelError::FingerprintMismatch {
                expected: self.spec_fingerprint.clone(),
                found,
            });
        }
        Ok(())
    }

    /// True for Distress.
    fn predict_row(&self, row: &[f64]) -> bool {
        match &self.model {
            Model::Lr(m) => m.predict_row(row),
            Model::Svm(m) => m.predict_row(row),
            Model::Rf(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<DistressLabel>, ModelError> {
        self.check(x)?;
        Ok(x.rows()
            .map(|r| if self.predict_row(r) { DistressLabel::Distress } else { DistressLabel::Control })
            .collect())
    }

    /// Distress probability for LR, decision value for SVM, Distress vote share for RF.
    pub fn scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.check(x)?;
        Ok(x.rows()
            .map(|r| match &self.model {
                Model::Lr(m) => m.probability(r),
                Model::Svm(m) => m.decision(r),
                Model::Rf(m) => m.distress_share(r),
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        TrainedClassifier::from_json(&text)
    }
}
