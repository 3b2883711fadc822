//! End-to-end inductive transfer: adapt, train on source, select on the
//! labeled target sample, predict every target row.

mod config;
mod prepare;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    AdaptConfig, DataPaths, FeatureConfig, FilterConfig, GridConfig, Grids, ModelConfig, PipelineConfig, RatioSetting,
    TransferSettings,
};
pub use prepare::{prepare_features, CorpusSummary, FeatureReport, PreparedData};

use crate::corpus::{CorpusError, DistressLabel};
use crate::domainadapt::{AdaptError, AdaptationReport, Adapter, ClassRatio, MeanShiftAdapter};
use crate::features::{apply_scaling, fit_scaling, FeatureError, FeatureMatrix, FeatureSpec, RowKey, ScalingParams};
use crate::models::{evaluate, grid_search, kfold_split, train, train_test_split, CvRow, Fold, Metrics, ModelError, ModelKind, Params, TrainedClassifier};
use crate::seed;
use crate::textprep::TextError;

/// Each variant names the stage that failed.
#[derive(Debug, Error)]
pub enum TransferError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: {0}")]
    Corpus(#[from] CorpusError),
    #[error("text: {0}")]
    Text(#[from] TextError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("adaptation: {0}")]
    Adapt(#[from] AdaptError),
    #[error("training: {0}")]
    Model(#[from] ModelError),
    #[error("transfer: {0}")]
    Precondition(String),
    #[error("transfer: no candidate classifiers")]
    NoCandidates,
    #[error("transfer: target matrix is empty")]
    EmptyTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Weighted,
    Unweighted,
}

impl Condition {
    pub fn of(weighted: bool) -> Self {
        if weighted {
            Condition::Weighted
        } else {
            Condition::Unweighted
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Weighted => "weighted",
            Condition::Unweighted => "unweighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub kind: ModelKind,
    pub params: Params,
    pub mean_cv_accuracy: f64,
    pub cv: Vec<CvRow>,
    pub source_test: Metrics,
    pub target_sample: Metrics,
    pub model: TrainedClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub key: RowKey,
    pub label: DistressLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRun {
    pub condition: Condition,
    /// Spec the classifiers were trained on.
    pub spec: FeatureSpec,
    pub target_ratio: Option<ClassRatio>,
    pub adaptation: Option<AdaptationReport>,
    pub scaling: ScalingParams,
    /// Indices into the (possibly resampled) source matrix.
    pub source_train: Vec<usize>,
    pub source_test: Vec<usize>,
    /// CV folds, as indices into the same source matrix.
    pub cv_folds: Vec<Fold>,
    /// Target rows with a label, used for selection.
    pub labeled_target: Vec<usize>,
    pub candidates: Vec<CandidateResult>,
    pub selected: ModelKind,
    /// One per target row, in target order.
    pub predictions: Vec<Prediction>,
}

impl TransferRun {
    pub fn selected_candidate(&self) -> &CandidateResult {
        self.candidates.iter().find(|c| c.kind == self.selected).expect("selected candidate present")
    }

    pub fn candidate(&self, kind: ModelKind) -> Option<&CandidateResult> {
        self.candidates.iter().find(|c| c.kind == kind)
    }
}

/// Index of the best candidate: highest sensitivity + specificity, then
/// higher accuracy, then LR before SVM before RF.
pub fn select_best(candidates: &[(ModelKind, Metrics)]) -> Result<usize, TransferError> {
    if candidates.is_empty() {
        return Err(TransferError::NoCandidates);
    }
    let mut best = 0;
    for (i, (kind, m)) in candidates.iter().enumerate().skip(1) {
        let (bk, bm) = &candidates[best];
        let better = m
            .sens_plus_spec()
            .total_cmp(&bm.sens_plus_spec())
            .then(m.accuracy.total_cmp(&bm.accuracy))
            .then(bk.cmp(kind));
        if better.is_gt() {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPredictions {
    pub labels: Vec<DistressLabel>,
    pub n_distress: usize,
    pub n_control: usize,
}

pub fn predict_target(model: &TrainedClassifier, target: &FeatureMatrix) -> Result<TargetPredictions, TransferError> {
    if target.n_rows() == 0 {
        return Err(TransferError::EmptyTarget);
    }
    let labels = model.predict(target)?;
    let n_distress = labels.iter().filter(|&&l| l == DistressLabel::Distress).count();
    Ok(TargetPredictions {
        n_control: labels.len() - n_distress,
        n_distress,
        labels,
    })
}

/// Runs the transfer stages on raw matrices that already share a spec.
///
/// Weighted: `adapter` resamples, drops user features, scales and shifts.
/// Unweighted: source-fitted scaling only; `adapter` is never called.
pub fn run_on_matrices(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    settings: &TransferSettings,
    adapter: &dyn Adapter,
) -> Result<TransferRun, TransferError> {
    if source.spec() != target.spec() {
        return Err(FeatureError::SpecMismatch.into());
    }
    if target.n_rows() == 0 {
        return Err(TransferError::EmptyTarget);
    }
    let labeled_target = target.labeled_indices();
    let k = labeled_target.len();
    if k < settings.min_labeled_target {
        return Err(TransferError::Precondition(format!(
            "labeled target sample has {k} rows, need at least {}",
            settings.min_labeled_target
        )));
    }
    if k >= target.n_rows() {
        return Err(TransferError::Precondition(format!(
            "labeled target sample ({k} rows) must be smaller than the target ({} rows)",
            target.n_rows()
        )));
    }

    let (src, tgt, scaling, adaptation, ratio) = if settings.weighted {
        let ratio = match settings.target_ratio {
            RatioSetting::Fixed(r) => r,
            RatioSetting::Auto => ClassRatio::from_labels(target.select_rows(&labeled_target).labels())?,
        };
        let a = adapter.adapt(source, target, ratio, seed::derive(settings.seed, "resample"))?;
        (a.source, a.target, a.scaling, Some(a.report), Some(ratio))
    } else {
        let scaling = fit_scaling(source)?;
        (apply_scaling(source, &scaling)?, apply_scaling(target, &scaling)?, scaling, None, None)
    };

    let (train_idx, test_idx) = train_test_split(src.labels(), settings.test_fraction, seed::derive(settings.seed, "split"))?;
    let train_m = src.select_rows(&train_idx);
    let test_m = src.select_rows(&test_idx);
    let sample_m = tgt.select_rows(&labeled_target);
    let fold_seed = seed::derive(settings.seed, "folds");
    let cv_folds = kfold_split(train_m.labels(), settings.k_folds, fold_seed)?
        .into_iter()
        .map(|f| Fold {
            train: f.train.iter().map(|&i| train_idx[i]).collect(),
            test: f.test.iter().map(|&i| train_idx[i]).collect(),
        })
        .collect();

    let mut candidates = Vec::new();
    for (kind, grid) in [
        (ModelKind::Lr, &settings.grids.lr),
        (ModelKind::Svm, &settings.grids.svm),
        (ModelKind::Rf, &settings.grids.rf),
    ] {
        if grid.is_empty() {
            continue;
        }
        let gs = grid_search(&train_m, grid, settings.k_folds, fold_seed)?;
        let model = train(&train_m, &gs.best)?;
        let source_test = evaluate(&model, &test_m)?;
        let target_sample = evaluate(&model, &sample_m)?;
        log::info!(
            "{kind}: {} cv={:.3} source acc={:.3} target acc={:.3} sens={:.3} spec={:.3}",
            gs.best.label(),
            gs.mean_accuracy[gs.best_index].unwrap_or(0.0),
            source_test.accuracy,
            target_sample.accuracy,
            target_sample.sensitivity,
            target_sample.specificity
        );
        candidates.push(CandidateResult {
            kind,
            params: gs.best.clone(),
            mean_cv_accuracy: gs.mean_accuracy[gs.best_index].unwrap_or(0.0),
            cv: gs.rows,
            source_test,
            target_sample,
            model,
        });
    }
    let scored: Vec<(ModelKind, Metrics)> = candidates.iter().map(|c| (c.kind, c.target_sample)).collect();
    let best = select_best(&scored)?;
    let predicted = predict_target(&candidates[best].model, &tgt)?;
    let predictions = tgt
        .row_keys()
        .iter()
        .zip(predicted.labels)
        .map(|(key, label)| Prediction { key: key.clone(), label })
        .collect();
    Ok(TransferRun {
        condition: Condition::of(settings.weighted),
        spec: src.spec().clone(),
        target_ratio: ratio,
        adaptation,
        scaling,
        source_train: train_idx,
        source_test: test_idx,
        cv_folds,
        labeled_target,
        selected: candidates[best].kind,
        candidates,
        predictions,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub features: FeatureReport,
    pub run: TransferRun,
}

/// Ingest through prediction with the mean-shift adapter.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, TransferError> {
    run_pipeline_with(config, &MeanShiftAdapter)
}

pub fn run_pipeline_with(config: &PipelineConfig, adapter: &dyn Adapter) -> Result<PipelineOutput, TransferError> {
    config.validate()?;
    let data = prepare_features(config)?;
    let run = run_on_matrices(&data.source, &data.target, &config.settings(), adapter)?;
    Ok(PipelineOutput {
        features: data.report,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(sens: f64, spec: f64, acc: f64) -> Metrics {
        Metrics {
            accuracy: acc,
            sensitivity: sens,
            specificity: spec,
            ..Metrics::from_counts(0, 0, 0, 0)
        }
    }

    #[test]
    fn reported_triples_select_lr() {
        let c = vec![
            (ModelKind::Lr, m(0.41, 0.73, 0.62)),
            (ModelKind::Svm, m(0.0, 1.0, 0.66)),
            (ModelKind::Rf, m(0.10, 0.63, 0.45)),
        ];
        assert_eq!(select_best(&c).unwrap(), 0);
    }

    #[test]
    fn ties_and_edge_cases() {
        assert!(matches!(select_best(&[]), Err(TransferError::NoCandidates)));
        assert_eq!(select_best(&[(ModelKind::Rf, m(0.1, 0.1, 0.1))]).unwrap(), 0);
        let tie = vec![(ModelKind::Rf, m(0.5, 0.5, 0.7)), (ModelKind::Lr, m(0.5, 0.5, 0.7))];
        assert_eq!(select_best(&tie).unwrap(), 1);
        let acc = vec![(ModelKind::Lr, m(0.5, 0.5, 0.6)), (ModelKind::Rf, m(0.5, 0.5, 0.7))];
        assert_eq!(select_best(&acc).unwrap(), 1);
    }

    #[test]
    fn ratio_setting_parses() {
        #[derive(Deserialize)]
        struct W {
            r: RatioSetting,
        }
        let w: W = serde_json::from_str(r#"{"r":"auto"}"#).unwrap();
        assert_eq!(w.r, RatioSetting::Auto);
        let w: W = serde_json::from_str(r#"{"r":"1:3"}"#).unwrap();
        assert!(matches!(w.r, RatioSetting::Fixed(r) if r.value() == 1.0 / 3.0));
        assert!(serde_json::from_str::<W>(r#"{"r":"x"}"#).is_err());
    }
}
