use serde::{Deserialize, Serialize};

use super::{ModelError, TrainedClassifier};
use crate::corpus::DistressLabel;
use crate::features::FeatureMatrix;

/// Confusion counts with Distress as the positive class. A ratio with a
/// zero denominator is reported as 0 and flagged undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy_defined: bool,
    pub sensitivity_defined: bool,
    pub specificity_defined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (accuracy, accuracy_defined) = ratio(tp + tn, tp + tn + fp + fn_);
        let (sensitivity, sensitivity_defined) = ratio(tp, tp + fn_);
        let (specificity, specificity_defined) = ratio(tn, tn + fp);
        Metrics {
            accuracy,
            sensitivity,
            specificity,
            tp,
            fp,
            tn,
            fn_,
            accuracy_defined,
            sensitivity_defined,
            specificity_defined,
        }
    }

    /// Selection criterion.
    pub fn sens_plus_spec(&self) -> f64 {
        self.sensitivity + self.specificity
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predictions must be labeled; truth must be labeled.
pub fn metrics_from_predictions(truth: &[DistressLabel], predicted: &[DistressLabel]) -> Result<Metrics, ModelError> {
    assert_eq!(truth.len(), predicted.len());
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (t, p) in truth.iter().zip(predicted) {
        match (t, p) {
            (DistressLabel::Distress, DistressLabel::Distress) => tp += 1,
            (DistressLabel::Distress, DistressLabel::Control) => fn_ += 1,
            (DistressLabel::Control, DistressLabel::Control) => tn += 1,
            (DistressLabel::Control, DistressLabel::Distress) => fp += 1,
            _ => return Err(ModelError::UnlabeledRows),
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

pub fn evaluate(model: &TrainedClassifier, x: &FeatureMatrix) -> Result<Metrics, ModelError> {
    let predicted = model.predict(x)?;
    metrics_from_predictions(x.labels(), &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use DistressLabel::*;

    #[test]
    fn hand_computed() {
        let m = Metrics::from_counts(3, 1, 4, 2);
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (0.7, 0.6, 0.8));
    }

    #[test]
    fn perfect_and_all_control() {
        let truth = vec![Distress, Control, Distress];
        let m = metrics_from_predictions(&truth, &truth).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (1.0, 1.0, 1.0));

        let mut truth = vec![Distress; 103];
        truth.extend(vec![Control; 197]);
        let m = metrics_from_predictions(&truth, &vec![Control; 300]).unwrap();
        assert_eq!(m.accuracy, 197.0 / 300.0);
        assert!((m.accuracy - 0.657).abs() < 5e-4);
        assert_eq!((m.sensitivity, m.specificity), (0.0, 1.0));
    }

    #[test]
    fn undefined_ratios_flagged() {
        let m = Metrics::from_counts(0, 0, 5, 0);
        assert!(!m.sensitivity_defined && m.sensitivity == 0.0);
        assert!(m.specificity_defined);
        let e = Metrics::from_counts(0, 0, 0, 0);
        assert!(!e.accuracy_defined);
        assert!(metrics_from_predictions(&[Unlabeled], &[Control]).is_err());
    }
}
