//! Source/target mismatch diagnostics and the adaptation sequence:
//! class-ratio resampling, user-feature removal, scaling, mean shift.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DistressLabel;
use crate::features::{apply_scaling, fit_scaling, FeatureError, FeatureMatrix, FeatureSpec, ScalingParams};

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("KS test needs two nonempty samples")]
    EmptySample,
    #[error("class {0} absent from source")]
    MissingClass(DistressLabel),
    #[error("invalid class ratio {0:?}; expected \"distress:control\" with positive parts")]
    InvalidRatio(String),
    #[error("no features left after removing user-level features")]
    EmptySpec,
    #[error("source and target feature specs differ")]
    SpecMismatch,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub feature: String,
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(feature: &str, a: &[f64], b: &[f64]) -> Result<KsResult, AdaptError> {
    let d = ks_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let lambda = (na * nb / (na + nb)).sqrt() * d;
    Ok(KsResult {
        feature: feature.to_string(),
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `max |ECDF_a - ECDF_b|`, evaluated after each run of tied pooled values.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, AdaptError> {
    if a.is_empty() || b.is_empty() {
        return Err(AdaptError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Kolmogorov survival function, 100-term alternating series, clamped to (0, 1].
pub fn kolmogorov_q(lambda: f64) -> f64 {
    // The series converges poorly near 0, where Q is 1 to double precision anyway.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(f64::MIN_POSITIVE, 1.0)
}

/// KS results per column of two matrices sharing a spec, in parallel.
pub fn ks_per_feature(source: &FeatureMatrix, target: &FeatureMatrix) -> Result<Vec<KsResult>, AdaptError> {
    if source.spec() != target.spec() {
        return Err(AdaptError::SpecMismatch);
    }
    let names: Vec<&str> = source.spec().names().collect();
    (0..source.n_cols())
        .into_par_iter()
        .map(|j| ks_two_sample(names[j], &source.column(j), &target.column(j)))
        .collect()
}

/// Distress:Control proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRatio {
    pub distress: f64,
    pub control: f64,
}

impl ClassRatio {
    pub fn new(distress: f64, control: f64) -> Result<Self, AdaptError> {
        if !(distress > 0.0 && control > 0.0 && distress.is_finite() && control.is_finite()) {
            return Err(AdaptError::InvalidRatio(format!("{distress}:{control}")));
        }
        Ok(ClassRatio { distress, control })
    }

    /// Ratio of the labeled rows in `labels`.
    pub fn from_labels(labels: &[DistressLabel]) -> Result<Self, AdaptError> {
        let d = labels.iter().filter(|&&l| l == DistressLabel::Distress).count();
        let c = labels.iter().filter(|&&l| l == DistressLabel::Control).count();
        if d == 0 {
            return Err(AdaptError::MissingClass(DistressLabel::Distress));
        }
        if c == 0 {
            return Err(AdaptError::MissingClass(DistressLabel::Control));
        }
        ClassRatio::new(d as f64, c as f64)
    }

    pub fn value(&self) -> f64 {
        self.distress / self.control
    }
}

impl FromStr for ClassRatio {
    type Err = AdaptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AdaptError::InvalidRatio(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        ClassRatio::new(a, b).map_err(|_| bad())
    }
}

impl fmt::Display for ClassRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.distress, self.control)
    }
}

/// Downsamples the over-represented class, without replacement, so the
/// Distress:Control ratio matches `target` to the nearest row. Kept rows
/// retain their original order. Unlabeled rows are dropped.
pub fn resample_class_ratio(matrix: &FeatureMatrix, target: ClassRatio, seed: u64) -> Result<FeatureMatrix, AdaptError> {
    let idx = resample_indices(matrix.labels(), target, seed)?;
    Ok(matrix.select_rows(&idx))
}

/// Row indices kept by [`resample_class_ratio`], ascending.
pub fn resample_indices(labels: &[DistressLabel], target: ClassRatio, seed: u64) -> Result<Vec<usize>, AdaptError> {
    let of = |l: DistressLabel| (0..labels.len()).filter(|&i| labels[i] == l).collect::<Vec<_>>();
    let distress = of(DistressLabel::Distress);
    let control = of(DistressLabel::Control);
    if distress.is_empty() {
        return Err(AdaptError::MissingClass(DistressLabel::Distress));
    }
    if control.is_empty() {
        return Err(AdaptError::MissingClass(DistressLabel::Control));
    }
    let r = target.value();
    let (nd, nc) = (distress.len() as f64, control.len() as f64);
    let keep_d = ((nc * r).round() as usize).clamp(1, distress.len());
    let keep_c = ((nd / r).round() as usize).clamp(1, control.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |class: &[usize], k: usize| -> Vec<usize> {
        if k >= class.len() {
            return class.to_vec();
        }
        sample(&mut rng, class.len(), k).into_iter().map(|i| class[i]).collect()
    };
    let mut kept = if nd / nc > r {
        let mut v = pick(&distress, keep_d);
        v.extend(control);
        v
    } else {
        let mut v = pick(&control, keep_c);
        v.extend(distress);
        v
    };
    kept.sort_unstable();
    Ok(kept)
}

/// Removes Engagement and EgoNetwork features.
pub fn drop_user_features(spec: &FeatureSpec) -> Result<FeatureSpec, AdaptError> {
    let out = spec.retain(|f| !f.kind.is_user_level());
    if out.is_empty() {
        return Err(AdaptError::EmptySpec);
    }
    Ok(out)
}

/// `μ_target - μ_source` per column.
pub fn mean_shifts(source: &FeatureMatrix, target: &FeatureMatrix) -> Result<Vec<f64>, AdaptError> {
    if source.spec() != target.spec() {
        return Err(AdaptError::SpecMismatch);
    }
    if source.n_rows() == 0 || target.n_rows() == 0 {
        return Err(FeatureError::EmptyMatrix.into());
    }
    Ok((0..source.n_cols()).map(|j| target.column_mean(j) - source.column_mean(j)).collect())
}

/// Shifts each source column so its mean equals the target's.
pub fn mean_match(source: &FeatureMatrix, target: &FeatureMatrix) -> Result<FeatureMatrix, AdaptError> {
    let shifts = mean_shifts(source, target)?;
    Ok(source.map_values(|j, v| v + shifts[j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShift {
    pub feature: String,
    pub ks_before: f64,
    pub p_before: f64,
    pub ks_after: f64,
    pub p_after: f64,
    pub mean_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub method: String,
    pub target_ratio: ClassRatio,
    /// (distress, control) rows before and after resampling.
    pub source_counts_before: (usize, usize),
    pub source_counts_after: (usize, usize),
    pub dropped_features: Vec<String>,
    /// KS is computed on raw values before and adapted values after. Scaling
    /// applies the same increasing map to both sides, so it never changes D.
    pub features: Vec<FeatureShift>,
}

impl AdaptationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), AdaptError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "ks_before", "p_before", "ks_after", "p_after", "mean_shift"])?;
        for f in &self.features {
            out.write_record([
                f.feature.clone(),
                f.ks_before.to_string(),
                f.p_before.to_string(),
                f.ks_after.to_string(),
                f.p_after.to_string(),
                f.mean_shift.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Summary without the per-feature table.
    pub fn summary_json(&self) -> serde_json::Value {
        let significant = |p: fn(&FeatureShift) -> f64| self.features.iter().filter(|f| p(f) < 0.001).count();
        serde_json::json!({
            "method": self.method,
            "target_ratio": self.target_ratio.to_string(),
            "source_counts_before": {"distress": self.source_counts_before.0, "control": self.source_counts_before.1},
            "source_counts_after": {"distress": self.source_counts_after.0, "control": self.source_counts_after.1},
            "dropped_features": self.dropped_features,
            "n_features": self.features.len(),
            "significant_before": significant(|f| f.p_before),
            "significant_after": significant(|f| f.p_after),
        })
    }
}

/// Adapted matrices plus what was done to them.
#[derive(Debug, Clone)]
pub struct Adapted {
    pub source: FeatureMatrix,
    pub target: FeatureMatrix,
    pub scaling: ScalingParams,
    pub report: AdaptationReport,
}

/// Replaceable adaptation stage.
pub trait Adapter: Sync {
    fn adapt(&self, source: &FeatureMatrix, target: &FeatureMatrix, ratio: ClassRatio, seed: u64) -> Result<Adapted, AdaptError>;
}

/// Resample, drop user features, scale on source, shift source means to target.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanShiftAdapter;

fn counts(m: &FeatureMatrix) -> (usize, usize) {
    (m.count_label(DistressLabel::Distress), m.count_label(DistressLabel::Control))
}

impl Adapter for MeanShiftAdapter {
    fn adapt(&self, source: &FeatureMatrix, target: &FeatureMatrix, ratio: ClassRatio, seed: u64) -> Result<Adapted, AdaptError> {
        if source.spec() != target.spec() {
            return Err(AdaptError::SpecMismatch);
        }
        let resampled = resample_class_ratio(source, ratio, seed)?;
        let spec = drop_user_features(source.spec())?;
        let dropped = source
            .spec()
            .names()
            .filter(|n| spec.index_of(n).is_none())
            .map(str::to_string)
            .collect();
        let raw_s = resampled.select_spec(&spec)?;
        let raw_t = target.select_spec(&spec)?;
        let before = ks_per_feature(&raw_s, &raw_t)?;

        let scaling = fit_scaling(&raw_s)?;
        let scaled_s = apply_scaling(&raw_s, &scaling)?;
        let scaled_t = apply_scaling(&raw_t, &scaling)?;
        let shifts = mean_shifts(&scaled_s, &scaled_t)?;
        let adapted_s = scaled_s.map_values(|j, v| v + shifts[j]);
        let after = ks_per_feature(&adapted_s, &scaled_t)?;

        let features = before
            .into_iter()
            .zip(after)
            .zip(&shifts)
            .map(|((b, a), &s)| FeatureShift {
                feature: b.feature,
                ks_before: b.statistic,
                p_before: b.p_value,
                ks_after: a.statistic,
                p_after: a.p_value,
                mean_shift: s,
            })
            .collect();
        let report = AdaptationReport {
            method: "additive per-feature mean shift after source-fitted scaling".into(),
            target_ratio: ratio,
            source_counts_before: counts(source),
            source_counts_after: counts(&resampled),
            dropped_features: dropped,
            features,
        };
        Ok(Adapted {
            source: adapted_s,
            target: scaled_t,
            scaling,
            report,
        })
    }
}
