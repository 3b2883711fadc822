use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domainadapt::ClassRatio;
use crate::models::{log_space, LrParams, Params, RfParams, SvmParams};
use crate::seed;

use super::TransferError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// Posts with inline labels, or unlabeled posts plus `source_labels`.
    pub source_posts: PathBuf,
    pub target_posts: PathBuf,
    #[serde(default)]
    pub source_labels: Option<PathBuf>,
    /// Labels for the hand-labeled target users.
    #[serde(default)]
    pub target_labels: Option<PathBuf>,
    /// Bundled demo lexicon when absent.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// Bundled English list when absent.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    /// `date,label` CSV of events drawn on the index plot.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
}

impl DataPaths {
    /// Resolves relative paths against `base`.
    pub fn resolved(&self, base: &Path) -> DataPaths {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        DataPaths {
            source_posts: r(&self.source_posts),
            target_posts: r(&self.target_posts),
            source_labels: self.source_labels.as_ref().map(r),
            target_labels: self.target_labels.as_ref().map(r),
            lexicon: self.lexicon.as_ref().map(r),
            stopwords: self.stopwords.as_ref().map(r),
            annotations: self.annotations.as_ref().map(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub language: String,
    pub source_min_posts: usize,
    pub target_min_posts: usize,
    /// Hash user ids with this salt right after ingest.
    pub salt: Option<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            language: "en".into(),
            source_min_posts: 25,
            target_min_posts: 0,
            salt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub coverage: f64,
    pub r2_threshold: f64,
    /// Shifts clock time for the night index only; days stay UTC.
    pub utc_offset_minutes: i32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            coverage: 0.99,
            r2_threshold: 0.75,
            utc_offset_minutes: 0,
        }
    }
}

/// `auto` estimates the ratio from the labeled target sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioSetting {
    Auto,
    Fixed(ClassRatio),
}

impl Serialize for RatioSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RatioSetting::Auto => s.serialize_str("auto"),
            RatioSetting::Fixed(r) => s.serialize_str(&r.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for RatioSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            return Ok(RatioSetting::Auto);
        }
        s.parse().map(RatioSetting::Fixed).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub weighted: bool,
    pub target_ratio: RatioSetting,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            weighted: true,
            target_ratio: RatioSetting::Auto,
        }
    }
}

/// Grid axes per classifier. An empty axis skips that classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lr_lambda: Vec<f64>,
    pub lr_learning_rate: f64,
    pub lr_max_iters: usize,
    pub lr_tolerance: f64,
    pub rf_max_depth: Vec<usize>,
    pub rf_n_trees: usize,
    pub rf_min_leaf: usize,
    pub rf_features_per_split: Option<usize>,
    pub svm_c: Vec<f64>,
    pub svm_sigma: Vec<f64>,
    pub svm_tolerance: f64,
    pub svm_max_passes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let lr = LrParams::default();
        let rf = RfParams::default();
        let svm = SvmParams::default();
        GridConfig {
            lr_lambda: vec![1e-3, 1e-2, 1e-1],
            lr_learning_rate: lr.learning_rate,
            lr_max_iters: lr.max_iters,
            lr_tolerance: lr.tolerance,
            rf_max_depth: vec![6, 12],
            rf_n_trees: rf.n_trees,
            rf_min_leaf: rf.min_leaf,
            rf_features_per_split: rf.features_per_split,
            svm_c: log_space(0.25, 64.0, 8),
            svm_sigma: log_space(0.001, 0.5, 8),
            svm_tolerance: svm.smo_tolerance,
            svm_max_passes: svm.max_passes,
        }
    }
}

/// Expanded grid points, one list per classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub lr: Vec<Params>,
    pub svm: Vec<Params>,
    pub rf: Vec<Params>,
}

impl GridConfig {
    pub fn expand(&self, master_seed: u64) -> Grids {
        let lr = self
            .lr_lambda
            .iter()
            .map(|&l2_lambda| {
                Params::Lr(LrParams {
                    learning_rate: self.lr_learning_rate,
                    l2_lambda,
                    max_iters: self.lr_max_iters,
                    tolerance: self.lr_tolerance,
                })
            })
            .collect();
        let mut svm = Vec::new();
        for &c in &self.svm_c {
            for &sigma in &self.svm_sigma {
                svm.push(Params::Svm(SvmParams {
                    c,
                    sigma,
                    smo_tolerance: self.svm_tolerance,
                    max_passes: self.svm_max_passes,
                }));
            }
        }
        let rf = self
            .rf_max_depth
            .iter()
            .map(|&max_depth| {
                Params::Rf(RfParams {
                    n_trees: self.rf_n_trees,
                    max_depth,
                    features_per_split: self.rf_features_per_split,
                    min_leaf: self.rf_min_leaf,
                    seed: seed::derive(master_seed, "forest"),
                })
            })
            .collect();
        Grids { lr, svm, rf }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub k_folds: usize,
    pub test_fraction: f64,
    /// Smallest accepted labeled target sample, in rows.
    pub min_labeled_target: usize,
    pub grid: GridConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k_folds: 5,
            test_fraction: 0.2,
            min_labeled_target: 30,
            grid: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataPaths,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub adapt: AdaptConfig,
    #[serde(default)]
    pub models: ModelConfig,
}

/// Matrix-level settings shared by [`super::run_on_matrices`] callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSettings {
    pub weighted: bool,
    pub target_ratio: RatioSetting,
    pub grids: Grids,
    pub k_folds: usize,
    pub test_fraction: f64,
    pub min_labeled_target: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), TransferError> {
        let bad = |m: String| Err(TransferError::Config(m));
        if !(self.features.coverage > 0.0 && self.features.coverage <= 1.0) {
            return bad(format!("features.coverage {} outside (0, 1]", self.features.coverage));
        }
        if !(self.features.r2_threshold > 0.0 && self.features.r2_threshold <= 1.0) {
            return bad(format!("features.r2_threshold {} outside (0, 1]", self.features.r2_threshold));
        }
        if self.models.k_folds < 2 {
            return bad("models.k_folds must be at least 2".into());
        }
        if !(self.models.test_fraction > 0.0 && self.models.test_fraction < 1.0) {
            return bad(format!("models.test_fraction {} outside (0, 1)", self.models.test_fraction));
        }
        let g = &self.models.grid;
        if g.lr_lambda.is_empty() && g.rf_max_depth.is_empty() && (g.svm_c.is_empty() || g.svm_sigma.is_empty()) {
            return bad("every grid is empty".into());
        }
        Ok(())
    }

    pub fn settings(&self) -> TransferSettings {
        TransferSettings {
            weighted: self.adapt.weighted,
            target_ratio: self.adapt.target_ratio,
            grids: self.models.grid.expand(self.seed),
            k_folds: self.models.k_folds,
            test_fraction: self.models.test_fraction,
            min_labeled_target: self.models.min_labeled_target,
            seed: self.seed,
        }
    }
}

impl TransferSettings {
    /// Defaults with the full grids.
    pub fn new(weighted: bool, seed: u64) -> Self {
        TransferSettings {
            weighted,
            target_ratio: RatioSetting::Auto,
            grids: GridConfig::default().expand(seed),
            k_folds: 5,
            test_fraction: 0.2,
            min_labeled_target: 30,
            seed,
        }
    }
}
