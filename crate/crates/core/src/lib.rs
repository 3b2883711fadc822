//! Inductive transfer learning for detecting psychological-distress signals
//! in short social-media posts, with domain adaptation between a labeled
//! source corpus and a mostly unlabeled target corpus, and a standardized
//! daily distress index computed from the predicted labels.
//!
//! The stages, in pipeline order:
//!
//! * [`corpus`]: ingest, anonymize, filter and aggregate posts into daily documents
//! * [`textprep`]: cleaning, tokenization, stopwords, Porter stemming
//! * [`features`]: lexicon percentages, unigrams, metadata; feature selection; scaling
//! * [`domainadapt`]: KS diagnostics, class-ratio resampling, user-feature removal, mean matching
//! * [`models`]: logistic regression, random forest, RBF SVM, cross-validation, grid search
//! * [`transfer`]: orchestration of the whole train-on-source, select-on-target run
//! * [`index`]: the daily distress index and its CSV/SVG outputs
//!
//! [`synth`] generates synthetic source/target data for demos and experiments.

pub mod corpus;
pub mod domainadapt;
pub mod features;
pub mod index;
pub mod models;
pub mod seed;
pub mod synth;
pub mod textprep;
pub mod transfer;

pub use corpus::DistressLabel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
