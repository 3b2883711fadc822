//! Synthetic data: feature matrices with controlled domain shift, and
//! ingestible post files for end-to-end runs.

mod matrix;
mod text;

pub use matrix::{generate_matrices, MatrixFixture, SyntheticPair};
pub use text::{generate_text, labels_csv, SynthError, SyntheticCorpus, TextCorpora, TextSynthSpec};
