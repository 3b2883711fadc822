use serde::{Deserialize, Serialize};

use super::{DataPaths, PipelineConfig, TransferError};
use crate::corpus::{
    aggregate_daily, anonymize, filter_corpus, ingest_posts, ingest_posts_with_labels, Corpus, CorpusRole, DailyDocument,
    IngestReport, LanguageFilter,
};
use crate::features::{
    build_unigram_vocab, correlation_prune, drop_meta, extract_features, intersect_features, present_spec, process_documents,
    FeatureMatrix, Lexicon, PruneReport,
};
use crate::textprep::{Pipeline, StopwordList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub ingest: IngestReport,
    pub posts_after_filter: usize,
    pub users_after_filter: usize,
    pub labeled_users: usize,
    pub daily_documents: usize,
}

/// Counts at each feature-selection step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub source: CorpusSummary,
    pub target: CorpusSummary,
    pub vocabulary_size: usize,
    pub vocabulary_coverage: f64,
    pub source_present: usize,
    pub target_present: usize,
    pub common: usize,
    pub after_meta: usize,
    pub prune: PruneReport,
    pub final_features: usize,
}

/// Raw matrices on the common, pruned feature spec.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub source: FeatureMatrix,
    pub target: FeatureMatrix,
    pub target_documents: Vec<DailyDocument>,
    pub report: FeatureReport,
}

fn load_corpus(
    posts: &std::path::Path,
    labels: Option<&std::path::Path>,
    role: CorpusRole,
) -> Result<(Corpus, IngestReport), TransferError> {
    Ok(match labels {
        Some(l) => ingest_posts_with_labels(posts, role, l)?,
        None => ingest_posts(posts, role)?,
    })
}

fn summarize(ingest: IngestReport, corpus: &Corpus, docs: &[DailyDocument]) -> CorpusSummary {
    CorpusSummary {
        ingest,
        posts_after_filter: corpus.posts.len(),
        users_after_filter: corpus.user_count(),
        labeled_users: corpus.labels.len(),
        daily_documents: docs.len(),
    }
}

/// Ingest, filter, aggregate and featurize both corpora, then keep the
/// common non-metadata features that survive correlation pruning on source.
pub fn prepare_features(config: &PipelineConfig) -> Result<PreparedData, TransferError> {
    let paths: &DataPaths = &config.data;
    let stopwords = match &paths.stopwords {
        Some(p) => StopwordList::from_file(p)?,
        None => StopwordList::bundled(),
    };
    let lexicon = match &paths.lexicon {
        Some(p) => Lexicon::from_file(p)?,
        None => Lexicon::demo(),
    };
    let pipeline = Pipeline::new(stopwords);
    let language = LanguageFilter(config.filter.language.clone());

    let (mut source, source_ingest) = load_corpus(&paths.source_posts, paths.source_labels.as_deref(), CorpusRole::Source)?;
    let (mut target, target_ingest) = load_corpus(&paths.target_posts, paths.target_labels.as_deref(), CorpusRole::Target)?;
    if let Some(salt) = &config.filter.salt {
        source = anonymize(&source, salt.as_bytes())?;
        target = anonymize(&target, salt.as_bytes())?;
    }
    let source = filter_corpus(&source, config.filter.source_min_posts, &language);
    let target = filter_corpus(&target, config.filter.target_min_posts, &language);
    let offset = config.features.utc_offset_minutes;
    let source_docs = aggregate_daily(&source, offset)?;
    let target_docs = aggregate_daily(&target, offset)?;

    let source_texts = process_documents(&source_docs, &pipeline);
    let target_texts = process_documents(&target_docs, &pipeline);
    let vocab = build_unigram_vocab(
        source_docs.iter().zip(&source_texts).map(|(d, t)| (d.label, &t.content_stems)),
        config.features.coverage,
    )?;
    let source_m = extract_features(&source_docs, &source_texts, &lexicon, &vocab.stems);
    let target_m = extract_features(&target_docs, &target_texts, &lexicon, &vocab.stems);

    let source_present = present_spec(&source_m);
    let target_present = present_spec(&target_m);
    let common = intersect_features(&source_present, &target_present)?;
    let modelled = drop_meta(&common)?;
    let (source_final, prune) = correlation_prune(&source_m.select_spec(&modelled)?, config.features.r2_threshold)?;
    let target_final = target_m.select_spec(source_final.spec())?;

    let report = FeatureReport {
        source: summarize(source_ingest, &source, &source_docs),
        target: summarize(target_ingest, &target, &target_docs),
        vocabulary_size: vocab.stems.len(),
        vocabulary_coverage: vocab.coverage,
        source_present: source_present.len(),
        target_present: target_present.len(),
        common: common.len(),
        after_meta: modelled.len(),
        final_features: source_final.n_cols(),
        prune,
    };
    log::info!(
        "features: vocabulary {} stems, {} common, {} after pruning",
        report.vocabulary_size,
        report.common,
        report.final_features
    );
    Ok(PreparedData {
        source: source_final,
        target: target_final,
        target_documents: target_docs,
        report,
    })
}
