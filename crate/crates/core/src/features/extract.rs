use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Feature, FeatureError, FeatureKind, FeatureMatrix, FeatureSpec, Lexicon, RowKey};
use crate::corpus::{DailyDocument, DistressLabel};
use crate::textprep::{Pipeline, ProcessedText, TokenList};

pub const UNIGRAM_PREFIX: &str = "uni:";

/// Runs the text pipeline over every document, in parallel, keeping order.
pub fn process_documents(docs: &[DailyDocument], pipeline: &Pipeline) -> Vec<ProcessedText> {
    docs.par_iter().map(|d| pipeline.process(&d.text)).collect()
}

/// Selected unigram stems with the coverage they reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Stems in rank order.
    pub stems: Vec<String>,
    /// Distress documents containing at least one stem of any kind.
    pub eligible_documents: usize,
    pub covered_documents: usize,
    pub coverage: f64,
}

/// Smallest document-frequency-ranked prefix of stems covering at least
/// `coverage` of the Distress documents.
///
/// Stems are ranked by the number of Distress documents they occur in, ties
/// broken lexicographically. Documents without any stem cannot be covered by
/// any vocabulary and are left out of the denominator.
pub fn build_unigram_vocab<'a, I>(docs: I, coverage: f64) -> Result<Vocabulary, FeatureError>
where
    I: IntoIterator<Item = (DistressLabel, &'a TokenList)>,
{
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(FeatureError::InvalidCoverage(coverage));
    }
    let distress: Vec<HashSet<&str>> = docs
        .into_iter()
        .filter(|(l, _)| *l == DistressLabel::Distress)
        .map(|(_, t)| t.iter().collect::<HashSet<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    if distress.is_empty() {
        return Err(FeatureError::NoDistressDocuments);
    }
    let mut postings: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (d, stems) in distress.iter().enumerate() {
        for s in stems {
            postings.entry(s).or_default().push(d);
        }
    }
    let mut ranked: Vec<(&str, Vec<usize>)> = postings.into_iter().collect();
    // BTreeMap order is lexicographic; a stable sort keeps it for equal frequency.
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1.len()));

    let n = distress.len();
    let required = ((coverage * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut covered = vec![false; n];
    let mut count = 0;
    let mut stems = Vec::new();
    for (stem, docs) in ranked {
        if count >= required {
            break;
        }
        stems.push(stem.to_string());
        for d in docs {
            if !covered[d] {
                covered[d] = true;
                count += 1;
            }
        }
    }
    Ok(Vocabulary {
        stems,
        eligible_documents: n,
        covered_documents: count,
        coverage: count as f64 / n as f64,
    })
}

fn base_features(lexicon: &Lexicon) -> Vec<Feature> {
    let mut f = vec![
        Feature::new("meta:user", FeatureKind::Meta),
        Feature::new("meta:date", FeatureKind::Meta),
        Feature::new("lex:wc", FeatureKind::LexiconPct),
        Feature::new("lex:words_per_post", FeatureKind::LexiconPct),
    ];
    f.extend(lexicon.category_names().map(|c| Feature::new(format!("lex:{c}"), FeatureKind::LexiconPct)));
    f.extend([
        Feature::new("time:night_index", FeatureKind::Time),
        Feature::new("eng:post_count", FeatureKind::Engagement),
        Feature::new("eng:reply_prop", FeatureKind::Engagement),
        Feature::new("eng:retweet_prop", FeatureKind::Engagement),
        Feature::new("eng:total_tweets", FeatureKind::Engagement),
        Feature::new("eng:total_favourites", FeatureKind::Engagement),
        Feature::new("ego:followers", FeatureKind::EgoNetwork),
        Feature::new("ego:followees", FeatureKind::EgoNetwork),
    ]);
    f
}

fn days_since_epoch(date: NaiveDate) -> f64 {
    (date - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as f64
}

/// Full feature matrix: metadata, lexicon percentages, time, engagement,
/// ego network, then one count column per vocabulary stem.
pub fn extract_features(
    docs: &[DailyDocument],
    texts: &[ProcessedText],
    lexicon: &Lexicon,
    vocab: &[String],
) -> FeatureMatrix {
    assert_eq!(docs.len(), texts.len(), "one processed text per document");
    let mut features = base_features(lexicon);
    features.extend(vocab.iter().map(|s| Feature::new(format!("{UNIGRAM_PREFIX}{s}"), FeatureKind::Unigram)));
    let spec = FeatureSpec::new(features).expect("vocabulary stems are distinct");

    let users: BTreeMap<&str, usize> = {
        let set: std::collections::BTreeSet<&str> = docs.iter().map(|d| d.user_id.as_str()).collect();
        set.into_iter().enumerate().map(|(i, u)| (u, i)).collect()
    };
    let vocab_index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let rows: Vec<Vec<f64>> = docs
        .par_iter()
        .zip(texts.par_iter())
        .map(|(d, t)| {
            let wc = t.all_stems.len() as f64;
            let mut row = vec![
                users[d.user_id.as_str()] as f64,
                days_since_epoch(d.date),
                wc,
                wc / d.post_count as f64,
            ];
            row.extend(lexicon.percentages(&t.all_stems));
            row.extend([
                d.mean_night_index,
                d.post_count as f64,
                d.reply_proportion,
                d.retweet_proportion,
                d.mean_total_tweets,
                d.mean_total_favourites,
                d.mean_followers,
                d.mean_followees,
            ]);
            let mut counts = vec![0.0; vocab.len()];
            for s in t.content_stems.iter() {
                if let Some(&j) = vocab_index.get(s) {
                    counts[j] += 1.0;
                }
            }
            row.extend(counts);
            row
        })
        .collect();

    let data = rows.into_iter().flatten().collect();
    let labels = docs.iter().map(|d| d.label).collect();
    let keys = docs
        .iter()
        .map(|d| RowKey {
            user_id: d.user_id.clone(),
            date: d.date,
        })
        .collect();
    FeatureMatrix::new(spec, data, labels, keys)
}

/// The features a corpus actually exhibits: every non-unigram feature, plus
/// unigram stems that occur in at least one of its documents.
pub fn present_spec(matrix: &FeatureMatrix) -> FeatureSpec {
    let present: Vec<bool> = (0..matrix.n_cols())
        .map(|j| {
            matrix.spec().features()[j].kind != FeatureKind::Unigram || matrix.rows().any(|r| r[j] != 0.0)
        })
        .collect();
    let mut it = present.into_iter();
    matrix.spec().retain(|_| it.next().unwrap())
}
