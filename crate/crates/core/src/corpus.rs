//! Post ingestion, anonymization, filtering and per-user daily aggregation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::textprep;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no valid post records ({skipped} lines skipped)")]
    NoRecords { path: String, skipped: usize },
    #[error("user {user_id} is labeled both distress and control")]
    ConflictingLabel { user_id: String },
    #[error("source corpus user {user_id} has no distress/control label")]
    UnlabeledSourceUser { user_id: String },
    #[error("labels file {path}: {message}")]
    LabelsFile { path: String, message: String },
    #[error("anonymization salt must be nonempty")]
    EmptySalt,
    #[error("corpus has no posts")]
    Empty,
}

/// Class of a user or row. Distress is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistressLabel {
    Distress,
    Control,
    #[default]
    Unlabeled,
}

impl DistressLabel {
    pub fn is_labeled(self) -> bool {
        self != DistressLabel::Unlabeled
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistressLabel::Distress => "distress",
            DistressLabel::Control => "control",
            DistressLabel::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for DistressLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistressLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "distress" => Ok(DistressLabel::Distress),
            "control" => Ok(DistressLabel::Control),
            "unlabeled" | "" => Ok(DistressLabel::Unlabeled),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusRole {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub language: String,
    pub is_reply: bool,
    pub is_retweet: bool,
    pub followers: u64,
    pub followees: u64,
    pub total_tweets: u64,
    pub total_favourites: u64,
}

/// One line of the posts file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    post_id: String,
    user_id: String,
    timestamp: String,
    text: String,
    language: String,
    is_reply: bool,
    is_retweet: bool,
    followers: u64,
    followees: u64,
    total_tweets: u64,
    total_favourites: u64,
    #[serde(default)]
    label: Option<DistressLabel>,
}

/// Parses ISO-8601 with an offset, or a naive timestamp taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub role: CorpusRole,
    pub posts: Vec<PostRecord>,
    /// Only Distress/Control entries are stored.
    pub labels: BTreeMap<String, DistressLabel>,
}

impl Corpus {
    pub fn new(role: CorpusRole, posts: Vec<PostRecord>, labels: BTreeMap<String, DistressLabel>) -> Result<Self, CorpusError> {
        let corpus = Corpus { role, posts, labels };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn label_of(&self, user_id: &str) -> DistressLabel {
        self.labels.get(user_id).copied().unwrap_or_default()
    }

    pub fn user_count(&self) -> usize {
        self.posts.iter().map(|p| p.user_id.as_str()).collect::<HashSet<_>>().len()
    }

    /// Merges extra labels, rejecting contradictions.
    pub fn add_labels(&mut self, labels: &BTreeMap<String, DistressLabel>) -> Result<(), CorpusError> {
        for (user, &label) in labels {
            insert_label(&mut self.labels, user, label)?;
        }
        self.validate()
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.role == CorpusRole::Source {
            if let Some(p) = self.posts.iter().find(|p| !self.label_of(&p.user_id).is_labeled()) {
                return Err(CorpusError::UnlabeledSourceUser {
                    user_id: p.user_id.clone(),
                });
            }
        }
        Ok(())
    }
}

fn insert_label(
    labels: &mut BTreeMap<String, DistressLabel>,
    user: &str,
    label: DistressLabel,
) -> Result<(), CorpusError> {
    if !label.is_labeled() {
        return Ok(());
    }
    match labels.get(user) {
        Some(&existing) if existing != label => Err(CorpusError::ConflictingLabel {
            user_id: user.to_string(),
        }),
        _ => {
            labels.insert(user.to_string(), label);
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub accepted: usize,
    /// Malformed lines and duplicate post ids.
    pub skipped: usize,
    pub duplicates: usize,
    /// 1-based line numbers of skipped lines.
    pub skipped_lines: Vec<usize>,
}

/// Reads a line-delimited JSON posts file.
///
/// Lines that fail to parse, miss a mandatory key, carry an unknown key or an
/// unparseable timestamp are skipped and counted. Blank lines are ignored.
pub fn ingest_posts(path: &Path, role: CorpusRole) -> Result<(Corpus, IngestReport), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut report = IngestReport::default();
    let mut posts = Vec::new();
    let mut labels = BTreeMap::new();
    let mut seen = HashSet::new();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let parsed = serde_json::from_str::<RawRecord>(&line)
            .ok()
            .and_then(|r| parse_timestamp(&r.timestamp).map(|ts| (r, ts)));
        let Some((raw, timestamp)) = parsed else {
            report.skipped += 1;
            report.skipped_lines.push(idx + 1);
            continue;
        };
        if raw.post_id.is_empty() || raw.user_id.is_empty() {
            report.skipped += 1;
            report.skipped_lines.push(idx + 1);
            continue;
        }
        if !seen.insert(raw.post_id.clone()) {
            report.skipped += 1;
            report.duplicates += 1;
            report.skipped_lines.push(idx + 1);
            continue;
        }
        if let Some(label) = raw.label {
            insert_label(&mut labels, &raw.user_id, label)?;
        }
        posts.push(PostRecord {
            post_id: raw.post_id,
            user_id: raw.user_id,
            timestamp,
            text: raw.text,
            language: raw.language,
            is_reply: raw.is_reply,
            is_retweet: raw.is_retweet,
            followers: raw.followers,
            followees: raw.followees,
            total_tweets: raw.total_tweets,
            total_favourites: raw.total_favourites,
        });
    }
    report.accepted = posts.len();
    if posts.is_empty() {
        return Err(CorpusError::NoRecords {
            path: path.display().to_string(),
            skipped: report.skipped,
        });
    }
    Ok((Corpus::new(role, posts, labels)?, report))
}

/// Ingests posts and merges a `user_id,label` CSV on top of inline labels.
pub fn ingest_posts_with_labels(
    path: &Path,
    role: CorpusRole,
    labels_csv: &Path,
) -> Result<(Corpus, IngestReport), CorpusError> {
    // Source validation must wait until the CSV labels are merged.
    let (mut corpus, report) = ingest_posts(path, CorpusRole::Target)?;
    corpus.add_labels(&read_labels_csv(labels_csv)?)?;
    corpus.role = role;
    corpus.validate()?;
    Ok((corpus, report))
}

/// Reads a `user_id,label` CSV with a header row.
pub fn read_labels_csv(path: &Path) -> Result<BTreeMap<String, DistressLabel>, CorpusError> {
    let err = |message: String| CorpusError::LabelsFile {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "user_id" || &headers[1] != "label" {
        return Err(err("expected header `user_id,label`".into()));
    }
    let mut labels = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let label: DistressLabel = rec[1].parse().map_err(|e: String| err(format!("row {}: {e}", i + 2)))?;
        insert_label(&mut labels, &rec[0], label)?;
    }
    Ok(labels)
}

/// Hex SHA-256 of `salt || id`.
pub fn salted_digest(id: &str, salt: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(id.as_bytes());
    hex::encode(h.finalize())
}

/// Replaces every user and post id with its salted digest.
pub fn anonymize(corpus: &Corpus, salt: &[u8]) -> Result<Corpus, CorpusError> {
    if salt.is_empty() {
        return Err(CorpusError::EmptySalt);
    }
    let posts = corpus
        .posts
        .iter()
        .map(|p| PostRecord {
            post_id: salted_digest(&p.post_id, salt),
            user_id: salted_digest(&p.user_id, salt),
            ..p.clone()
        })
        .collect();
    let labels = corpus
        .labels
        .iter()
        .map(|(u, &l)| (salted_digest(u, salt), l))
        .collect();
    Ok(Corpus {
        role: corpus.role,
        posts,
        labels,
    })
}

/// Which posts pass the language filter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageFilter(pub String);

impl LanguageFilter {
    pub fn any() -> Self {
        LanguageFilter("*".into())
    }

    /// `*` matches every tag; otherwise the primary subtags must agree
    /// case-insensitively, so `en` accepts `en-GB`.
    pub fn matches(&self, tag: &str) -> bool {
        if self.0 == "*" {
            return true;
        }
        let primary = |t: &str| t.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
        primary(&self.0) == primary(tag)
    }
}

/// Keeps posts in the wanted language from users with at least
/// `min_posts_per_user` such posts. Order is preserved.
pub fn filter_corpus(corpus: &Corpus, min_posts_per_user: usize, language: &LanguageFilter) -> Corpus {
    let in_language: Vec<&PostRecord> = corpus.posts.iter().filter(|p| language.matches(&p.language)).collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &in_language {
        *counts.entry(p.user_id.as_str()).or_default() += 1;
    }
    let posts: Vec<PostRecord> = in_language
        .into_iter()
        .filter(|p| counts[p.user_id.as_str()] >= min_posts_per_user)
        .cloned()
        .collect();
    let kept: HashSet<&str> = posts.iter().map(|p| p.user_id.as_str()).collect();
    let labels = corpus
        .labels
        .iter()
        .filter(|(u, _)| kept.contains(u.as_str()))
        .map(|(u, &l)| (u.clone(), l))
        .collect();
    Corpus {
        role: corpus.role,
        posts,
        labels,
    }
}

/// 1 for clock times in 21:00:00..=05:59:59, else -1.
pub fn night_index(timestamp: DateTime<Utc>) -> i8 {
    night_index_with_offset(timestamp, 0)
}

/// Night index on a clock shifted by a fixed offset from UTC.
pub fn night_index_with_offset(timestamp: DateTime<Utc>, utc_offset_minutes: i32) -> i8 {
    let local = timestamp + chrono::Duration::minutes(utc_offset_minutes as i64);
    let hour = local.hour();
    if !(6..21).contains(&hour) {
        1
    } else {
        -1
    }
}

/// A user's posts for one UTC calendar day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyDocument {
    pub user_id: String,
    pub date: NaiveDate,
    pub text: String,
    pub post_count: usize,
    pub reply_proportion: f64,
    pub retweet_proportion: f64,
    pub mean_night_index: f64,
    pub mean_followers: f64,
    pub mean_followees: f64,
    pub mean_total_tweets: f64,
    pub mean_total_favourites: f64,
    pub label: DistressLabel,
}

/// Groups posts by (user, UTC date); output is sorted by user then date.
///
/// Texts are cleaned and joined in timestamp order. Retweets are kept.
pub fn aggregate_daily(corpus: &Corpus, utc_offset_minutes: i32) -> Result<Vec<DailyDocument>, CorpusError> {
    if corpus.posts.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut groups: BTreeMap<(&str, NaiveDate), Vec<&PostRecord>> = BTreeMap::new();
    for p in &corpus.posts {
        groups
            .entry((p.user_id.as_str(), p.timestamp.date_naive()))
            .or_default()
            .push(p);
    }
    let docs = groups
        .into_iter()
        .map(|((user, date), mut posts)| {
            posts.sort_by_key(|p| p.timestamp);
            let n = posts.len() as f64;
            let mean = |f: &dyn Fn(&PostRecord) -> f64| posts.iter().map(|p| f(p)).sum::<f64>() / n;
            let text = posts
                .iter()
                .map(|p| textprep::clean(&p.text))
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            DailyDocument {
                user_id: user.to_string(),
                date,
                text,
                post_count: posts.len(),
                reply_proportion: mean(&|p| p.is_reply as u8 as f64),
                retweet_proportion: mean(&|p| p.is_retweet as u8 as f64),
                mean_night_index: mean(&|p| night_index_with_offset(p.timestamp, utc_offset_minutes) as f64),
                mean_followers: mean(&|p| p.followers as f64),
                mean_followees: mean(&|p| p.followees as f64),
                mean_total_tweets: mean(&|p| p.total_tweets as f64),
                mean_total_favourites: mean(&|p| p.total_favourites as f64),
                label: corpus.label_of(user),
            }
        })
        .collect();
    Ok(docs)
}
