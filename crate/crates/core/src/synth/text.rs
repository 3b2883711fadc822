use std::collections::BTreeMap;

use chrono::{Days, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DistressLabel, PostRecord};
use crate::seed;

const DISTRESS_WORDS: &[&str] = &[
    "worried", "anxious", "sad", "depressed", "stressed", "afraid", "upset", "nervous", "hopeless", "tired", "lonely",
    "scared", "panic", "crying", "exhausted", "struggling", "dread", "miserable", "uncertain", "hurt",
];
const POSITIVE_WORDS: &[&str] = &["happy", "love", "great", "good", "fun", "glad", "calm", "proud", "enjoy", "laugh", "thanks", "best"];
const FUNCTION_WORDS: &[&str] = &[
    "i", "the", "a", "and", "to", "of", "my", "is", "it", "in", "that", "we", "so", "but", "about", "for", "this", "was",
    "have", "all", "more", "never", "always", "you", "they", "with", "on", "be",
];
const GENERAL_TOPICS: &[&str] = &[
    "work", "coffee", "weekend", "music", "football", "train", "weather", "dinner", "movie", "family", "school", "holiday",
    "office", "game", "book", "walk", "dog", "city", "garden", "phone", "friends", "birthday", "rain", "bus", "kitchen",
    "concert", "shopping", "beach", "gym", "tea",
];
const POLITICAL_TOPICS: &[&str] = &[
    "brexit", "vote", "deal", "parliament", "minister", "referendum", "europe", "border", "trade", "election", "leave",
    "remain", "customs", "market", "pound", "tariff", "backstop", "government", "negotiation", "union", "extension",
    "campaign", "policy", "economy", "jobs", "withdrawal", "agreement", "debate", "motion", "speaker",
];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
}

/// Post-level generator settings.
///
/// `shift` moves target user metadata by that many log-units and raises the
/// distress-word rate of both classes by `0.05 * shift`. `vocab_overlap` is the
/// share of target topic words taken from the source topic list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextSynthSpec {
    pub source_posts: usize,
    pub target_posts: usize,
    pub source_users: usize,
    pub target_users: usize,
    pub source_distress_share: f64,
    pub target_distress_share: f64,
    /// Target users whose labels are released as the labeled sample.
    pub labeled_target_users: usize,
    pub distress_word_rate: f64,
    pub control_distress_word_rate: f64,
    pub vocab_overlap: f64,
    pub shift: f64,
    pub start_date: NaiveDate,
    pub days: u32,
}

impl Default for TextSynthSpec {
    fn default() -> Self {
        TextSynthSpec {
            source_posts: 1800,
            target_posts: 1200,
            source_users: 60,
            target_users: 200,
            source_distress_share: 0.5,
            target_distress_share: 0.34,
            labeled_target_users: 60,
            distress_word_rate: 0.12,
            control_distress_word_rate: 0.03,
            vocab_overlap: 0.5,
            shift: 1.0,
            start_date: NaiveDate::from_ymd_opt(2019, 3, 1).unwrap(),
            days: 30,
        }
    }
}

impl TextSynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.source_users == 0 || self.target_users == 0 {
            return bad("user counts must be positive");
        }
        if self.source_posts < self.source_users || self.target_posts < self.target_users {
            return bad("every user needs at least one post");
        }
        for (name, v) in [("source_distress_share", self.source_distress_share), ("target_distress_share", self.target_distress_share)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(&format!("{name} must lie in (0, 1)"));
            }
        }
        for (name, v) in [
            ("distress_word_rate", self.distress_word_rate),
            ("control_distress_word_rate", self.control_distress_word_rate),
            ("vocab_overlap", self.vocab_overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return bad("shift must be finite and nonnegative");
        }
        if self.labeled_target_users > self.target_users {
            return bad("labeled_target_users exceeds target_users");
        }
        if self.days == 0 {
            return bad("days must be positive");
        }
        Ok(())
    }

    /// Same distributions on both sides.
    pub fn zero_shift(posts: usize, users: usize) -> Self {
        TextSynthSpec {
            source_posts: posts,
            target_posts: posts,
            source_users: users,
            target_users: users,
            target_distress_share: 0.5,
            labeled_target_users: users / 5,
            vocab_overlap: 1.0,
            shift: 0.0,
            ..TextSynthSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub posts: Vec<PostRecord>,
    /// Ground truth per user.
    pub truth: BTreeMap<String, DistressLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCorpora {
    pub source: SyntheticCorpus,
    pub target: SyntheticCorpus,
    /// Released subset of target ground truth.
    pub labeled_target: BTreeMap<String, DistressLabel>,
}

struct Side<'a> {
    prefix: &'a str,
    posts: usize,
    users: usize,
    distress_share: f64,
    topics: Vec<&'static str>,
    meta_shift: f64,
    rate_shift: f64,
}

pub fn generate_text(spec: &TextSynthSpec, master_seed: u64) -> Result<TextCorpora, SynthError> {
    spec.validate()?;
    let n_shared = (GENERAL_TOPICS.len() as f64 * spec.vocab_overlap).round() as usize;
    let mut target_topics: Vec<&'static str> = GENERAL_TOPICS[..n_shared].to_vec();
    target_topics.extend_from_slice(&POLITICAL_TOPICS[..GENERAL_TOPICS.len() - n_shared]);
    let source = side(
        spec,
        &Side {
            prefix: "s",
            posts: spec.source_posts,
            users: spec.source_users,
            distress_share: spec.source_distress_share,
            topics: GENERAL_TOPICS.to_vec(),
            meta_shift: 0.0,
            rate_shift: 0.0,
        },
        seed::derive(master_seed, "synth-source"),
    );
    let target = side(
        spec,
        &Side {
            prefix: "t",
            posts: spec.target_posts,
            users: spec.target_users,
            distress_share: spec.target_distress_share,
            topics: target_topics,
            meta_shift: spec.shift,
            rate_shift: 0.05 * spec.shift,
        },
        seed::derive(master_seed, "synth-target"),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(master_seed, "synth-labeled"));
    let users: Vec<&String> = target.truth.keys().collect();
    let labeled_target = users
        .choose_multiple(&mut rng, spec.labeled_target_users)
        .map(|u| ((*u).clone(), target.truth[*u]))
        .collect();
    Ok(TextCorpora {
        source,
        target,
        labeled_target,
    })
}

fn side(spec: &TextSynthSpec, s: &Side<'_>, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_distress = ((s.users as f64) * s.distress_share).round().clamp(1.0, (s.users - 1).max(1) as f64) as usize;
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut posts = Vec::with_capacity(s.posts);
    let mut truth = BTreeMap::new();
    for u in 0..s.users {
        let distress = u < n_distress;
        let user_id = format!("{}user{u:05}", s.prefix);
        truth.insert(user_id.clone(), if distress { DistressLabel::Distress } else { DistressLabel::Control });
        let class_meta = if distress { -0.5 } else { 0.0 };
        let followers = (5.5 + class_meta + s.meta_shift + std_normal.sample(&mut rng)).exp().round() as u64;
        let followees = (5.0 + class_meta / 2.0 + s.meta_shift + 0.8 * std_normal.sample(&mut rng)).exp().round() as u64;
        let base_tweets = (7.0 + s.meta_shift + std_normal.sample(&mut rng)).exp().round() as u64;
        let mut total_favourites = (6.0 - class_meta + s.meta_shift + std_normal.sample(&mut rng)).exp().round() as u64;
        let rate = (if distress { spec.distress_word_rate } else { spec.control_distress_word_rate } + s.rate_shift).min(1.0);
        let night = if distress { 0.45 } else { 0.25 };
        let count = s.posts / s.users + usize::from(u < s.posts % s.users);
        for k in 0..count {
            let day = rng.gen_range(0..spec.days);
            let hour = if rng.gen_bool(night) {
                [21, 22, 23, 0, 1, 2, 3, 4, 5][rng.gen_range(0..9)]
            } else {
                rng.gen_range(6..21)
            };
            let date = spec.start_date + Days::new(day as u64);
            let timestamp = Utc
                .from_utc_datetime(&date.and_hms_opt(hour, rng.gen_range(0..60), rng.gen_range(0..60)).unwrap());
            let is_retweet = rng.gen_bool(0.15);
            let is_reply = !is_retweet && rng.gen_bool(0.3);
            let mut words: Vec<String> = Vec::new();
            if is_retweet {
                words.push(format!("RT @{}user{:05}:", s.prefix, rng.gen_range(0..s.users)));
            } else if is_reply {
                words.push(format!("@{}user{:05}", s.prefix, rng.gen_range(0..s.users)));
            }
            for _ in 0..rng.gen_range(6..=20) {
                let r: f64 = rng.gen();
                let w = if r < rate {
                    DISTRESS_WORDS.choose(&mut rng)
                } else if r < rate + 0.05 {
                    POSITIVE_WORDS.choose(&mut rng)
                } else if r < rate + 0.45 {
                    FUNCTION_WORDS.choose(&mut rng)
                } else {
                    s.topics.choose(&mut rng)
                };
                words.push(w.unwrap().to_string());
            }
            if rng.gen_bool(0.1) {
                words.push(format!("#{}", s.topics.choose(&mut rng).unwrap()));
            }
            if rng.gen_bool(0.08) {
                words.push("https://t.co/x".into());
            }
            total_favourites += rng.gen_range(0..3);
            posts.push(PostRecord {
                post_id: format!("{}{u:05}-{k:04}", s.prefix),
                user_id: user_id.clone(),
                timestamp,
                text: words.join(" "),
                language: if rng.gen_bool(0.02) { "de".into() } else { "en".into() },
                is_reply,
                is_retweet,
                followers,
                followees,
                total_tweets: base_tweets + k as u64 + 1,
                total_favourites,
            });
        }
    }
    SyntheticCorpus { posts, truth }
}

#[derive(Serialize)]
struct Line<'a> {
    post_id: &'a str,
    user_id: &'a str,
    timestamp: String,
    text: &'a str,
    language: &'a str,
    is_reply: bool,
    is_retweet: bool,
    followers: u64,
    followees: u64,
    total_tweets: u64,
    total_favourites: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<DistressLabel>,
}

impl SyntheticCorpus {
    /// One JSON object per line; `inline_labels` adds each user's label.
    pub fn to_jsonl(&self, inline_labels: bool) -> String {
        let mut out = String::new();
        for p in &self.posts {
            let line = Line {
                post_id: &p.post_id,
                user_id: &p.user_id,
                timestamp: p.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                text: &p.text,
                language: &p.language,
                is_reply: p.is_reply,
                is_retweet: p.is_retweet,
                followers: p.followers,
                followees: p.followees,
                total_tweets: p.total_tweets,
                total_favourites: p.total_favourites,
                label: inline_labels.then(|| self.truth[&p.user_id]),
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        out
    }
}

/// `user_id,label` CSV with header.
pub fn labels_csv(labels: &BTreeMap<String, DistressLabel>) -> String {
    let mut s = String::from("user_id,label\n");
    for (u, l) in labels {
        s.push_str(&format!("{u},{l}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_posts, CorpusRole};
    use crate::domainadapt::ks_statistic;

    #[test]
    fn sizes_and_determinism() {
        let spec = TextSynthSpec {
            source_posts: 100,
            source_users: 10,
            target_posts: 50,
            target_users: 10,
            labeled_target_users: 4,
            ..TextSynthSpec::default()
        };
        let a = generate_text(&spec, 3).unwrap();
        assert_eq!(a.source.to_jsonl(true).lines().count(), 100);
        assert_eq!(a.target.posts.len(), 50);
        assert_eq!(a.labeled_target.len(), 4);
        let b = generate_text(&spec, 3).unwrap();
        assert_eq!(a.source.to_jsonl(true), b.source.to_jsonl(true));
        assert_ne!(a.source.to_jsonl(true), generate_text(&spec, 4).unwrap().source.to_jsonl(true));
    }

    #[test]
    fn invalid_specs_rejected() {
        let d = TextSynthSpec::default();
        for bad in [
            TextSynthSpec { source_users: 0, ..d.clone() },
            TextSynthSpec { source_posts: 5, source_users: 10, ..d.clone() },
            TextSynthSpec { target_distress_share: 1.0, ..d.clone() },
            TextSynthSpec { vocab_overlap: 1.5, ..d.clone() },
            TextSynthSpec { shift: -1.0, ..d.clone() },
            TextSynthSpec { labeled_target_users: 1000, ..d.clone() },
        ] {
            assert!(generate_text(&bad, 1).is_err());
        }
    }

    #[test]
    fn output_is_ingestible() {
        let c = generate_text(&TextSynthSpec::default(), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(&p, c.source.to_jsonl(true)).unwrap();
        let (corpus, report) = ingest_posts(&p, CorpusRole::Source).unwrap();
        assert_eq!(report.accepted, c.source.posts.len());
        assert_eq!(corpus.labels, c.source.truth);
        assert!(labels_csv(&c.labeled_target).starts_with("user_id,label\n"));
    }

    #[test]
    fn zero_shift_has_small_ks() {
        let c = generate_text(&TextSynthSpec::zero_shift(2000, 1000), 11).unwrap();
        type Getter = fn(&PostRecord) -> f64;
        let features: [(&str, Getter); 6] = [
            ("followers", |p| p.followers as f64),
            ("followees", |p| p.followees as f64),
            ("total_tweets", |p| p.total_tweets as f64),
            ("total_favourites", |p| p.total_favourites as f64),
            ("words", |p| p.text.split(' ').count() as f64),
            ("hour", |p| chrono::Timelike::hour(&p.timestamp) as f64),
        ];
        for (name, f) in features {
            let a: Vec<f64> = c.source.posts.iter().map(f).collect();
            let b: Vec<f64> = c.target.posts.iter().map(f).collect();
            let d = ks_statistic(&a, &b).unwrap();
            assert!(d < 0.1, "{name}: D = {d}");
        }
    }
}
