//! Text normalization: cleaning, tokenization, stopword removal and stemming.

mod porter;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use porter::stem_word;

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot read stopword file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stopword list is empty")]
    EmptyStopwords,
}

/// Ordered tokens produced by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenList(pub Vec<String>);

impl TokenList {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl From<Vec<&str>> for TokenList {
    fn from(v: Vec<&str>) -> Self {
        TokenList(v.into_iter().map(str::to_string).collect())
    }
}

/// Set of stopwords, stored in cleaned form so they compare against cleaned tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    /// Builds a list from raw entries; each entry is passed through [`clean`].
    pub fn new<I, S>(entries: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = entries
            .into_iter()
            .flat_map(|e| clean(e.as_ref()).split(' ').map(str::to_string).collect::<Vec<_>>())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(TextError::EmptyStopwords);
        }
        Ok(StopwordList { words })
    }

    /// The English list shipped with the crate.
    pub fn bundled() -> Self {
        StopwordList::new(BUNDLED_STOPWORDS.lines()).expect("bundled stopwords are nonempty")
    }

    /// Loads a UTF-8 file with one word per line.
    pub fn from_file(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        StopwordList::new(text.lines())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:https?://|www\.)\S*").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@\w+").unwrap())
}

/// Lowercases and strips URLs, mentions, digits, punctuation and the `amp`
/// entity residue; whitespace runs collapse to single spaces.
///
/// Hashtag words survive without their `#`. Non-ASCII letters are kept.
pub fn clean(text: &str) -> String {
    let lower = text.to_lowercase();
    let no_urls = url_re().replace_all(&lower, " ");
    let no_mentions = mention_re().replace_all(&no_urls, " ");
    let letters: String = no_mentions
        .chars()
        .filter(|c| c.is_whitespace() || (c.is_alphabetic() && !c.is_numeric()))
        .collect();
    let mut out = String::with_capacity(letters.len());
    for word in letters.split_whitespace().filter(|w| *w != "amp") {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits cleaned text on spaces, dropping empty pieces.
pub fn tokenize(text: &str) -> TokenList {
    TokenList(
        text.split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

pub fn remove_stopwords(tokens: &TokenList, stopwords: &StopwordList) -> TokenList {
    TokenList(
        tokens
            .0
            .iter()
            .filter(|t| !stopwords.contains(t))
            .cloned()
            .collect(),
    )
}

pub fn stem(tokens: &TokenList) -> TokenList {
    TokenList(tokens.0.iter().map(|t| stem_word(t)).collect())
}

/// The two token streams every document needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedText {
    /// Stems of every word, stopwords included. Lexicon categories such as
    /// articles and pronouns are made of stopwords, so they are counted here.
    pub all_stems: TokenList,
    /// Stems after stopword removal; source of unigram features.
    pub content_stems: TokenList,
}

/// Runs clean, tokenize, stopword removal and stem in order.
#[derive(Debug, Clone)]
pub struct Pipeline {
    stopwords: StopwordList,
}

impl Pipeline {
    pub fn new(stopwords: StopwordList) -> Self {
        Pipeline { stopwords }
    }

    pub fn stopwords(&self) -> &StopwordList {
        &self.stopwords
    }

    /// Content stems only.
    pub fn run(&self, text: &str) -> TokenList {
        self.content(&tokenize(&clean(text)))
    }

    // A stem can collide with a stopword ("beings" -> "be"), hence the second pass.
    fn content(&self, tokens: &TokenList) -> TokenList {
        let stems = stem(&remove_stopwords(tokens, &self.stopwords));
        remove_stopwords(&stems, &self.stopwords)
    }

    pub fn process(&self, text: &str) -> ProcessedText {
        let tokens = tokenize(&clean(text));
        let content_stems = self.content(&tokens);
        ProcessedText {
            all_stems: stem(&tokens),
            content_stems,
        }
    }
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::new(StopwordList::bundled())
    }
}
