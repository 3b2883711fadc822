use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::textprep::TokenList;

const DEMO_LEXICON: &str = include_str!("../../data/lexicon_demo.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Exact(String),
    /// Written `abc*` in the file.
    Prefix(String),
}

impl Pattern {
    pub fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Exact(s) => token == s,
            Pattern::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

/// Category word lists in an open, LIWC-like format.
///
/// ```text
/// [anx]
/// worri*
/// nervou*
/// ```
///
/// Patterns are compared with stems. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    categories: Vec<(String, Vec<Pattern>)>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut categories: Vec<(String, Vec<Pattern>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |message: &str| FeatureError::Lexicon {
                line: i + 1,
                message: message.to_string(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated category header"))?.trim();
                if name.is_empty() {
                    return Err(err("empty category name"));
                }
                if categories.iter().any(|(n, _)| n == name) {
                    return Err(err("duplicate category"));
                }
                categories.push((name.to_string(), Vec::new()));
                continue;
            }
            let (_, patterns) = categories.last_mut().ok_or_else(|| err("pattern before any [category]"))?;
            if line.chars().any(|c| c.is_uppercase()) || line.contains(char::is_whitespace) {
                return Err(err("patterns must be single lowercase words"));
            }
            let pattern = match line.strip_suffix('*') {
                Some("") => return Err(err("bare '*' pattern")),
                Some(p) if p.contains('*') => return Err(err("'*' only allowed as final character")),
                Some(p) => Pattern::Prefix(p.to_string()),
                None if line.contains('*') => return Err(err("'*' only allowed as final character")),
                None => Pattern::Exact(line.to_string()),
            };
            patterns.push(pattern);
        }
        if let Some((name, _)) = categories.iter().find(|(_, p)| p.is_empty()) {
            return Err(FeatureError::Lexicon {
                line: 0,
                message: format!("category {name:?} has no patterns"),
            });
        }
        Ok(Lexicon { categories })
    }

    pub fn from_file(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::parse(&text)
    }

    /// Small illustrative lexicon bundled with the crate (not LIWC-equivalent).
    pub fn demo() -> Self {
        Lexicon::parse(DEMO_LEXICON).expect("bundled lexicon parses")
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Percentages in category order.
    pub(crate) fn percentages(&self, tokens: &TokenList) -> Vec<f64> {
        if tokens.is_empty() {
            return vec![0.0; self.categories.len()];
        }
        let total = tokens.len() as f64;
        self.categories
            .iter()
            .map(|(_, patterns)| {
                let hits = tokens.iter().filter(|t| patterns.iter().any(|p| p.matches(t))).count();
                100.0 * hits as f64 / total
            })
            .collect()
    }
}

/// Share of tokens, in percent, matching each category's patterns.
pub fn lexicon_percentages(tokens: &TokenList, lexicon: &Lexicon) -> BTreeMap<String, f64> {
    lexicon
        .category_names()
        .map(str::to_string)
        .zip(lexicon.percentages(tokens))
        .collect()
}
