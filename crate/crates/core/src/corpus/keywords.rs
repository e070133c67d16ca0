//! Relevance gate: keep articles that name enough politics keywords.

use std::collections::BTreeSet;

use crate::text::PhraseMatcher;

/// Default keyword list, one per line.
pub const DEFAULT_KEYWORDS: &str = include_str!("../../data/keywords.txt");

pub fn default_keywords() -> Vec<String> {
    parse_list(DEFAULT_KEYWORDS)
}

/// One entry per non-empty line; `#` starts a comment line.
pub fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordVerdict {
    pub decision: Decision,
    /// Lowercased distinct keywords found.
    pub matched: BTreeSet<String>,
}

/// Case-insensitive, word-bounded keyword matcher.
#[derive(Debug, Clone)]
pub struct KeywordGate {
    matchers: Vec<(String, PhraseMatcher)>,
    min_matches: usize,
}

impl KeywordGate {
    pub fn new(keyword_list: &[String], min_matches: usize) -> Self {
        let mut seen = BTreeSet::new();
        let matchers = keyword_list
            .iter()
            .filter(|k| seen.insert(k.to_lowercase()))
            .map(|k| (k.to_lowercase(), PhraseMatcher::new(k, false)))
            .collect();
        Self {
            matchers,
            min_matches,
        }
    }

    pub fn evaluate(&self, title: &str, body_text: &str) -> KeywordVerdict {
        let matched: BTreeSet<String> = self
            .matchers
            .iter()
            .filter(|(_, m)| m.is_match(title) || m.is_match(body_text))
            .map(|(k, _)| k.clone())
            .collect();
        let decision = if matched.len() >= self.min_matches && !matched.is_empty() {
            Decision::Keep
        } else {
            Decision::Drop
        };
        KeywordVerdict { decision, matched }
    }
}

/// Convenience wrapper around [`KeywordGate`].
pub fn keyword_filter(
    body_text: &str,
    title: &str,
    keyword_list: &[String],
    min_matches: usize,
) -> KeywordVerdict {
    KeywordGate::new(keyword_list, min_matches).evaluate(title, body_text)
}
