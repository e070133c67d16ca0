//! Literal phrase matching at word boundaries.

use regex::{Regex, RegexBuilder};

/// A literal phrase that only matches when it is not glued to surrounding
/// letters or digits ("Reform" does not match inside "Reformation").
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    phrase: String,
    regex: Regex,
}

impl PhraseMatcher {
    pub fn new(phrase: &str, case_sensitive: bool) -> Self {
        let pattern = format!(r"(?:^|[^\w])({})(?:$|[^\w])", regex::escape(phrase));
        let regex = RegexBuilder::new(&pattern)
            .case_insensitive(!case_sensitive)
            .build()
            .expect("escaped literal always compiles");
        Self {
            phrase: phrase.to_string(),
            regex,
        }
    }

    pub fn phrase(&self) -> &str {
        &self.phrase
    }

    /// Byte offset of the first match.
    pub fn find(&self, haystack: &str) -> Option<usize> {
        self.find_from(haystack, 0).map(|(s, _)| s)
    }

    pub fn is_match(&self, haystack: &str) -> bool {
        self.find(haystack).is_some()
    }

    /// Number of non-overlapping matches.
    pub fn count(&self, haystack: &str) -> usize {
        let mut n = 0;
        let mut pos = 0;
        while let Some((_, end)) = self.find_from(haystack, pos) {
            n += 1;
            pos = end;
        }
        n
    }

    fn find_from(&self, haystack: &str, from: usize) -> Option<(usize, usize)> {
        // The boundary context is consumed by the regex, so start one char
        // early to let the previous character act as the left boundary.
        let start = if from == 0 {
            0
        } else {
            haystack[..from]
                .char_indices()
                .next_back()
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        let caps = self.regex.captures_at(haystack, start)?;
        let m = caps.get(1)?;
        Some((m.start(), m.end()))
    }
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
