//! Deterministic loaded-language lexicon backend for dry runs and CI.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BiasBackend, ScoreInput, Stage1Error};
use crate::text::PhraseMatcher;

pub const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.txt");

/// Score is `min(1, 0.25 * hits)` where hits counts every word-bounded,
/// case-insensitive occurrence of a lexicon term.
#[derive(Debug, Clone)]
pub struct LexiconBackend {
    terms: Vec<PhraseMatcher>,
    id: String,
}

impl LexiconBackend {
    pub fn bundled() -> Self {
        Self::from_text(BUNDLED_LEXICON)
    }

    pub fn from_file(path: &Path) -> Result<Self, Stage1Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Stage1Error::Init(format!("{}: {e}", path.display())))?;
        Ok(Self::from_text(&text))
    }

    /// One lowercase term per line.
    pub fn from_text(text: &str) -> Self {
        Self::from_terms(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn from_terms<'a>(terms: impl IntoIterator<Item = &'a str>) -> Self {
        let mut list: Vec<String> = terms.into_iter().map(|t| t.to_lowercase()).collect();
        list.sort();
        list.dedup();
        let digest = Sha256::digest(list.join("\n").as_bytes());
        Self {
            id: format!("lexicon:{}", &hex::encode(digest)[..12]),
            terms: list.iter().map(|t| PhraseMatcher::new(t, false)).collect(),
        }
    }

    pub fn hits(&self, text: &str) -> usize {
        self.terms.iter().map(|t| t.count(text)).sum()
    }
}

impl BiasBackend for LexiconBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score(&mut self, input: ScoreInput<'_>) -> Result<f64, String> {
        Ok((0.25 * self.hits(input.text) as f64).min(1.0))
    }
}
