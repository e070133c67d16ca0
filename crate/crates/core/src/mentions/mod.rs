//! Party mentions with sentence context windows.

mod segment;

use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{ArticleRecord, ArticleType};
use crate::text::PhraseMatcher;

pub use segment::{segment_sentences, Segmenter, SentenceSpan, DEFAULT_ABBREVIATIONS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alias {
    pub pattern: String,
    #[serde(default)]
    pub case_sensitive: bool,
}

impl Alias {
    pub fn new(pattern: &str, case_sensitive: bool) -> Self {
        Self {
            pattern: pattern.to_string(),
            case_sensitive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyAliasSet {
    pub party: String,
    pub aliases: Vec<Alias>,
}

impl PartyAliasSet {
    pub fn new(party: &str, aliases: Vec<Alias>) -> Self {
        Self {
            party: party.to_string(),
            aliases,
        }
    }
}

/// Full names match case-insensitively; short names are case-sensitive
/// because "reform" and "labour" are ordinary nouns.
pub fn default_alias_sets() -> Vec<PartyAliasSet> {
    vec![
        PartyAliasSet::new(
            "Conservatives",
            vec![
                Alias::new("Welsh Conservatives", false),
                Alias::new("Conservatives", true),
                Alias::new("Tories", true),
                Alias::new("Tory", true),
            ],
        ),
        PartyAliasSet::new(
            "Labour",
            vec![Alias::new("Welsh Labour", false), Alias::new("Labour", true)],
        ),
        PartyAliasSet::new(
            "Plaid Cymru",
            vec![Alias::new("Plaid Cymru", false), Alias::new("Plaid", true)],
        ),
        PartyAliasSet::new(
            "Reform UK",
            vec![Alias::new("Reform UK", false), Alias::new("Reform", true)],
        ),
    ]
}

/// One party occurrence anchored to a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mention {
    pub mention_id: String,
    pub article_id: String,
    pub party: String,
    pub anchor_sentence_index: usize,
    pub window_radius: usize,
    pub window_text: String,
    pub published_at: NaiveDate,
    pub article_type: ArticleType,
}

/// Stable id for (article, party, anchor sentence).
pub fn mention_id(article_id: &str, party: &str, anchor: usize) -> String {
    let mut h = Sha256::new();
    h.update(article_id.as_bytes());
    h.update([0x1f]);
    h.update(party.as_bytes());
    h.update([0x1f]);
    h.update(anchor.to_string().as_bytes());
    hex::encode(&h.finalize()[..16])
}

/// Compiled alias matchers for every party.
#[derive(Debug, Clone)]
pub struct AliasIndex {
    parties: Vec<(String, Vec<PhraseMatcher>)>,
}

impl AliasIndex {
    /// Parties are kept sorted by name.
    pub fn new(sets: &[PartyAliasSet]) -> Self {
        let mut parties: Vec<(String, Vec<PhraseMatcher>)> = sets
            .iter()
            .map(|s| {
                let m = s
                    .aliases
                    .iter()
                    .map(|a| PhraseMatcher::new(&a.pattern, a.case_sensitive))
                    .collect();
                (s.party.clone(), m)
            })
            .collect();
        parties.sort_by(|a, b| a.0.cmp(&b.0));
        Self { parties }
    }

    pub fn parties(&self) -> impl Iterator<Item = &str> {
        self.parties.iter().map(|(p, _)| p.as_str())
    }

    fn matchers(&self, party: &str) -> Option<&[PhraseMatcher]> {
        self.parties
            .iter()
            .find(|(p, _)| p == party)
            .map(|(_, m)| m.as_slice())
    }

    pub fn mentions_party(&self, party: &str, text: &str) -> bool {
        self.matchers(party)
            .is_some_and(|ms| ms.iter().any(|m| m.is_match(text)))
    }

    /// Byte offset of the earliest alias occurrence for `party`.
    pub fn first_occurrence(&self, party: &str, text: &str) -> Option<usize> {
        self.matchers(party)?.iter().filter_map(|m| m.find(text)).min()
    }
}

#[derive(Debug, Clone)]
pub struct MentionExtractor {
    aliases: AliasIndex,
    segmenter: Segmenter,
    radius: usize,
    min_sentence_chars: usize,
}

impl MentionExtractor {
    pub fn new(aliases: &[PartyAliasSet], radius: usize, min_sentence_chars: usize) -> Self {
        Self {
            aliases: AliasIndex::new(aliases),
            segmenter: Segmenter::default(),
            radius,
            min_sentence_chars,
        }
    }

    pub fn with_segmenter(mut self, segmenter: Segmenter) -> Self {
        self.segmenter = segmenter;
        self
    }

    pub fn alias_index(&self) -> &AliasIndex {
        &self.aliases
    }

    /// One mention per (party, sentence) where the sentence is long enough
    /// and contains an alias; short sentences still appear inside
    /// neighbouring windows. Ordered by party, then anchor index.
    pub fn extract(&self, article: &ArticleRecord) -> Vec<Mention> {
        let sentences = self.segmenter.segment(&article.body_text);
        let mut out = Vec::new();
        for (party, matchers) in &self.aliases.parties {
            for s in &sentences {
                if s.char_len < self.min_sentence_chars {
                    continue;
                }
                if !matchers.iter().any(|m| m.is_match(&s.text)) {
                    continue;
                }
                let lo = s.index.saturating_sub(self.radius);
                let hi = (s.index + self.radius).min(sentences.len() - 1);
                let window_text = sentences[lo..=hi]
                    .iter()
                    .map(|w| w.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                out.push(Mention {
                    mention_id: mention_id(&article.article_id, party, s.index),
                    article_id: article.article_id.clone(),
                    party: party.clone(),
                    anchor_sentence_index: s.index,
                    window_radius: self.radius,
                    window_text,
                    published_at: article.published_at,
                    article_type: article.article_type,
                });
            }
        }
        out
    }
}

pub fn extract_mentions(
    article: &ArticleRecord,
    aliases: &[PartyAliasSet],
    radius: usize,
    min_sentence_chars: usize,
) -> Vec<Mention> {
    MentionExtractor::new(aliases, radius, min_sentence_chars).extract(article)
}

/// Drops later records that repeat a `mention_id`.
pub fn dedupe_mentions(mentions: Vec<Mention>) -> Vec<Mention> {
    let mut seen = HashSet::new();
    mentions
        .into_iter()
        .filter(|m| seen.insert(m.mention_id.clone()))
        .collect()
}
