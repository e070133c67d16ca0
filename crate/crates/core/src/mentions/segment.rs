//! Rule-based sentence splitting.

use serde::{Deserialize, Serialize};

/// Abbreviations that end in a period but do not end a sentence.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Dr.", "Mr.", "Mrs.", "Ms.", "St.", "MS.", "MP.", "e.g.", "i.e.", "approx.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub text: String,
    pub char_len: usize,
}

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: Vec<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl Segmenter {
    /// Abbreviations compare case-insensitively.
    pub fn new<'a>(abbreviations: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            abbreviations: abbreviations.into_iter().map(|a| a.to_lowercase()).collect(),
        }
    }

    /// Splits on `.`, `?` or `!` (plus trailing quotes/brackets) when followed
    /// by whitespace and then an uppercase letter, opening quote or digit.
    /// Line breaks always end a sentence. Each span's text has its whitespace
    /// normalized.
    pub fn segment(&self, body_text: &str) -> Vec<SentenceSpan> {
        let mut out = Vec::new();
        for block in body_text.split('\n') {
            for raw in self.split_block(block) {
                let text = crate::text::normalize_whitespace(raw);
                if text.is_empty() {
                    continue;
                }
                out.push(SentenceSpan {
                    index: out.len(),
                    char_len: text.chars().count(),
                    text,
                });
            }
        }
        out
    }

    fn split_block<'a>(&self, block: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = block.char_indices().collect();
        let mut pieces = Vec::new();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !matches!(c, '.' | '?' | '!') {
                i += 1;
                continue;
            }
            // Swallow runs like "?!" or "..." and closing quotes/brackets.
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '?' | '!') {
                j += 1;
            }
            let single_period = c == '.' && j == i + 1;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let end_byte = chars.get(j).map(|(b, _)| *b).unwrap_or(block.len());
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = k > j
                && k < chars.len()
                && starts_sentence(chars[k].1)
                && !(single_period && self.is_abbreviation(&block[start..end_byte]));
            if boundary {
                pieces.push(&block[start..end_byte]);
                start = chars[k].0;
                i = k;
            } else {
                i = j;
            }
        }
        if start < block.len() {
            pieces.push(&block[start..]);
        }
        pieces
    }

    fn is_abbreviation(&self, piece: &str) -> bool {
        let word = piece
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(|c: char| !c.is_alphanumeric());
        let word = word.to_lowercase();
        self.abbreviations.iter().any(|a| *a == word)
    }
}

fn starts_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_ascii_digit() || OPENERS.contains(&c)
}

pub fn segment_sentences(body_text: &str) -> Vec<SentenceSpan> {
    Segmenter::default().segment(body_text)
}
