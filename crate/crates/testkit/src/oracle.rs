//! Deliberately naive reference implementations for cross-checking.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

/// One party and its `(pattern, case_sensitive)` aliases.
pub type AliasSpec = (String, Vec<(String, bool)>);

/// `(mention_id, party, anchor_index, window_text)`.
pub type MentionKey = (String, String, usize, String);

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Scans every start position with explicit word-boundary checks.
pub fn naive_contains(haystack: &str, needle: &str, case_sensitive: bool) -> bool {
    let fold = |s: &str| -> Vec<char> {
        if case_sensitive {
            s.chars().collect()
        } else {
            s.chars().flat_map(char::to_lowercase).collect()
        }
    };
    let (h, n) = (fold(haystack), fold(needle));
    if n.is_empty() || n.len() > h.len() {
        return false;
    }
    (0..=h.len() - n.len()).any(|i| {
        h[i..i + n.len()] == n[..]
            && (i == 0 || !is_word(h[i - 1]))
            && (i + n.len() == h.len() || !is_word(h[i + n.len()]))
    })
}

pub fn oracle_mention_id(article: &str, party: &str, anchor: usize) -> String {
    let digest = Sha256::digest(format!("{article}\u{1f}{party}\u{1f}{anchor}").as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Every (sentence, party) pair of pre-split sentences, checked one by one.
pub fn brute_force_mentions(
    article_id: &str,
    sentences: &[String],
    parties: &[AliasSpec],
    radius: usize,
    min_chars: usize,
) -> BTreeSet<MentionKey> {
    let mut out = BTreeSet::new();
    for (i, s) in sentences.iter().enumerate() {
        if s.chars().count() < min_chars {
            continue;
        }
        for (party, aliases) in parties {
            if !aliases.iter().any(|(p, cs)| naive_contains(s, p, *cs)) {
                continue;
            }
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(sentences.len() - 1);
            out.insert((
                oracle_mention_id(article_id, party, i),
                party.clone(),
                i,
                sentences[lo..=hi].join(" "),
            ));
        }
    }
    out
}
