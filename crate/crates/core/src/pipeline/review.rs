//! Stratified sample of classified mentions for manual checking.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::ArticleType;
use crate::mentions::Mention;
use crate::stage2::Stage2Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewRow {
    pub mention_id: String,
    pub party: String,
    pub article_type: ArticleType,
    pub published_at: String,
    pub on_target: u8,
    pub sentiment: f64,
    pub reasoning: String,
    pub window_text: String,
}

/// Draws up to `n` classified mentions, spread as evenly over parties as
/// their sizes allow. Rows come back ordered by (party, mention_id).
pub fn review_sample(mentions: &[Mention], results: &[Stage2Result], n: usize, seed: u64) -> Vec<ReviewRow> {
    let by_id: HashMap<&str, &Mention> = mentions.iter().map(|m| (m.mention_id.as_str(), m)).collect();
    let mut groups: BTreeMap<&str, Vec<(&Mention, &Stage2Result)>> = BTreeMap::new();
    for r in results {
        if let Some(m) = by_id.get(r.mention_id.as_str()) {
            groups.entry(m.party.as_str()).or_default().push((m, r));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in groups.values_mut() {
        g.sort_by(|a, b| a.0.mention_id.cmp(&b.0.mention_id));
        g.dedup_by(|a, b| a.0.mention_id == b.0.mention_id);
        g.shuffle(&mut rng);
    }
    let mut picked = Vec::new();
    let mut depth = 0;
    while picked.len() < n {
        let mut progressed = false;
        for g in groups.values() {
            if picked.len() == n {
                break;
            }
            if let Some(item) = g.get(depth) {
                picked.push(*item);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
        depth += 1;
    }
    let mut rows: Vec<ReviewRow> = picked
        .into_iter()
        .map(|(m, r)| ReviewRow {
            mention_id: m.mention_id.clone(),
            party: m.party.clone(),
            article_type: m.article_type,
            published_at: m.published_at.to_string(),
            on_target: r.on_target,
            sentiment: r.sentiment.value(),
            reasoning: r.reasoning.clone(),
            window_text: m.window_text.clone(),
        })
        .collect();
    rows.sort_by(|a, b| (&a.party, &a.mention_id).cmp(&(&b.party, &b.mention_id)));
    rows
}
