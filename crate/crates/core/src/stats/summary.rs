//! Per-party summaries and baseline-relative figure data.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{mean_ci95, MeanCi, StatsError};
use crate::corpus::ArticleType;
use crate::mentions::Mention;
use crate::stage1::Stage1Label;
use crate::stage2::{Sentiment, Stage2Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartySummary {
    pub party: String,
    pub article_type: ArticleType,
    pub total_mentions: u64,
    pub stage1_biased: u64,
    pub on_target_biased: u64,
    pub off_target_biased: u64,
    pub bias_rate: f64,
    pub sentiment_scores: Vec<f64>,
    pub mean_sentiment: Option<f64>,
    pub ci95: Option<MeanCi>,
    pub strongly_negative_count: u64,
    pub strongly_negative_rate_of_total: f64,
}

/// Mentions, Stage 1 labels and Stage 2 results joined on `mention_id`.
pub struct Dataset<'a> {
    mentions: Vec<&'a Mention>,
    labels: HashMap<&'a str, &'a Stage1Label>,
    results: HashMap<&'a str, &'a Stage2Result>,
}

impl<'a> Dataset<'a> {
    /// Fails if a label or result names a mention that is not present.
    pub fn new(
        mentions: &'a [Mention],
        labels: &'a [Stage1Label],
        results: &'a [Stage2Result],
    ) -> Result<Self, StatsError> {
        let mut ms: Vec<&Mention> = mentions.iter().collect();
        ms.sort_by(|a, b| a.mention_id.cmp(&b.mention_id));
        ms.dedup_by(|a, b| a.mention_id == b.mention_id);
        let known: HashMap<&str, ()> = ms.iter().map(|m| (m.mention_id.as_str(), ())).collect();
        let mut label_ix = HashMap::new();
        for l in labels {
            if !known.contains_key(l.mention_id.as_str()) {
                return Err(StatsError::Integrity(format!("label for unknown mention {}", l.mention_id)));
            }
            label_ix.insert(l.mention_id.as_str(), l);
        }
        let mut result_ix = HashMap::new();
        for r in results {
            if !known.contains_key(r.mention_id.as_str()) {
                return Err(StatsError::Integrity(format!("result for unknown mention {}", r.mention_id)));
            }
            result_ix.insert(r.mention_id.as_str(), r);
        }
        Ok(Self {
            mentions: ms,
            labels: label_ix,
            results: result_ix,
        })
    }

    /// Stage 2 results whose mention is Stage-1 biased and matches `keep`.
    pub fn classified<F: Fn(&Mention) -> bool>(&self, keep: F) -> Vec<&'a Stage2Result> {
        self.mentions
            .iter()
            .filter(|m| keep(m) && self.is_biased(m))
            .filter_map(|m| self.results.get(m.mention_id.as_str()).copied())
            .collect()
    }

    fn is_biased(&self, m: &Mention) -> bool {
        self.labels.get(m.mention_id.as_str()).is_some_and(|l| l.is_biased())
    }

    pub fn summarize(&self, party: &str, article_type: ArticleType) -> PartySummary {
        let mut s = PartySummary {
            party: party.to_string(),
            article_type,
            total_mentions: 0,
            stage1_biased: 0,
            on_target_biased: 0,
            off_target_biased: 0,
            bias_rate: 0.0,
            sentiment_scores: Vec::new(),
            mean_sentiment: None,
            ci95: None,
            strongly_negative_count: 0,
            strongly_negative_rate_of_total: 0.0,
        };
        for m in self.mentions.iter().filter(|m| m.party == party && m.article_type == article_type) {
            s.total_mentions += 1;
            if !self.is_biased(m) {
                continue;
            }
            s.stage1_biased += 1;
            let Some(r) = self.results.get(m.mention_id.as_str()) else {
                continue;
            };
            if !r.is_on_target() {
                s.off_target_biased += 1;
                continue;
            }
            s.on_target_biased += 1;
            s.sentiment_scores.push(r.sentiment.value());
            if r.sentiment == Sentiment::StronglyNegative {
                s.strongly_negative_count += 1;
            }
        }
        if s.total_mentions > 0 {
            let n = s.total_mentions as f64;
            s.bias_rate = s.on_target_biased as f64 / n;
            s.strongly_negative_rate_of_total = s.strongly_negative_count as f64 / n;
        }
        if !s.sentiment_scores.is_empty() {
            s.mean_sentiment = Some(s.sentiment_scores.iter().sum::<f64>() / s.sentiment_scores.len() as f64);
        }
        s.ci95 = mean_ci95(&s.sentiment_scores).ok();
        s
    }
}

pub fn summarize_party(
    mentions: &[Mention],
    labels: &[Stage1Label],
    results: &[Stage2Result],
    party: &str,
    article_type: ArticleType,
) -> Result<PartySummary, StatsError> {
    Ok(Dataset::new(mentions, labels, results)?.summarize(party, article_type))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Pooled mean of every on-target score in the article type.
    #[default]
    Computed,
    Fixed(BTreeMap<ArticleType, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub party: String,
    pub article_type: ArticleType,
    pub n: u64,
    pub baseline: f64,
    pub mean_minus_baseline: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Resolves one baseline per article type.
pub fn baselines(
    summaries: &[PartySummary],
    article_types: &[ArticleType],
    mode: &BaselineMode,
) -> Result<BTreeMap<ArticleType, f64>, StatsError> {
    let mut out = BTreeMap::new();
    for &ty in article_types {
        let members: Vec<&PartySummary> = summaries.iter().filter(|s| s.article_type == ty).collect();
        if members.is_empty() {
            return Err(StatsError::MissingStratum(format!("no summaries for article type {ty}")));
        }
        let value = match mode {
            BaselineMode::Fixed(map) => *map
                .get(&ty)
                .ok_or_else(|| StatsError::MissingStratum(format!("no fixed baseline for article type {ty}")))?,
            BaselineMode::Computed => {
                let (sum, n) = members
                    .iter()
                    .flat_map(|s| s.sentiment_scores.iter())
                    .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                if n == 0 {
                    return Err(StatsError::MissingStratum(format!("no sentiment scores for article type {ty}")));
                }
                sum / n as f64
            }
        };
        out.insert(ty, value);
    }
    Ok(out)
}

/// Party means relative to their article-type baseline, CI shifted alike.
pub fn figure_data(
    summaries: &[PartySummary],
    article_types: &[ArticleType],
    mode: &BaselineMode,
) -> Result<(Vec<FigureRow>, BTreeMap<ArticleType, f64>), StatsError> {
    let base = baselines(summaries, article_types, mode)?;
    let mut rows = Vec::new();
    for s in summaries {
        let Some(&b) = base.get(&s.article_type) else {
            continue;
        };
        rows.push(FigureRow {
            party: s.party.clone(),
            article_type: s.article_type,
            n: s.sentiment_scores.len() as u64,
            baseline: b,
            mean_minus_baseline: s.mean_sentiment.map(|m| m - b),
            ci_low: s.ci95.map(|c| c.ci_low - b),
            ci_high: s.ci95.map(|c| c.ci_high - b),
        });
    }
    rows.sort_by(|a, b| (a.article_type, &a.party).cmp(&(b.article_type, &b.party)));
    Ok((rows, base))
}
