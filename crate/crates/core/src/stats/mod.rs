//! Effect sizes, party summaries and report files.

mod report;
mod summary;
mod tests;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ArticleType;
use crate::jsonl::JsonlError;

pub use report::{emit_reports, render_primary_table, ReportManifest, StatsRecord, REPORT_FILES};
pub use summary::{baselines, figure_data, summarize_party, BaselineMode, Dataset, FigureRow, PartySummary};
pub use tests::{
    cohen_h, mean_ci95, normal_two_sided, student_two_sided, two_proportion_ztest, two_sample_ttest, MeanCi, TTest,
    TtestVariant, ZTest,
};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("missing stratum: {0}")]
    MissingStratum(String),
    #[error("nothing to report")]
    Empty,
    #[error(transparent)]
    Io(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRateTest {
    pub z: f64,
    pub p: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentTest {
    pub variant: TtestVariant,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyInterval {
    pub party: String,
    pub article_type: ArticleType,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// The head-to-head comparison plus intervals and baselines.
///
/// A test that cannot be computed on the data is left empty and the reason
/// recorded in `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub party_a: String,
    pub party_b: String,
    pub article_type: ArticleType,
    pub bias_rate_test: Option<BiasRateTest>,
    pub sentiment_test: Option<SentimentTest>,
    pub intervals: Vec<PartyInterval>,
    pub baselines: BTreeMap<ArticleType, f64>,
    pub misattribution_rate: Option<f64>,
    pub notes: Vec<String>,
}

impl StatsReport {
    /// Compares `party_a` with `party_b` within `article_type`.
    pub fn compare(
        summaries: &[PartySummary],
        party_a: &str,
        party_b: &str,
        article_type: ArticleType,
        variant: TtestVariant,
    ) -> Result<Self, StatsError> {
        if summaries.is_empty() {
            return Err(StatsError::Empty);
        }
        let find = |p: &str| {
            summaries
                .iter()
                .find(|s| s.party == p && s.article_type == article_type)
                .ok_or_else(|| StatsError::MissingStratum(format!("{p}/{article_type}")))
        };
        let (a, b) = (find(party_a)?, find(party_b)?);
        let mut notes = Vec::new();

        let bias_rate_test = match two_proportion_ztest(a.on_target_biased, a.total_mentions, b.on_target_biased, b.total_mentions) {
            Ok(z) => Some(BiasRateTest {
                z: z.z,
                p: z.p,
                h: cohen_h(a.bias_rate, b.bias_rate),
            }),
            Err(e) => {
                notes.push(format!("bias rate test skipped: {e}"));
                None
            }
        };
        let sentiment_test = match two_sample_ttest(&a.sentiment_scores, &b.sentiment_scores, variant) {
            Ok(t) => Some(SentimentTest {
                variant,
                t: t.t,
                df: t.df,
                p: t.p,
                d: t.d,
            }),
            Err(e) => {
                notes.push(format!("sentiment test skipped: {e}"));
                None
            }
        };
        let intervals = summaries
            .iter()
            .filter_map(|s| {
                s.ci95.map(|c| PartyInterval {
                    party: s.party.clone(),
                    article_type: s.article_type,
                    mean: c.mean,
                    ci_low: c.ci_low,
                    ci_high: c.ci_high,
                })
            })
            .collect();
        Ok(Self {
            party_a: party_a.to_string(),
            party_b: party_b.to_string(),
            article_type,
            bias_rate_test,
            sentiment_test,
            intervals,
            baselines: BTreeMap::new(),
            misattribution_rate: None,
            notes,
        })
    }
}
