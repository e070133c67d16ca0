//! Article harvesting and the on-disk corpus.

mod html;
mod keywords;
mod store;
mod wordpress;

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::net::RetryPolicy;

pub use html::{html_to_text, is_markup_free};
pub use keywords::{default_keywords, keyword_filter, parse_list, Decision, KeywordGate, KeywordVerdict};
pub use store::{CorpusError, CorpusStore};
pub use wordpress::{
    harvest, HarvestError, HarvestOutcome, PostPage, RawPost, WordPressClient,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArticleType {
    News,
    Opinion,
    Other,
}

impl ArticleType {
    pub fn as_str(self) -> &'static str {
        match self {
            ArticleType::News => "news",
            ArticleType::Opinion => "opinion",
            ArticleType::Other => "other",
        }
    }
}

impl fmt::Display for ArticleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One harvested article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArticleRecord {
    pub article_id: String,
    pub url: String,
    pub published_at: NaiveDate,
    pub title: String,
    pub body_html: String,
    pub body_text: String,
    pub article_type: ArticleType,
    pub keywords_matched: BTreeSet<String>,
}

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DateRange {
    #[serde(deserialize_with = "flexible_date")]
    pub start: NaiveDate,
    #[serde(deserialize_with = "flexible_date")]
    pub end: NaiveDate,
}

/// Accepts `"2025-01-01"` as well as a bare TOML date, which serde sees as a
/// one-entry table wrapping the same text.
fn flexible_date<'de, D: serde::Deserializer<'de>>(de: D) -> Result<NaiveDate, D::Error> {
    struct V;
    impl<'de> serde::de::Visitor<'de> for V {
        type Value = NaiveDate;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a YYYY-MM-DD date")
        }

        fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<NaiveDate, E> {
            NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|e| E::custom(format!("{v:?}: {e}")))
        }

        fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<NaiveDate, A::Error> {
            let Some((_, text)) = map.next_entry::<String, String>()? else {
                return Err(serde::de::Error::custom("empty date"));
            };
            self.visit_str(&text)
        }
    }
    de.deserialize_any(V)
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryMapping {
    pub slug: String,
    pub article_type: ArticleType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestConfig {
    pub endpoint_base_url: String,
    #[serde(default = "default_keywords")]
    pub keyword_list: Vec<String>,
    #[serde(default = "HarvestConfig::default_min_keyword_matches")]
    pub min_keyword_matches: usize,
    pub date_range: DateRange,
    #[serde(default = "HarvestConfig::default_page_size")]
    pub page_size: u32,
    #[serde(default = "HarvestConfig::default_rate")]
    pub max_requests_per_second: f64,
    /// Declaration order decides ties when a post carries several mapped slugs.
    #[serde(default = "HarvestConfig::default_category_map")]
    pub category_type_map: Vec<CategoryMapping>,
    /// Also pass each keyword as the `search` parameter, one query per keyword.
    #[serde(default = "default_true")]
    pub server_side_search: bool,
    #[serde(default = "HarvestConfig::default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "HarvestConfig::default_timeout")]
    pub timeout_secs: u64,
}

fn default_true() -> bool {
    true
}

impl HarvestConfig {
    fn default_min_keyword_matches() -> usize {
        2
    }
    fn default_page_size() -> u32 {
        100
    }
    fn default_rate() -> f64 {
        2.0
    }
    fn default_concurrency() -> usize {
        4
    }
    fn default_timeout() -> u64 {
        30
    }
    fn default_category_map() -> Vec<CategoryMapping> {
        vec![
            CategoryMapping {
                slug: "news".into(),
                article_type: ArticleType::News,
            },
            CategoryMapping {
                slug: "opinion".into(),
                article_type: ArticleType::Opinion,
            },
        ]
    }

    pub fn new(endpoint_base_url: impl Into<String>, date_range: DateRange) -> Self {
        Self {
            endpoint_base_url: endpoint_base_url.into(),
            keyword_list: default_keywords(),
            min_keyword_matches: Self::default_min_keyword_matches(),
            date_range,
            page_size: Self::default_page_size(),
            max_requests_per_second: Self::default_rate(),
            category_type_map: Self::default_category_map(),
            server_side_search: true,
            concurrency_limit: Self::default_concurrency(),
            retry: RetryPolicy::default(),
            timeout_secs: Self::default_timeout(),
        }
    }

    /// `(field, message)` for every violated constraint.
    pub fn validate(&self) -> Vec<(String, String)> {
        let mut errs = Vec::new();
        if self.min_keyword_matches < 1 {
            errs.push(("min_keyword_matches".into(), "must be at least 1".into()));
        }
        if self.page_size < 1 {
            errs.push(("page_size".into(), "must be at least 1".into()));
        }
        if self.date_range.start > self.date_range.end {
            errs.push(("date_range".into(), "start is after end".into()));
        }
        if self.keyword_list.is_empty() {
            errs.push(("keyword_list".into(), "must not be empty".into()));
        }
        if self.concurrency_limit < 1 {
            errs.push(("concurrency_limit".into(), "must be at least 1".into()));
        }
        if !(self.max_requests_per_second > 0.0) {
            errs.push(("max_requests_per_second".into(), "must be positive".into()));
        }
        errs
    }
}

/// First slug present in the map wins, in map-declaration order.
pub fn classify_article_type(category_slugs: &[String], map: &[CategoryMapping]) -> ArticleType {
    map.iter()
        .find(|m| category_slugs.iter().any(|s| s == &m.slug))
        .map(|m| m.article_type)
        .unwrap_or(ArticleType::Other)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> Vec<CategoryMapping> {
        HarvestConfig::default_category_map()
    }

    fn slugs(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn classifies_by_slug() {
        assert_eq!(classify_article_type(&slugs(&["news"]), &map()), ArticleType::News);
        assert_eq!(classify_article_type(&slugs(&["sport"]), &map()), ArticleType::Other);
        assert_eq!(classify_article_type(&[], &map()), ArticleType::Other);
    }

    #[test]
    fn declaration_order_breaks_ties() {
        assert_eq!(
            classify_article_type(&slugs(&["opinion", "news"]), &map()),
            ArticleType::News
        );
        let reversed: Vec<_> = map().into_iter().rev().collect();
        assert_eq!(
            classify_article_type(&slugs(&["news", "opinion"]), &reversed),
            ArticleType::Opinion
        );
    }

    #[test]
    fn validation_flags_bad_fields() {
        let mut c = HarvestConfig::new(
            "http://x",
            DateRange {
                start: NaiveDate::from_ymd_opt(2026, 1, 1).unwrap(),
                end: NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(),
            },
        );
        c.page_size = 0;
        c.min_keyword_matches = 0;
        let fields: Vec<String> = c.validate().into_iter().map(|(f, _)| f).collect();
        assert!(fields.contains(&"page_size".to_string()));
        assert!(fields.contains(&"min_keyword_matches".to_string()));
        assert!(fields.contains(&"date_range".to_string()));
    }

    #[test]
    fn date_range_accepts_toml_dates_and_strings() {
        let want = DateRange {
            start: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2025, 12, 31).unwrap(),
        };
        let bare: DateRange = toml::from_str("start = 2025-01-01\nend = 2025-12-31").unwrap();
        let quoted: DateRange = toml::from_str("start = \"2025-01-01\"\nend = \"2025-12-31\"").unwrap();
        let json: DateRange = serde_json::from_str(&serde_json::to_string(&want).unwrap()).unwrap();
        assert_eq!((bare, quoted, json), (want, want, want));
        assert!(toml::from_str::<DateRange>("start = 2025-13-01\nend = 2025-12-31").is_err());
    }
}
