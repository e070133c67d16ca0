//! WordPress REST client and the harvest loop.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{Days, NaiveDate, NaiveDateTime};
use serde::Deserialize;
use serde_json::Value;

use super::{
    classify_article_type, html_to_text, ArticleRecord, CorpusError, CorpusStore, Decision,
    HarvestConfig, KeywordGate,
};
use crate::net::{BackoffState, RateLimiter};

#[derive(Debug, thiserror::Error)]
pub enum HarvestError {
    #[error("network error for {url}: {message} (after {} attempts)", .backoff.attempts)]
    Network {
        url: String,
        message: String,
        backoff: BackoffState,
    },
    #[error("HTTP {status} from {url}")]
    Http { url: String, status: u16 },
    #[error("malformed payload from {url}: {message}")]
    Parse { url: String, message: String },
    #[error(transparent)]
    Store(#[from] CorpusError),
}

impl HarvestError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, HarvestError::Network { .. })
    }
}

/// The fields the pipeline needs from a WordPress post object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPost {
    pub id: u64,
    /// Server-reported UTC publication timestamp (`date_gmt`, falling back to `date`).
    pub date: String,
    pub link: String,
    pub title_html: String,
    pub content_html: String,
    pub category_slugs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostPage {
    pub posts: Vec<RawPost>,
    pub has_more: bool,
    pub total_pages: Option<u32>,
}

#[derive(Deserialize)]
struct Rendered {
    rendered: String,
}

#[derive(Deserialize)]
struct WpPost {
    id: u64,
    date: String,
    #[serde(default)]
    date_gmt: Option<String>,
    link: String,
    title: Rendered,
    content: Rendered,
    #[serde(default)]
    categories: Vec<u64>,
    #[serde(default, rename = "_embedded")]
    embedded: Option<Value>,
}

#[derive(Deserialize)]
struct WpCategory {
    id: u64,
    slug: String,
}

pub struct WordPressClient {
    http: reqwest::blocking::Client,
    config: HarvestConfig,
    limiter: RateLimiter,
    categories: Mutex<HashMap<u64, String>>,
}

impl WordPressClient {
    pub fn new(config: HarvestConfig) -> Result<Self, HarvestError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .user_agent(concat!("bias-audit/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| HarvestError::Network {
                url: config.endpoint_base_url.clone(),
                message: e.to_string(),
                backoff: BackoffState {
                    attempts: 0,
                    next_delay: Duration::ZERO,
                },
            })?;
        let limiter = RateLimiter::new(config.max_requests_per_second);
        Ok(Self {
            http,
            config,
            limiter,
            categories: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &HarvestConfig {
        &self.config
    }

    fn route(&self, route: &str) -> String {
        format!(
            "{}/wp-json/wp/v2/{route}",
            self.config.endpoint_base_url.trim_end_matches('/')
        )
    }

    /// WordPress `after`/`before` are exclusive; widen by a second/day so the
    /// configured dates are inclusive.
    fn date_params(&self) -> (String, String) {
        let r = self.config.date_range;
        let after = r.start.checked_sub_days(Days::new(1)).unwrap_or(r.start);
        let before = r.end.checked_add_days(Days::new(1)).unwrap_or(r.end);
        (
            format!("{}T23:59:59", after.format("%Y-%m-%d")),
            format!("{}T00:00:00", before.format("%Y-%m-%d")),
        )
    }

    /// One GET with retries on network errors, 429 and 5xx.
    fn get(&self, url: &str, query: &[(&str, String)]) -> Result<reqwest::blocking::Response, HarvestError> {
        let policy = &self.config.retry;
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire();
            let result = self.http.get(url).query(query).send();
            let retry_reason = match result {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    if status == 429 || status >= 500 {
                        format!("HTTP {status}")
                    } else {
                        return Ok(resp);
                    }
                }
                Err(e) => e.to_string(),
            };
            let backoff = BackoffState {
                attempts: attempt + 1,
                next_delay: policy.delay(attempt),
            };
            if attempt >= policy.max_retries {
                return Err(HarvestError::Network {
                    url: url.to_string(),
                    message: retry_reason,
                    backoff,
                });
            }
            tracing::warn!(url, attempt, reason = %retry_reason, "retrying");
            std::thread::sleep(backoff.next_delay);
            attempt += 1;
        }
    }

    /// Loads the category id → slug table. A site without the route yields an
    /// empty table.
    pub fn load_categories(&self) -> Result<usize, HarvestError> {
        let url = self.route("categories");
        let mut table = HashMap::new();
        let mut page = 1u32;
        loop {
            let resp = self.get(&url, &[("page", page.to_string()), ("per_page", "100".into())])?;
            let status = resp.status().as_u16();
            if status == 404 {
                break;
            }
            let total_pages = total_pages(&resp);
            let body = resp.text().map_err(|e| HarvestError::Parse {
                url: url.clone(),
                message: e.to_string(),
            })?;
            if status == 400 && is_page_overflow(&body) {
                break;
            }
            if status != 200 {
                return Err(HarvestError::Http { url, status });
            }
            let cats: Vec<WpCategory> = serde_json::from_str(&body).map_err(|e| HarvestError::Parse {
                url: url.clone(),
                message: e.to_string(),
            })?;
            let empty = cats.is_empty();
            table.extend(cats.into_iter().map(|c| (c.id, c.slug)));
            match total_pages {
                Some(n) if page < n => page += 1,
                None if !empty => page += 1,
                _ => break,
            }
        }
        let n = table.len();
        *self.categories.lock().unwrap() = table;
        Ok(n)
    }

    /// Fetches one page of posts. Past the last page WordPress answers 400,
    /// which maps to an empty page with `has_more = false`.
    pub fn fetch_article_page(&self, page: u32, search: Option<&str>) -> Result<PostPage, HarvestError> {
        assert!(page >= 1, "pages are 1-based");
        let url = self.route("posts");
        let (after, before) = self.date_params();
        let mut query = vec![
            ("page", page.to_string()),
            ("per_page", self.config.page_size.to_string()),
            ("after", after),
            ("before", before),
        ];
        if let Some(kw) = search {
            query.insert(0, ("search", kw.to_string()));
        }
        let resp = self.get(&url, &query)?;
        let status = resp.status().as_u16();
        let total = total_pages(&resp);
        let body = resp.text().map_err(|e| HarvestError::Parse {
            url: url.clone(),
            message: e.to_string(),
        })?;
        if status == 400 && is_page_overflow(&body) {
            return Ok(PostPage {
                posts: Vec::new(),
                has_more: false,
                total_pages: total,
            });
        }
        if status != 200 {
            return Err(HarvestError::Http { url, status });
        }
        let posts = self.parse_posts(&url, &body)?;
        let has_more = match total {
            Some(n) => page < n,
            None => posts.len() as u32 >= self.config.page_size,
        };
        Ok(PostPage {
            posts,
            has_more,
            total_pages: total,
        })
    }

    fn parse_posts(&self, url: &str, body: &str) -> Result<Vec<RawPost>, HarvestError> {
        let items: Vec<Value> = serde_json::from_str(body).map_err(|e| HarvestError::Parse {
            url: url.to_string(),
            message: format!("response is not a JSON array: {e}"),
        })?;
        let cats = self.categories.lock().unwrap();
        items
            .into_iter()
            .enumerate()
            .map(|(idx, item)| {
                let id_hint = item.get("id").map(|v| v.to_string()).unwrap_or_else(|| "?".into());
                let post: WpPost = serde_json::from_value(item).map_err(|e| HarvestError::Parse {
                    url: url.to_string(),
                    message: format!("record {idx} (id {id_hint}): {e}"),
                })?;
                let mut slugs: Vec<String> = post
                    .categories
                    .iter()
                    .filter_map(|id| cats.get(id).cloned())
                    .collect();
                for s in embedded_category_slugs(post.embedded.as_ref()) {
                    if !slugs.contains(&s) {
                        slugs.push(s);
                    }
                }
                Ok(RawPost {
                    id: post.id,
                    date: post.date_gmt.filter(|d| !d.is_empty()).unwrap_or(post.date),
                    link: post.link,
                    title_html: post.title.rendered,
                    content_html: post.content.rendered,
                    category_slugs: slugs,
                })
            })
            .collect()
    }

    /// Every page for one query. Page 1 tells us the page count; the rest are
    /// fetched concurrently up to `concurrency_limit`.
    fn fetch_all(&self, search: Option<&str>) -> Result<Vec<RawPost>, HarvestError> {
        let first = self.fetch_article_page(1, search)?;
        let mut posts = first.posts;
        if !first.has_more {
            return Ok(posts);
        }
        match first.total_pages {
            Some(total) => {
                let pages: Vec<u32> = (2..=total).collect();
                let next = AtomicUsize::new(0);
                let results: Mutex<Vec<(u32, Result<PostPage, HarvestError>)>> = Mutex::new(Vec::new());
                let workers = self.config.concurrency_limit.max(1).min(pages.len());
                std::thread::scope(|s| {
                    for _ in 0..workers {
                        s.spawn(|| loop {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            let Some(&page) = pages.get(i) else { break };
                            let r = self.fetch_article_page(page, search);
                            results.lock().unwrap().push((page, r));
                        });
                    }
                });
                let mut results = results.into_inner().unwrap();
                results.sort_by_key(|(p, _)| *p);
                for (_, r) in results {
                    posts.extend(r?.posts);
                }
            }
            None => {
                let mut page = 2;
                loop {
                    let p = self.fetch_article_page(page, search)?;
                    posts.extend(p.posts);
                    if !p.has_more {
                        break;
                    }
                    page += 1;
                }
            }
        }
        Ok(posts)
    }
}

fn total_pages(resp: &reqwest::blocking::Response) -> Option<u32> {
    resp.headers()
        .get("x-wp-totalpages")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
}

fn is_page_overflow(body: &str) -> bool {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.get("code").and_then(Value::as_str).map(|c| c.contains("invalid_page_number")))
        .unwrap_or(false)
}

fn embedded_category_slugs(embedded: Option<&Value>) -> Vec<String> {
    let Some(groups) = embedded.and_then(|e| e.get("wp:term")).and_then(Value::as_array) else {
        return Vec::new();
    };
    groups
        .iter()
        .filter_map(Value::as_array)
        .flatten()
        .filter(|t| t.get("taxonomy").and_then(Value::as_str) == Some("category"))
        .filter_map(|t| t.get("slug").and_then(Value::as_str).map(str::to_string))
        .collect()
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .map(|dt| dt.date())
        .or_else(|_| NaiveDate::parse_from_str(raw.get(..10).unwrap_or(raw), "%Y-%m-%d"))
        .ok()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestOutcome {
    pub fetched: usize,
    pub out_of_range: usize,
    pub below_keyword_gate: usize,
    pub kept: usize,
    pub appended: usize,
}

/// Pulls every matching post, applies the date window and keyword gate
/// client-side, and appends unseen articles to the store in
/// (published_at, article_id) order.
pub fn harvest(client: &WordPressClient, store: &CorpusStore) -> Result<HarvestOutcome, HarvestError> {
    let config = client.config();
    client.load_categories()?;
    let mut unique: BTreeMap<u64, RawPost> = BTreeMap::new();
    if config.server_side_search {
        for kw in &config.keyword_list {
            for p in client.fetch_all(Some(kw))? {
                unique.entry(p.id).or_insert(p);
            }
        }
    } else {
        for p in client.fetch_all(None)? {
            unique.entry(p.id).or_insert(p);
        }
    }

    let gate = KeywordGate::new(&config.keyword_list, config.min_keyword_matches);
    let mut outcome = HarvestOutcome {
        fetched: unique.len(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for post in unique.into_values() {
        let Some(published_at) = parse_date(&post.date) else {
            return Err(HarvestError::Parse {
                url: post.link,
                message: format!("unparseable date {:?}", post.date),
            });
        };
        if !config.date_range.contains(published_at) {
            outcome.out_of_range += 1;
            continue;
        }
        let title = html_to_text(&post.title_html).replace('\n', " ");
        let body_text = html_to_text(&post.content_html);
        let verdict = gate.evaluate(&title, &body_text);
        if verdict.decision == Decision::Drop {
            outcome.below_keyword_gate += 1;
            continue;
        }
        records.push(ArticleRecord {
            article_id: post.id.to_string(),
            url: post.link,
            published_at,
            title,
            body_html: post.content_html,
            body_text,
            article_type: classify_article_type(&post.category_slugs, &config.category_type_map),
            keywords_matched: verdict.matched,
        });
    }
    records.sort_by(|a, b| {
        a.published_at
            .cmp(&b.published_at)
            .then_with(|| a.article_id.cmp(&b.article_id))
    });
    outcome.kept = records.len();
    outcome.appended = store.append_new(&records)?;
    Ok(outcome)
}
