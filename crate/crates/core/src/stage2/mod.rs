//! Stage 2: target attribution and five-point sentiment from a remote LLM.

mod budget;
mod cache;
mod client;
mod parse;
mod prompt;
mod sampling;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::jsonl::JsonlError;
use crate::mentions::Mention;
use crate::net::{RateLimiter, RetryPolicy};

pub use budget::{Budget, BudgetConfig, BudgetExhausted, Reservation};
pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use client::{ChatClient, ChatMessage, ChatReply, ChatRequest, ClientError, MessagesClient, Role, RuleBasedMock};
pub use parse::{parse_response, MalformedResponse, ParsedReply};
pub use prompt::{build_prompt, known_versions, REASK};
pub use sampling::{sample_strata, SamplingPlan, Stratum};

/// The five-point categorical scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum Sentiment {
    StronglyNegative,
    Negative,
    Neutral,
    Positive,
    StronglyPositive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 5] = [
        Sentiment::StronglyNegative,
        Sentiment::Negative,
        Sentiment::Neutral,
        Sentiment::Positive,
        Sentiment::StronglyPositive,
    ];

    pub fn value(self) -> f64 {
        match self {
            Sentiment::StronglyNegative => -1.0,
            Sentiment::Negative => -0.5,
            Sentiment::Neutral => 0.0,
            Sentiment::Positive => 0.5,
            Sentiment::StronglyPositive => 1.0,
        }
    }

    pub fn from_value(v: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|s| (s.value() - v).abs() < 1e-9)
    }
}

impl TryFrom<f64> for Sentiment {
    type Error = String;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::from_value(v).ok_or_else(|| format!("{v} is not on the five-point scale"))
    }
}

impl From<Sentiment> for f64 {
    fn from(s: Sentiment) -> f64 {
        s.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Result {
    pub mention_id: String,
    pub on_target: u8,
    pub sentiment: Sentiment,
    pub reasoning: String,
    pub model_id: String,
    pub prompt_version: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub cost_usd: f64,
}

impl Stage2Result {
    pub fn is_on_target(&self) -> bool {
        self.on_target == 1
    }
}

/// A mention whose replies stayed malformed after the re-ask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub mention_id: String,
    pub party: String,
    pub reason: String,
    pub replies: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum Stage2Error {
    #[error("unknown prompt version {0:?}")]
    UnknownPromptVersion(String),
    #[error(transparent)]
    BudgetExhausted(#[from] BudgetExhausted),
    #[error("mention {} quarantined: {}", .0.mention_id, .0.reason)]
    Quarantined(Box<QuarantineRecord>),
    #[error("gave up after {attempts} attempts: {message}")]
    RetriesExhausted { attempts: u32, message: String },
    #[error("request failed: {0}")]
    Terminal(String),
    #[error("cache: {0}")]
    Cache(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionConfig {
    pub model_id: String,
    #[serde(default = "AttributionConfig::default_prompt_version")]
    pub prompt_version: String,
    #[serde(default = "AttributionConfig::default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "AttributionConfig::default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default = "AttributionConfig::default_rate")]
    pub max_requests_per_second: f64,
}

impl AttributionConfig {
    fn default_prompt_version() -> String {
        "v1".into()
    }
    fn default_max_tokens() -> u32 {
        300
    }
    fn default_concurrency() -> usize {
        4
    }
    fn default_rate() -> f64 {
        4.0
    }

    pub fn new(model_id: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            prompt_version: Self::default_prompt_version(),
            max_output_tokens: Self::default_max_tokens(),
            temperature: 0.0,
            retry: RetryPolicy::default(),
            concurrency_limit: Self::default_concurrency(),
            max_requests_per_second: Self::default_rate(),
        }
    }
}

/// Stage 2 engine: one client, one cache, one budget, one rate limiter.
pub struct Attributor<'a> {
    client: &'a dyn ChatClient,
    cache: &'a ResponseCache,
    budget: &'a Budget,
    limiter: RateLimiter,
    config: AttributionConfig,
    requests: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl<'a> Attributor<'a> {
    pub fn new(
        client: &'a dyn ChatClient,
        cache: &'a ResponseCache,
        budget: &'a Budget,
        config: AttributionConfig,
    ) -> Result<Self, Stage2Error> {
        prompt::template(&config.prompt_version)?;
        Ok(Self {
            client,
            cache,
            budget,
            limiter: RateLimiter::new(config.max_requests_per_second),
            config,
            requests: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    /// Requests actually sent, retries and re-asks included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn config(&self) -> &AttributionConfig {
        &self.config
    }

    /// Classifies one mention against its own party.
    pub fn classify_mention(&self, mention: &Mention) -> Result<Stage2Result, Stage2Error> {
        let cfg = &self.config;
        let key = cache_key(&cfg.prompt_version, &cfg.model_id, &mention.party, &mention.window_text);
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(Stage2Result {
                mention_id: mention.mention_id.clone(),
                on_target: hit.on_target,
                sentiment: hit.sentiment,
                reasoning: hit.reasoning,
                model_id: hit.model_id,
                prompt_version: hit.prompt_version,
                input_tokens: hit.input_tokens,
                output_tokens: hit.output_tokens,
                cost_usd: hit.cost_usd,
            });
        }

        let prompt = build_prompt(&mention.window_text, &mention.party, &cfg.prompt_version)?;
        let mut messages = vec![ChatMessage::user(prompt)];
        let mut usage = (0u64, 0u64, 0.0f64);
        let mut replies = Vec::new();

        let first = self.send(&messages, &mut usage)?;
        let parsed = match parse_response(&first.text) {
            Ok(p) => p,
            Err(first_err) => {
                tracing::info!(mention_id = %mention.mention_id, error = %first_err, "re-asking");
                replies.push(first.text.clone());
                messages.push(ChatMessage::assistant(first.text));
                messages.push(ChatMessage::user(REASK));
                let second = self.send(&messages, &mut usage)?;
                match parse_response(&second.text) {
                    Ok(p) => p,
                    Err(e) => {
                        replies.push(second.text);
                        return Err(Stage2Error::Quarantined(Box::new(QuarantineRecord {
                            mention_id: mention.mention_id.clone(),
                            party: mention.party.clone(),
                            reason: e.0,
                            replies,
                        })));
                    }
                }
            }
        };

        let (input_tokens, output_tokens, cost_usd) = usage;
        self.cache.insert(CacheEntry {
            key,
            on_target: parsed.on_target,
            sentiment: parsed.sentiment,
            reasoning: parsed.reasoning.clone(),
            model_id: cfg.model_id.clone(),
            prompt_version: cfg.prompt_version.clone(),
            input_tokens,
            output_tokens,
            cost_usd,
        })?;
        Ok(Stage2Result {
            mention_id: mention.mention_id.clone(),
            on_target: parsed.on_target,
            sentiment: parsed.sentiment,
            reasoning: parsed.reasoning,
            model_id: cfg.model_id.clone(),
            prompt_version: cfg.prompt_version.clone(),
            input_tokens,
            output_tokens,
            cost_usd,
        })
    }

    /// One logical request: budget gate, then sends with backoff on
    /// transient failures. Cost is charged from reported usage.
    fn send(&self, messages: &[ChatMessage], usage: &mut (u64, u64, f64)) -> Result<ChatReply, Stage2Error> {
        let request = ChatRequest {
            model: self.config.model_id.clone(),
            messages: messages.to_vec(),
            max_tokens: self.config.max_output_tokens,
            temperature: self.config.temperature,
        };
        let policy = &self.config.retry;
        let mut attempt = 0u32;
        loop {
            let estimate = self.budget.config().worst_case_cost(
                request.prompt_bytes(),
                request.messages.len(),
                request.max_tokens,
            );
            let reservation = self.budget.reserve(estimate)?;
            self.limiter.acquire();
            self.requests.fetch_add(1, Ordering::SeqCst);
            match self.client.send(&request) {
                Ok(reply) => {
                    let cost = self.budget.config().cost(reply.input_tokens, reply.output_tokens);
                    self.budget.settle(reservation, cost);
                    usage.0 += reply.input_tokens;
                    usage.1 += reply.output_tokens;
                    usage.2 += cost;
                    return Ok(reply);
                }
                Err(ClientError::Transient(msg)) => {
                    self.budget.release(reservation);
                    if attempt >= policy.max_retries {
                        return Err(Stage2Error::RetriesExhausted {
                            attempts: attempt + 1,
                            message: msg,
                        });
                    }
                    tracing::warn!(attempt, error = %msg, "transient LLM failure, backing off");
                    std::thread::sleep(policy.delay(attempt));
                    attempt += 1;
                }
                Err(ClientError::Terminal(msg)) => {
                    self.budget.release(reservation);
                    return Err(Stage2Error::Terminal(msg));
                }
            }
        }
    }

    /// Runs every stratum with bounded concurrency. Budget exhaustion stops
    /// the stratum it happens in; terminal failures stop the whole run.
    /// Results are ordered by `mention_id`.
    pub fn run(&self, strata: &BTreeMap<Stratum, Vec<Mention>>) -> RunOutcome {
        let mut outcome = RunOutcome::default();
        let abort = AtomicBool::new(false);
        for (stratum, mentions) in strata {
            if abort.load(Ordering::SeqCst) {
                break;
            }
            let next = AtomicUsize::new(0);
            let stop = AtomicBool::new(false);
            let results = Mutex::new(Vec::new());
            let quarantined = Mutex::new(Vec::new());
            let exhausted = AtomicBool::new(false);
            let fatal: Mutex<Option<String>> = Mutex::new(None);
            let workers = self.config.concurrency_limit.max(1).min(mentions.len().max(1));
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(|| loop {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(m) = mentions.get(i) else { break };
                        match self.classify_mention(m) {
                            Ok(r) => results.lock().unwrap().push(r),
                            Err(Stage2Error::Quarantined(q)) => quarantined.lock().unwrap().push(*q),
                            Err(Stage2Error::BudgetExhausted(e)) => {
                                tracing::warn!(%stratum, error = %e, "halting stratum");
                                exhausted.store(true, Ordering::SeqCst);
                                stop.store(true, Ordering::SeqCst);
                            }
                            Err(e) => {
                                fatal.lock().unwrap().get_or_insert(format!("{}: {e}", m.mention_id));
                                stop.store(true, Ordering::SeqCst);
                                abort.store(true, Ordering::SeqCst);
                            }
                        }
                    });
                }
            });
            outcome.results.extend(results.into_inner().unwrap());
            outcome.quarantined.extend(quarantined.into_inner().unwrap());
            if exhausted.load(Ordering::SeqCst) {
                outcome.exhausted_strata.push(stratum.clone());
            }
            if let Some(f) = fatal.into_inner().unwrap() {
                outcome.aborted = Some(f);
            }
        }
        outcome.results.sort_by(|a, b| a.mention_id.cmp(&b.mention_id));
        outcome.quarantined.sort_by(|a, b| a.mention_id.cmp(&b.mention_id));
        outcome.requests = self.request_count();
        outcome.cache_hits = self.cache_hits();
        outcome
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub results: Vec<Stage2Result>,
    pub quarantined: Vec<QuarantineRecord>,
    pub exhausted_strata: Vec<Stratum>,
    pub aborted: Option<String>,
    pub requests: usize,
    pub cache_hits: usize,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.exhausted_strata.is_empty() && self.aborted.is_none()
    }
}

/// Share of Stage-2-classified mentions judged off target. Absent for no input.
pub fn misattribution_rate(results: &[Stage2Result]) -> Option<f64> {
    if results.is_empty() {
        return None;
    }
    let off = results.iter().filter(|r| r.on_target == 0).count();
    Some(off as f64 / results.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentiment_scale_round_trips() {
        for s in Sentiment::ALL {
            assert_eq!(Sentiment::from_value(s.value()), Some(s));
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<Sentiment>(&json).unwrap(), s);
        }
        assert_eq!(Sentiment::from_value(0.3), None);
        assert!(serde_json::from_str::<Sentiment>("0.25").is_err());
    }

    fn result(on_target: u8) -> Stage2Result {
        Stage2Result {
            mention_id: "m".into(),
            on_target,
            sentiment: Sentiment::Neutral,
            reasoning: "r".into(),
            model_id: "x".into(),
            prompt_version: "v1".into(),
            input_tokens: 0,
            output_tokens: 0,
            cost_usd: 0.0,
        }
    }

    #[test]
    fn misattribution_arithmetic() {
        let mut rs: Vec<Stage2Result> = (0..8).map(|_| result(1)).collect();
        assert_eq!(misattribution_rate(&rs), Some(0.0));
        for r in rs.iter_mut().take(3) {
            r.on_target = 0;
        }
        assert_eq!(misattribution_rate(&rs), Some(0.375));
        assert_eq!(misattribution_rate(&[]), None);
    }
}
