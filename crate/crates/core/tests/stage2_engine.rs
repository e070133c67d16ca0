use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use bias_audit::mentions::mention_id;
use bias_audit::net::RetryPolicy;
use bias_audit::stage2::{
    build_prompt, misattribution_rate, parse_response, sample_strata, AttributionConfig, Budget, BudgetConfig,
    ChatClient, ChatReply, ChatRequest, ClientError, MessagesClient, ResponseCache, Role, RuleBasedMock,
    SamplingPlan, Sentiment, Stage2Error, Stage2Result, Stratum, REASK,
};
use bias_audit::{ArticleType, Mention};
use bias_audit_testkit as testkit;
use chrono::NaiveDate;

const VALID: &str = r#"{"reasoning": "Reform UK is called reckless.", "on_target": 1, "sentiment": -1}"#;

/// Replays canned replies in order and records every request.
struct Scripted {
    replies: Mutex<VecDeque<Result<String, ClientError>>>,
    fallback: Option<String>,
    calls: AtomicUsize,
    seen: Mutex<Vec<ChatRequest>>,
}

impl Scripted {
    fn new(replies: Vec<Result<&str, ClientError>>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().map(|r| r.map(str::to_string)).collect()),
            fallback: None,
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    fn always(text: &str) -> Self {
        let mut s = Self::new(vec![]);
        s.fallback = Some(text.to_string());
        s
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for Scripted {
    fn send(&self, request: &ChatRequest) -> Result<ChatReply, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().unwrap().push(request.clone());
        let next = self.replies.lock().unwrap().pop_front();
        let text = match next {
            Some(r) => r?,
            None => self.fallback.clone().expect("script ran out"),
        };
        Ok(ChatReply {
            input_tokens: 1000,
            output_tokens: 200,
            text,
        })
    }
}

fn mention(i: usize, party: &str, article_type: ArticleType) -> Mention {
    let article_id = format!("a{i}");
    Mention {
        mention_id: mention_id(&article_id, party, 0),
        article_id,
        party: party.into(),
        anchor_sentence_index: 0,
        window_radius: 1,
        window_text: format!("{party} faced reckless claims in story number {i} about the Senedd."),
        published_at: NaiveDate::from_ymd_opt(2025, 3, 1).unwrap(),
        article_type,
    }
}

fn fast_config() -> AttributionConfig {
    let mut cfg = AttributionConfig::new("test-model");
    cfg.retry = RetryPolicy {
        max_retries: 2,
        base_delay_ms: 1,
        max_delay_ms: 2,
    };
    cfg.max_requests_per_second = 0.0;
    cfg
}

#[test]
fn valid_reply_costs_one_request() {
    let client = Scripted::new(vec![Ok(VALID)]);
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(10.0));
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    let r = a.classify_mention(&mention(1, "Reform UK", ArticleType::News)).unwrap();
    assert_eq!(client.calls(), 1);
    assert_eq!((r.on_target, r.sentiment), (1, Sentiment::StronglyNegative));
    assert_eq!((r.input_tokens, r.output_tokens), (1000, 200));
    assert!((r.cost_usd - 0.006).abs() < 1e-12);
    assert!((budget.spent() - 0.006).abs() < 1e-12);
    let sent = &client.seen.lock().unwrap()[0];
    assert_eq!(sent.temperature, 0.0);
    assert_eq!(sent.max_tokens, 300);
    assert_eq!(sent.messages.len(), 1);
    assert!(sent.messages[0].content.contains("<target>Reform UK</target>"));
}

#[test]
fn malformed_replies_reask_once_then_quarantine() {
    let bad = [
        r#"{"reasoning": "x", "on_target": 1, "sentiment": 0.7}"#,
        r#"{"reasoning": "x", "on_target": 1, "sentiment": 3}"#,
        r#"{"reasoning": "x", "sentiment": -1}"#,
        r#"{"on_target": 1, "sentiment": -1}"#,
        r#"{"reasoning": "x", "on_target": 2, "sentiment": -1}"#,
        "I cannot classify this.",
    ];
    for first in bad {
        for second in bad {
            let client = Scripted::new(vec![Ok(first), Ok(second)]);
            let cache = ResponseCache::in_memory();
            let budget = Budget::new(BudgetConfig::new(10.0));
            let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
            let m = mention(2, "Plaid Cymru", ArticleType::News);
            match a.classify_mention(&m) {
                Err(Stage2Error::Quarantined(q)) => {
                    assert_eq!(q.mention_id, m.mention_id);
                    assert_eq!(q.replies, vec![first.to_string(), second.to_string()]);
                }
                other => panic!("expected quarantine for {first:?}/{second:?}, got {other:?}"),
            }
            assert_eq!(client.calls(), 2, "{first:?}");
            assert!(cache.is_empty());
            let seen = client.seen.lock().unwrap();
            let reask = &seen[1].messages;
            assert_eq!(reask.len(), 3);
            assert_eq!(reask[1].role, Role::Assistant);
            assert_eq!(reask[1].content, first);
            assert_eq!(reask[2].content, REASK);
        }
    }
}

#[test]
fn reask_that_succeeds_is_kept_and_charged_twice() {
    let client = Scripted::new(vec![Ok("```not json```"), Ok(VALID)]);
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(10.0));
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    let r = a.classify_mention(&mention(3, "Reform UK", ArticleType::News)).unwrap();
    assert_eq!(client.calls(), 2);
    assert_eq!((r.input_tokens, r.output_tokens), (2000, 400));
    assert!((r.cost_usd - 0.012).abs() < 1e-12);
    assert_eq!(cache.len(), 1);
}

#[test]
fn zero_budget_sends_nothing() {
    let client = Scripted::always(VALID);
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(0.0));
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    let mentions: Vec<Mention> = (0..20).map(|i| mention(i, "Reform UK", ArticleType::News)).collect();
    let strata = sample_strata(&mentions, &SamplingPlan::with_cap(250, 1));
    let out = a.run(&strata);
    assert_eq!(client.calls(), 0);
    assert_eq!(out.requests, 0);
    assert!(out.results.is_empty());
    assert_eq!(out.exhausted_strata, vec![Stratum::new("Reform UK", ArticleType::News)]);
    assert_eq!(budget.spent(), 0.0);
}

#[test]
fn cache_replay_sends_nothing_even_after_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let mentions: Vec<Mention> = (0..12)
        .map(|i| mention(i, if i % 2 == 0 { "Reform UK" } else { "Labour" }, ArticleType::News))
        .collect();
    let strata = sample_strata(&mentions, &SamplingPlan::with_cap(250, 9));

    let first = {
        let client = Scripted::always(VALID);
        let cache = ResponseCache::open(&path).unwrap();
        let budget = Budget::new(BudgetConfig::new(10.0));
        let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
        let out = a.run(&strata);
        assert_eq!(client.calls(), 12);
        out
    };

    let client = Scripted::new(vec![]);
    let cache = ResponseCache::open(&path).unwrap();
    assert_eq!(cache.len(), 12);
    let budget = Budget::new(BudgetConfig::new(0.0));
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    let again = a.run(&strata);
    assert_eq!(client.calls(), 0);
    assert_eq!(again.cache_hits, 12);
    assert_eq!(again.results, first.results);
}

#[test]
fn cache_key_includes_model_and_prompt_version() {
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(10.0));
    let m = mention(4, "Reform UK", ArticleType::News);
    let client = Scripted::always(VALID);
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    a.classify_mention(&m).unwrap();
    let mut other = fast_config();
    other.model_id = "another-model".into();
    let b = bias_audit::stage2::Attributor::new(&client, &cache, &budget, other).unwrap();
    b.classify_mention(&m).unwrap();
    assert_eq!(client.calls(), 2);
    let mut unknown = fast_config();
    unknown.prompt_version = "v9".into();
    assert!(matches!(
        bias_audit::stage2::Attributor::new(&client, &cache, &budget, unknown),
        Err(Stage2Error::UnknownPromptVersion(_))
    ));
}

#[test]
fn transient_errors_are_retried_then_give_up() {
    let client = Scripted::new(vec![
        Err(ClientError::Transient("503".into())),
        Err(ClientError::Transient("429".into())),
        Ok(VALID),
    ]);
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(10.0));
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    assert!(a.classify_mention(&mention(5, "Reform UK", ArticleType::News)).is_ok());
    assert_eq!(client.calls(), 3);
    assert!((budget.spent() - 0.006).abs() < 1e-12);

    let client = Scripted::new((0..3).map(|_| Err(ClientError::Transient("503".into()))).collect());
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    match a.classify_mention(&mention(6, "Reform UK", ArticleType::News)) {
        Err(Stage2Error::RetriesExhausted { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
    assert_eq!(client.calls(), 3);
}

#[test]
fn terminal_error_aborts_run() {
    let client = Scripted::new(vec![Err(ClientError::Terminal("401".into()))]);
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(10.0));
    let mut cfg = fast_config();
    cfg.concurrency_limit = 1;
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, cfg).unwrap();
    let mentions: Vec<Mention> = (0..5).map(|i| mention(i, "Labour", ArticleType::Opinion)).collect();
    let out = a.run(&sample_strata(&mentions, &SamplingPlan::with_cap(250, 2)));
    assert!(out.aborted.as_ref().unwrap().contains("401"));
    assert_eq!(client.calls(), 1);
    assert!(!out.is_complete());
}

#[test]
fn budget_exhaustion_halts_stratum_within_cap() {
    let client = Scripted::always(VALID);
    let cache = ResponseCache::in_memory();
    // Worst case per request is a little over 0.0075; actual cost 0.006.
    let budget = Budget::new(BudgetConfig::new(0.05));
    let mut cfg = fast_config();
    cfg.concurrency_limit = 4;
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, cfg).unwrap();
    let mut mentions: Vec<Mention> = (0..40).map(|i| mention(i, "Reform UK", ArticleType::News)).collect();
    mentions.extend((40..45).map(|i| mention(i, "Labour", ArticleType::News)));
    let out = a.run(&sample_strata(&mentions, &SamplingPlan::with_cap(250, 3)));
    assert!(budget.spent() <= 0.05 + 1e-12, "spent {}", budget.spent());
    assert!(!out.exhausted_strata.is_empty());
    assert!(out.results.len() < 45);
    assert!(out.results.len() >= 6);
    assert!(out.aborted.is_none());
}

#[test]
fn misattribution_on_fixture() {
    let results: Vec<Stage2Result> = (0..1000)
        .map(|i| Stage2Result {
            mention_id: format!("{i:032}"),
            on_target: u8::from(i >= 334),
            sentiment: Sentiment::Neutral,
            reasoning: "r".into(),
            model_id: "m".into(),
            prompt_version: "v1".into(),
            input_tokens: 0,
            output_tokens: 0,
            cost_usd: 0.0,
        })
        .collect();
    assert!((misattribution_rate(&results).unwrap() - 0.334).abs() < 1e-12);
    assert_eq!(misattribution_rate(&[]), None);
}

#[test]
fn golden_prompt_v1() {
    let got = build_prompt(
        "Critics said Reform UK's reckless plans would hurt Wales. Plaid Cymru disagreed.",
        "Reform UK",
        "v1",
    )
    .unwrap();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden_prompt_v1.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &got).unwrap();
    }
    let want = std::fs::read_to_string(path).unwrap();
    assert_eq!(got, want);
    assert!(!got.contains("{{"));
}

#[test]
fn fixture_replies_parse() {
    let fenced = "Here you go:\n```json\n{\"reasoning\": \"Plaid is the speaker.\", \"on_target\": 0, \"sentiment\": 0}\n```";
    let r = parse_response(fenced).unwrap();
    assert_eq!((r.on_target, r.sentiment), (0, Sentiment::Neutral));
    let stringy = r#"{"reasoning": "Mixed.", "on_target": "1", "sentiment": "-0.5"}"#;
    assert_eq!(parse_response(stringy).unwrap().sentiment, Sentiment::Negative);
}

#[test]
fn messages_client_against_fixture_server() {
    let server = testkit::messages(|body| {
        let prompt = body["messages"][0]["content"].as_str().unwrap_or("");
        if prompt.contains("<target>Labour</target>") {
            r#"{"reasoning": "Labour is the speaker.", "on_target": 0, "sentiment": 0}"#.to_string()
        } else {
            VALID.to_string()
        }
    });
    let client = MessagesClient::new(&format!("{}/v1/messages", server.url()), "sk-test", Duration::from_secs(5)).unwrap();
    let cache = ResponseCache::in_memory();
    let budget = Budget::new(BudgetConfig::new(1.0));
    let a = bias_audit::stage2::Attributor::new(&client, &cache, &budget, fast_config()).unwrap();
    let mut strata = BTreeMap::new();
    strata.insert(
        Stratum::new("Labour", ArticleType::News),
        vec![mention(7, "Labour", ArticleType::News)],
    );
    strata.insert(
        Stratum::new("Reform UK", ArticleType::News),
        vec![mention(8, "Reform UK", ArticleType::News)],
    );
    let out = a.run(&strata);
    assert!(out.is_complete());
    assert_eq!(out.results.len(), 2);
    assert_eq!(
        misattribution_rate(&out.results).unwrap(),
        0.5
    );
    let reqs = server.requests();
    assert_eq!(reqs.len(), 2);
    for r in &reqs {
        assert_eq!(r.method, "POST");
        assert_eq!(r.path, "/v1/messages");
        assert_eq!(r.header("x-api-key"), Some("sk-test"));
        assert_eq!(r.header("anthropic-version"), Some(MessagesClient::DEFAULT_API_VERSION));
        let body = r.json().unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"], 0.0);
    }
    let prompt_tokens = out.results.iter().map(|r| r.input_tokens).sum::<u64>();
    assert!(prompt_tokens > 0);
}

#[test]
fn http_errors_map_to_retry_classes() {
    let server = testkit::FixtureServer::start(|req| {
        let status = if req.path == "/busy" { 529 } else { 401 };
        testkit::Response::json(status, &serde_json::json!({"type": "error"}))
    });
    let req = ChatRequest {
        model: "m".into(),
        messages: vec![bias_audit::stage2::ChatMessage::user("hi")],
        max_tokens: 5,
        temperature: 0.0,
    };
    let busy = MessagesClient::new(&format!("{}/busy", server.url()), "k", Duration::from_secs(5)).unwrap();
    assert!(matches!(busy.send(&req), Err(ClientError::Transient(_))));
    let denied = MessagesClient::new(&format!("{}/auth", server.url()), "k", Duration::from_secs(5)).unwrap();
    assert!(matches!(denied.send(&req), Err(ClientError::Terminal(_))));
}

#[test]
fn mock_is_deterministic_through_engine() {
    let mentions: Vec<Mention> = (0..30)
        .map(|i| mention(i, ["Reform UK", "Plaid Cymru", "Labour"][i % 3], ArticleType::News))
        .collect();
    let strata = sample_strata(&mentions, &SamplingPlan::with_cap(250, 5));
    let run = || {
        let client = RuleBasedMock::default();
        let cache = ResponseCache::in_memory();
        let budget = Budget::new(BudgetConfig::new(5.0));
        let mut cfg = fast_config();
        cfg.concurrency_limit = 8;
        bias_audit::stage2::Attributor::new(&client, &cache, &budget, cfg).unwrap().run(&strata)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.results, b.results);
    assert_eq!(a.results.len(), 30);
}
