//! Rebuilds the published head-to-head table from a record-level fixture
//! whose counts and score distribution reproduce the published figures.

use bias_audit::mentions::mention_id;
use bias_audit::stage1::{BiasLabel, Stage1Label};
use bias_audit::stage2::{Sentiment, Stage2Result};
use bias_audit::stats::{
    emit_reports, figure_data, render_primary_table, BaselineMode, Dataset, ReportManifest, StatsReport,
    TtestVariant, REPORT_FILES,
};
use bias_audit::{ArticleType, Mention};
use chrono::NaiveDate;

struct PartyCounts {
    party: &'static str,
    total: usize,
    off_target: usize,
    /// On-target counts for sentiments -1, -0.5, 0, 0.5, 1.
    on_target: [usize; 5],
}

const REFORM: PartyCounts = PartyCounts {
    party: "Reform UK",
    total: 7237,
    off_target: 200,
    on_target: [668, 317, 139, 0, 0],
};

const PLAID: PartyCounts = PartyCounts {
    party: "Plaid Cymru",
    total: 8346,
    off_target: 150,
    on_target: [147, 235, 103, 25, 119],
};

fn build(pc: &PartyCounts, out: &mut (Vec<Mention>, Vec<Stage1Label>, Vec<Stage2Result>)) {
    let mut i = 0usize;
    let mut push = |biased: bool, result: Option<(u8, Sentiment)>| {
        let article_id = format!("{}-{i}", pc.party);
        let id = mention_id(&article_id, pc.party, 0);
        out.0.push(Mention {
            mention_id: id.clone(),
            article_id,
            party: pc.party.into(),
            anchor_sentence_index: 0,
            window_radius: 1,
            window_text: String::new(),
            published_at: NaiveDate::from_ymd_opt(2025, 1, 1).unwrap(),
            article_type: ArticleType::News,
        });
        out.1.push(Stage1Label {
            mention_id: id.clone(),
            label: if biased { BiasLabel::Biased } else { BiasLabel::NonBiased },
            score: if biased { 0.9 } else { 0.1 },
            backend_id: "fixture".into(),
        });
        if let Some((on_target, sentiment)) = result {
            out.2.push(Stage2Result {
                mention_id: id,
                on_target,
                sentiment,
                reasoning: "fixture".into(),
                model_id: "fixture".into(),
                prompt_version: "v1".into(),
                input_tokens: 0,
                output_tokens: 0,
                cost_usd: 0.0,
            });
        }
        i += 1;
    };
    for (k, &n) in pc.on_target.iter().enumerate() {
        for _ in 0..n {
            push(true, Some((1, Sentiment::ALL[k])));
        }
    }
    for _ in 0..pc.off_target {
        push(true, Some((0, Sentiment::Neutral)));
    }
    let rest = pc.total - pc.on_target.iter().sum::<usize>() - pc.off_target;
    for _ in 0..rest {
        push(false, None);
    }
}

fn fixture() -> (Vec<Mention>, Vec<Stage1Label>, Vec<Stage2Result>) {
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    build(&REFORM, &mut out);
    build(&PLAID, &mut out);
    out
}

const EXPECTED: &str = "\tReform UK\tPlaid Cymru
Total mentions\t7,237\t8,346
On-target biased (% of total)\t1,124 (15.5%)\t629 (7.5%)
Mean sentiment\t-0.735\t-0.211
Strongly negative (% of total)\t668 (9.2%)\t147 (1.8%)
Bias rate z-test\tz = 15.75, p < 0.001, h = 0.25
Sentiment t-test\tt = -20.93, p < 0.001, d = -1.04
";

#[test]
fn sentiment_scale_is_ordered() {
    let values: Vec<f64> = Sentiment::ALL.iter().map(|s| s.value()).collect();
    assert_eq!(values, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
}

#[test]
fn summaries_match_published_counts() {
    let (m, l, r) = fixture();
    let ds = Dataset::new(&m, &l, &r).unwrap();
    let reform = ds.summarize("Reform UK", ArticleType::News);
    let plaid = ds.summarize("Plaid Cymru", ArticleType::News);
    assert_eq!((reform.total_mentions, reform.on_target_biased), (7237, 1124));
    assert_eq!((plaid.total_mentions, plaid.on_target_biased), (8346, 629));
    assert_eq!(reform.off_target_biased, 200);
    assert_eq!(reform.stage1_biased, 1324);
    assert_eq!(reform.strongly_negative_count, 668);
    assert_eq!(plaid.strongly_negative_count, 147);
    assert!((reform.mean_sentiment.unwrap() - (-826.5 / 1124.0)).abs() < 1e-12);
    assert!((plaid.mean_sentiment.unwrap() - (-133.0 / 629.0)).abs() < 1e-12);
    assert!((reform.bias_rate - 0.155).abs() < 0.0005);
    assert!((plaid.bias_rate - 0.075).abs() < 0.0005);
}

#[test]
fn primary_table_renders_published_strings() {
    let (m, l, r) = fixture();
    let ds = Dataset::new(&m, &l, &r).unwrap();
    let summaries = vec![
        ds.summarize("Reform UK", ArticleType::News),
        ds.summarize("Plaid Cymru", ArticleType::News),
    ];
    let report = StatsReport::compare(&summaries, "Reform UK", "Plaid Cymru", ArticleType::News, TtestVariant::Pooled)
        .unwrap();
    assert!(report.notes.is_empty(), "{:?}", report.notes);
    let t = report.sentiment_test.as_ref().unwrap();
    assert!((t.t - (-20.930841204482405)).abs() < 1e-9);
    assert!((t.d - (-1.0422434214247105)).abs() < 1e-9);
    assert_eq!(t.df, 1751.0);
    assert_eq!(render_primary_table(&summaries, &report).unwrap(), EXPECTED);
}

#[test]
fn emitted_reports_are_byte_stable() {
    let (m, l, r) = fixture();
    let ds = Dataset::new(&m, &l, &r).unwrap();
    let summaries = vec![
        ds.summarize("Reform UK", ArticleType::News),
        ds.summarize("Plaid Cymru", ArticleType::News),
    ];
    let report = StatsReport::compare(&summaries, "Reform UK", "Plaid Cymru", ArticleType::News, TtestVariant::Pooled)
        .unwrap();
    let (rows, _) = figure_data(&summaries, &[ArticleType::News], &BaselineMode::Computed).unwrap();
    let manifest = ReportManifest {
        config_hash: "abc".into(),
        seed: 7,
        prompt_version: "v1".into(),
        model_id: "fixture".into(),
        stage1_backend: "fixture".into(),
        ..Default::default()
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_reports(&summaries, &report, &rows, &manifest, d1.path()).unwrap();
    emit_reports(&summaries, &report, &rows, &manifest, d2.path()).unwrap();
    for f in REPORT_FILES {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        let b = std::fs::read(d2.path().join(f)).unwrap();
        assert!(!a.is_empty(), "{f}");
        assert_eq!(a, b, "{f}");
    }
    let table = std::fs::read_to_string(d1.path().join("primary_table.tsv")).unwrap();
    assert_eq!(table, EXPECTED);
}

#[test]
fn dangling_result_is_an_integrity_error() {
    let (m, l, mut r) = fixture();
    r[0].mention_id = "ffffffffffffffffffffffffffffffff".into();
    assert!(Dataset::new(&m, &l, &r).is_err());
}
