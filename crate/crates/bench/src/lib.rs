//! Synthetic inputs shared by the benchmarks.

use bias_audit::corpus::ArticleType;
use bias_audit::ArticleRecord;
use chrono::NaiveDate;

const SENTENCES: [&str; 6] = [
    "Plaid Cymru set out its plans for the Senedd budget on Tuesday.",
    "Critics said Reform UK ran a reckless and divisive campaign.",
    "Welsh Labour ministers defended the record on health waiting times.",
    "The Conservatives called the proposal a shambles.",
    "Dr. Evans said the figures were published in St. Asaph.",
    "Members will vote next week.",
];

/// An article of `n` sentences cycling through a fixed set.
pub fn article(id: usize, n: usize) -> ArticleRecord {
    let body: Vec<&str> = (0..n).map(|i| SENTENCES[(i + id) % SENTENCES.len()]).collect();
    let body_text = body.join(" ");
    ArticleRecord {
        article_id: format!("bench-{id}"),
        url: format!("https://example.org/{id}"),
        published_at: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        title: "Senedd politics".into(),
        body_html: format!("<p>{body_text}</p>"),
        body_text,
        article_type: ArticleType::News,
        keywords_matched: Default::default(),
    }
}

/// Deterministic pseudo-random five-point scores.
pub fn scores(n: usize, salt: u64) -> Vec<f64> {
    let mut x = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            [-1.0, -0.5, 0.0, 0.5, 1.0][(x >> 33) as usize % 5]
        })
        .collect()
}
