//! Report files: primary table, figure data, stats records and manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FigureRow, PartySummary, StatsError, StatsReport};
use crate::jsonl;

pub const REPORT_FILES: [&str; 4] = ["primary_table.tsv", "figure_data.jsonl", "stats.jsonl", "manifest.txt"];

/// Values recorded in `manifest.txt`. Nothing time-dependent goes here.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportManifest {
    pub config_hash: String,
    pub seed: u64,
    pub prompt_version: String,
    pub model_id: String,
    pub stage1_backend: String,
    pub quarantined: u64,
    pub cost_usd: f64,
    pub counts: BTreeMap<String, u64>,
}

impl ReportManifest {
    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config_hash: {}", self.config_hash);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "prompt_version: {}", self.prompt_version);
        let _ = writeln!(out, "model_id: {}", self.model_id);
        let _ = writeln!(out, "stage1_backend: {}", self.stage1_backend);
        let _ = writeln!(out, "quarantined: {}", self.quarantined);
        let _ = writeln!(out, "cost_usd: {:.6}", self.cost_usd);
        for (k, v) in &self.counts {
            let _ = writeln!(out, "count.{k}: {v}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum StatsRecord {
    Comparison(StatsReport),
    Summary(PartySummary),
}

fn fixed(x: f64, dp: usize) -> String {
    let s = format!("{x:.dp$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn count_with_rate(count: u64, total: u64) -> String {
    if total == 0 {
        return format!("{} (n/a)", thousands(count));
    }
    format!("{} ({}%)", thousands(count), fixed(100.0 * count as f64 / total as f64, 1))
}

fn p_value(p: f64) -> String {
    if p < 0.001 {
        "p < 0.001".into()
    } else {
        format!("p = {}", fixed(p, 3))
    }
}

/// Tab-separated table with the same rows as the published primary table.
pub fn render_primary_table(summaries: &[PartySummary], report: &StatsReport) -> Result<String, StatsError> {
    let find = |p: &str| {
        summaries
            .iter()
            .find(|s| s.party == p && s.article_type == report.article_type)
            .ok_or_else(|| StatsError::MissingStratum(format!("{p}/{}", report.article_type)))
    };
    let (a, b) = (find(&report.party_a)?, find(&report.party_b)?);
    let mut out = String::new();
    let mut row = |label: &str, cells: [String; 2]| {
        let _ = writeln!(out, "{label}\t{}\t{}", cells[0], cells[1]);
    };
    row("", [a.party.clone(), b.party.clone()]);
    row("Total mentions", [thousands(a.total_mentions), thousands(b.total_mentions)]);
    row(
        "On-target biased (% of total)",
        [
            count_with_rate(a.on_target_biased, a.total_mentions),
            count_with_rate(b.on_target_biased, b.total_mentions),
        ],
    );
    let mean = |s: &PartySummary| s.mean_sentiment.map_or("n/a".to_string(), |m| fixed(m, 3));
    row("Mean sentiment", [mean(a), mean(b)]);
    row(
        "Strongly negative (% of total)",
        [
            count_with_rate(a.strongly_negative_count, a.total_mentions),
            count_with_rate(b.strongly_negative_count, b.total_mentions),
        ],
    );
    let z = report.bias_rate_test.as_ref().map_or("n/a".to_string(), |t| {
        format!("z = {}, {}, h = {}", fixed(t.z, 2), p_value(t.p), fixed(t.h, 2))
    });
    let _ = writeln!(out, "Bias rate z-test\t{z}");
    let t = report.sentiment_test.as_ref().map_or("n/a".to_string(), |t| {
        format!("t = {}, {}, d = {}", fixed(t.t, 2), p_value(t.p), fixed(t.d, 2))
    });
    let _ = writeln!(out, "Sentiment t-test\t{t}");
    Ok(out)
}

/// Writes the four report files into `out_dir`. Output depends only on the
/// arguments, so identical inputs give identical bytes.
pub fn emit_reports(
    summaries: &[PartySummary],
    report: &StatsReport,
    figure: &[FigureRow],
    manifest: &ReportManifest,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, StatsError> {
    if summaries.is_empty() {
        return Err(StatsError::Empty);
    }
    let paths: Vec<PathBuf> = REPORT_FILES.iter().map(|f| out_dir.join(f)).collect();
    jsonl::write_bytes_atomic(&paths[0], render_primary_table(summaries, report)?.as_bytes())?;
    jsonl::write_atomic(&paths[1], figure)?;
    let mut records = vec![StatsRecord::Comparison(report.clone())];
    records.extend(summaries.iter().cloned().map(StatsRecord::Summary));
    jsonl::write_atomic(&paths[2], &records)?;
    jsonl::write_bytes_atomic(&paths[3], manifest.render().as_bytes())?;
    Ok(paths)
}
