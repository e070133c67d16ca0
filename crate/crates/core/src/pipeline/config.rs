//! The single TOML config that drives every stage.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::corpus::{ArticleType, DateRange, HarvestConfig};
use crate::mentions::{default_alias_sets, PartyAliasSet};
use crate::net::RetryPolicy;
use crate::stage1::InferenceBackendSpec;
use crate::stage2::{AttributionConfig, BudgetConfig, SamplingPlan, Stratum};
use crate::stats::{BaselineMode, TtestVariant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Absent when the corpus file is supplied directly.
    #[serde(default)]
    pub harvest: Option<HarvestConfig>,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default = "InferenceBackendSpec::lexicon")]
    pub stage1: InferenceBackendSpec,
    pub stage2: Stage2Config,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub review: ReviewConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    #[serde(default = "default_alias_sets")]
    pub aliases: Vec<PartyAliasSet>,
    #[serde(default = "ExtractConfig::default_radius")]
    pub window_radius: usize,
    #[serde(default = "ExtractConfig::default_min_chars")]
    pub min_sentence_chars: usize,
}

impl ExtractConfig {
    fn default_radius() -> usize {
        1
    }
    fn default_min_chars() -> usize {
        30
    }
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            aliases: default_alias_sets(),
            window_radius: Self::default_radius(),
            min_sentence_chars: Self::default_min_chars(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Anthropic,
    /// Offline rule-based stand-in for dry runs and tests.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "SamplingConfig::default_cap")]
    pub cap_per_stratum: usize,
    /// Strata sent to Stage 2 in full.
    #[serde(default)]
    pub exempt: Vec<Stratum>,
}

impl SamplingConfig {
    fn default_cap() -> usize {
        250
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            cap_per_stratum: Self::default_cap(),
            exempt: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Config {
    #[serde(default = "Stage2Config::default_provider")]
    pub provider: Provider,
    pub model_id: String,
    #[serde(default = "Stage2Config::default_endpoint")]
    pub endpoint: String,
    #[serde(default = "Stage2Config::default_key_env")]
    pub api_key_env: String,
    #[serde(default = "Stage2Config::default_prompt_version")]
    pub prompt_version: String,
    #[serde(default = "Stage2Config::default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "Stage2Config::default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "Stage2Config::default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default = "Stage2Config::default_rate")]
    pub max_requests_per_second: f64,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

impl Stage2Config {
    fn default_provider() -> Provider {
        Provider::Anthropic
    }
    fn default_endpoint() -> String {
        "https://api.anthropic.com/v1/messages".into()
    }
    fn default_key_env() -> String {
        "ANTHROPIC_API_KEY".into()
    }
    fn default_prompt_version() -> String {
        "v1".into()
    }
    fn default_max_tokens() -> u32 {
        300
    }
    fn default_timeout() -> u64 {
        60
    }
    fn default_concurrency() -> usize {
        4
    }
    fn default_rate() -> f64 {
        4.0
    }

    pub fn attribution(&self) -> AttributionConfig {
        AttributionConfig {
            model_id: self.model_id.clone(),
            prompt_version: self.prompt_version.clone(),
            max_output_tokens: self.max_output_tokens,
            temperature: self.temperature,
            retry: self.retry.clone(),
            concurrency_limit: self.concurrency_limit,
            max_requests_per_second: self.max_requests_per_second,
        }
    }

    pub fn sampling_plan(&self, seed: u64) -> SamplingPlan {
        SamplingPlan {
            cap_per_stratum: self.sampling.cap_per_stratum,
            seed,
            exempt: self.sampling.exempt.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Parties summarized and plotted.
    #[serde(default = "AnalysisConfig::default_parties")]
    pub parties: Vec<String>,
    #[serde(default = "AnalysisConfig::default_types")]
    pub article_types: Vec<ArticleType>,
    #[serde(default)]
    pub date_range: Option<DateRange>,
    /// The two parties in the head-to-head table.
    #[serde(default = "AnalysisConfig::default_primary")]
    pub primary_parties: [String; 2],
    #[serde(default = "AnalysisConfig::default_primary_type")]
    pub primary_article_type: ArticleType,
    #[serde(default)]
    pub ttest_variant: TtestVariant,
    #[serde(default)]
    pub baseline_mode: BaselineMode,
}

impl AnalysisConfig {
    fn default_parties() -> Vec<String> {
        ["Conservatives", "Labour", "Plaid Cymru", "Reform UK"].map(String::from).into()
    }
    fn default_types() -> Vec<ArticleType> {
        vec![ArticleType::News, ArticleType::Opinion]
    }
    fn default_primary() -> [String; 2] {
        ["Reform UK".into(), "Plaid Cymru".into()]
    }
    fn default_primary_type() -> ArticleType {
        ArticleType::News
    }

    /// Every party named anywhere in the analysis.
    pub fn all_parties(&self) -> Vec<String> {
        let mut set: BTreeSet<String> = self.parties.iter().cloned().collect();
        set.extend(self.primary_parties.iter().cloned());
        set.into_iter().collect()
    }

    pub fn all_types(&self) -> Vec<ArticleType> {
        let mut set: BTreeSet<ArticleType> = self.article_types.iter().copied().collect();
        set.insert(self.primary_article_type);
        set.into_iter().collect()
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            parties: Self::default_parties(),
            article_types: Self::default_types(),
            date_range: None,
            primary_parties: Self::default_primary(),
            primary_article_type: Self::default_primary_type(),
            ttest_variant: TtestVariant::default(),
            baseline_mode: BaselineMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewConfig {
    #[serde(default = "ReviewConfig::default_n")]
    pub sample_size: usize,
}

impl ReviewConfig {
    fn default_n() -> usize {
        50
    }
}

impl Default for ReviewConfig {
    fn default() -> Self {
        Self {
            sample_size: Self::default_n(),
        }
    }
}

/// Artifact locations, relative to the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub mentions: PathBuf,
    pub labels: PathBuf,
    pub results: PathBuf,
    pub quarantine: PathBuf,
    pub cache: PathBuf,
    pub reports: PathBuf,
    pub review: PathBuf,
    pub state: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            corpus: "data/corpus.jsonl".into(),
            mentions: "data/mentions.jsonl".into(),
            labels: "data/stage1_labels.jsonl".into(),
            results: "data/stage2_results.jsonl".into(),
            quarantine: "data/stage2_quarantine.jsonl".into(),
            cache: "data/stage2_cache.jsonl".into(),
            reports: "reports".into(),
            review: "review/review_sample.csv".into(),
            state: "state".into(),
        }
    }
}

impl PathsConfig {
    fn entries(&self) -> [(&'static str, &PathBuf); 9] {
        [
            ("corpus", &self.corpus),
            ("mentions", &self.mentions),
            ("labels", &self.labels),
            ("results", &self.results),
            ("quarantine", &self.quarantine),
            ("cache", &self.cache),
            ("reports", &self.reports),
            ("review", &self.review),
            ("state", &self.state),
        ]
    }

    fn resolved(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            corpus: r(&self.corpus),
            mentions: r(&self.mentions),
            labels: r(&self.labels),
            results: r(&self.results),
            quarantine: r(&self.quarantine),
            cache: r(&self.cache),
            reports: r(&self.reports),
            review: r(&self.review),
            state: r(&self.state),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget_usd: Option<f64>,
    pub dry_run: bool,
    pub review_n: Option<usize>,
}

/// A validated config plus the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub paths: PathsConfig,
    pub hash: String,
}

fn config_error(field: impl Into<String>, message: impl Into<String>) -> PipelineError {
    PipelineError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl PipelineConfig {
    /// Parses TOML; errors carry the dotted path of the offending field.
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<document>", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let message = e.inner().message().to_string();
            config_error(field, message)
        })
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error("<file>", format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        config.apply(overrides);
        config.validate()?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(LoadedConfig {
            paths: config.paths.resolved(base),
            hash: config.canonical_hash(),
            config,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(b) = o.budget_usd {
            self.stage2.budget.max_usd = b;
        }
        if o.dry_run {
            self.stage2.provider = Provider::Mock;
        }
        if let Some(n) = o.review_n {
            self.review.sample_size = n;
        }
    }

    /// sha256 over the defaults-filled config serialized with sorted keys,
    /// so key order and omitted defaults in the file do not matter.
    pub fn canonical_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut errs: Vec<(String, String)> = Vec::new();
        if let Some(h) = &self.harvest {
            errs.extend(h.validate().into_iter().map(|(f, m)| (format!("harvest.{f}"), m)));
        }
        errs.extend(self.stage1.validate().into_iter().map(|(f, m)| (format!("stage1.{f}"), m)));
        for (i, set) in self.extract.aliases.iter().enumerate() {
            if set.aliases.is_empty() {
                errs.push((format!("extract.aliases[{i}].aliases"), "must not be empty".into()));
            }
            if set.aliases.iter().any(|a| a.pattern.trim().is_empty()) {
                errs.push((format!("extract.aliases[{i}].aliases"), "patterns must not be blank".into()));
            }
        }
        let s2 = &self.stage2;
        if s2.model_id.trim().is_empty() {
            errs.push(("stage2.model_id".into(), "must not be empty".into()));
        }
        if !crate::stage2::known_versions().any(|v| v == s2.prompt_version) {
            errs.push(("stage2.prompt_version".into(), format!("unknown version {:?}", s2.prompt_version)));
        }
        if s2.sampling.cap_per_stratum < 1 {
            errs.push(("stage2.sampling.cap_per_stratum".into(), "must be at least 1".into()));
        }
        if s2.concurrency_limit < 1 {
            errs.push(("stage2.concurrency_limit".into(), "must be at least 1".into()));
        }
        if !(s2.budget.max_usd >= 0.0) {
            errs.push(("stage2.budget.max_usd".into(), "must be non-negative".into()));
        }
        if s2.max_output_tokens < 1 {
            errs.push(("stage2.max_output_tokens".into(), "must be at least 1".into()));
        }
        let a = &self.analysis;
        if a.primary_parties[0] == a.primary_parties[1] {
            errs.push(("analysis.primary_parties".into(), "must name two different parties".into()));
        }
        if a.article_types.contains(&ArticleType::Other) || a.primary_article_type == ArticleType::Other {
            errs.push(("analysis.article_types".into(), "unmapped articles are not analysed".into()));
        }
        let known: BTreeSet<&str> = self.extract.aliases.iter().map(|s| s.party.as_str()).collect();
        for p in a.all_parties() {
            if !known.contains(p.as_str()) {
                errs.push(("analysis.parties".into(), format!("{p:?} has no alias set")));
            }
        }
        if let Some(r) = a.date_range {
            if r.start > r.end {
                errs.push(("analysis.date_range".into(), "start is after end".into()));
            }
        }
        if self.review.sample_size < 1 {
            errs.push(("review.sample_size".into(), "must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for (name, p) in self.paths.entries() {
            if !seen.insert(p.clone()) {
                errs.push((format!("paths.{name}"), format!("{} is used twice", p.display())));
            }
        }
        match errs.into_iter().next() {
            None => Ok(()),
            Some((f, m)) => Err(config_error(f, m)),
        }
    }
}
