//! The stage bodies.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::Duration;

use chrono::Utc;

use super::config::{LoadedConfig, Provider};
use super::manifest::{Fingerprint, RunManifest};
use super::review::review_sample;
use super::{derive_seed, PipelineError, Stage};
use crate::corpus::{harvest, ArticleRecord, CorpusStore, WordPressClient};
use crate::jsonl;
use crate::mentions::{dedupe_mentions, Mention, MentionExtractor};
use crate::stage1::{batch_classify, load_backend, BackendKind, Stage1Label};
use crate::stage2::{
    misattribution_rate, sample_strata, Attributor, Budget, ChatClient, MessagesClient, QuarantineRecord,
    ResponseCache, RuleBasedMock, Stage2Result,
};
use crate::stats::{figure_data, Dataset, PartySummary, ReportManifest, StatsReport};

/// What one stage did.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub skipped: bool,
    pub counts: BTreeMap<String, u64>,
}

pub struct Runner {
    loaded: LoadedConfig,
    force: bool,
}

impl Runner {
    pub fn new(loaded: LoadedConfig) -> Self {
        Self { loaded, force: false }
    }

    /// Re-run stages even when their manifests say they are current.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn config(&self) -> &LoadedConfig {
        &self.loaded
    }

    pub fn run(&self, stage: Stage) -> Result<Vec<StageReport>, PipelineError> {
        match stage {
            Stage::All => {
                let mut out = Vec::new();
                if self.loaded.config.harvest.is_some() {
                    out.push(self.harvest()?);
                } else if !self.loaded.paths.corpus.exists() {
                    return Err(PipelineError::MissingArtifact(self.loaded.paths.corpus.clone()));
                } else {
                    tracing::info!("no [harvest] section; using the existing corpus file");
                }
                out.push(self.extract()?);
                out.push(self.stage1()?);
                out.push(self.stage2()?);
                out.push(self.analyze()?);
                out.push(self.review()?);
                Ok(out)
            }
            Stage::Harvest => Ok(vec![self.harvest()?]),
            Stage::Extract => Ok(vec![self.extract()?]),
            Stage::Stage1 => Ok(vec![self.stage1()?]),
            Stage::Stage2 => Ok(vec![self.stage2()?]),
            Stage::Analyze => Ok(vec![self.analyze()?]),
            Stage::ReviewSample => Ok(vec![self.review()?]),
        }
    }

    fn begin(&self, stage: Stage, fingerprint: String) -> Result<Result<RunManifest, StageReport>, PipelineError> {
        let state = &self.loaded.paths.state;
        if !self.force {
            if let Some(prev) = RunManifest::load(state, stage.as_str()) {
                if prev.is_current(&fingerprint) {
                    tracing::info!(%stage, "inputs unchanged; skipping");
                    return Ok(Err(StageReport {
                        stage,
                        skipped: true,
                        counts: prev.counts,
                    }));
                }
            }
        }
        let m = RunManifest::begin(stage.as_str(), &self.loaded.hash, self.loaded.config.seed, fingerprint);
        Ok(Ok(m))
    }

    fn finish(&self, stage: Stage, mut m: RunManifest, outputs: &[&Path]) -> Result<StageReport, PipelineError> {
        m.record_outputs(outputs)?;
        m.complete = true;
        m.finished_at = Some(Utc::now());
        m.save(&self.loaded.paths.state)?;
        Ok(StageReport {
            stage,
            skipped: false,
            counts: m.counts,
        })
    }

    fn harvest(&self) -> Result<StageReport, PipelineError> {
        let Some(cfg) = &self.loaded.config.harvest else {
            return Err(PipelineError::Config {
                field: "harvest".into(),
                message: "no [harvest] section in config".into(),
            });
        };
        let paths = &self.loaded.paths;
        let fp = Fingerprint::new("harvest").value("harvest", cfg).finish();
        let mut m = match self.begin(Stage::Harvest, fp)? {
            Ok(m) => m,
            Err(skip) => return Ok(skip),
        };
        let client = WordPressClient::new(cfg.clone()).map_err(|e| PipelineError::stage("harvest", e))?;
        let store = CorpusStore::new(&paths.corpus);
        let outcome = harvest(&client, &store).map_err(|e| PipelineError::stage("harvest", e))?;
        if !paths.corpus.exists() {
            store.write(&[]).map_err(|e| PipelineError::stage("harvest", e))?;
        }
        m.count("fetched", outcome.fetched);
        m.count("out_of_range", outcome.out_of_range);
        m.count("below_keyword_gate", outcome.below_keyword_gate);
        m.count("kept", outcome.kept);
        m.count("appended", outcome.appended);
        self.finish(Stage::Harvest, m, &[&paths.corpus])
    }

    fn extract(&self) -> Result<StageReport, PipelineError> {
        let cfg = &self.loaded.config.extract;
        let paths = &self.loaded.paths;
        let fp = Fingerprint::new("extract")
            .value("extract", cfg)
            .file("corpus", &paths.corpus)?
            .finish();
        let mut m = match self.begin(Stage::Extract, fp)? {
            Ok(m) => m,
            Err(skip) => return Ok(skip),
        };
        let articles: Vec<ArticleRecord> = CorpusStore::new(&paths.corpus)
            .read()
            .map_err(|e| PipelineError::stage("extract", e))?;
        let extractor = MentionExtractor::new(&cfg.aliases, cfg.window_radius, cfg.min_sentence_chars);
        let mentions = dedupe_mentions(articles.iter().flat_map(|a| extractor.extract(a)).collect());
        jsonl::write_atomic(&paths.mentions, &mentions)?;
        m.count("articles", articles.len());
        m.count("mentions", mentions.len());
        self.finish(Stage::Extract, m, &[&paths.mentions])
    }

    fn stage1(&self) -> Result<StageReport, PipelineError> {
        let spec = &self.loaded.config.stage1;
        let paths = &self.loaded.paths;
        let mut fp = Fingerprint::new("stage1").value("stage1", spec).file("mentions", &paths.mentions)?;
        if spec.kind == BackendKind::TransformerModel {
            for p in [&spec.model_path, &spec.tokenizer_path].into_iter().flatten() {
                fp = fp.file("model", p)?;
            }
        }
        if let Some(p) = &spec.lexicon_path {
            fp = fp.file("lexicon", p)?;
        }
        let mut m = match self.begin(Stage::Stage1, fp.finish())? {
            Ok(m) => m,
            Err(skip) => return Ok(skip),
        };
        let mentions: Vec<Mention> = jsonl::read(&paths.mentions)?;
        let mut backend = load_backend(spec).map_err(|e| PipelineError::stage("stage1", e))?;
        let extractor = &self.loaded.config.extract;
        let index = crate::mentions::AliasIndex::new(&extractor.aliases);
        let outcome = batch_classify(&mentions, backend.as_mut(), spec, Some(&index))
            .map_err(|e| PipelineError::stage("stage1", e))?;
        jsonl::write_atomic(&paths.labels, &outcome.labels)?;
        m.count("mentions", mentions.len());
        m.count("labelled", outcome.summary.total);
        m.count("biased", outcome.summary.biased_count);
        m.count("failed", outcome.failures.len());
        self.finish(Stage::Stage1, m, &[&paths.labels])
    }

    fn in_scope(&self, m: &Mention) -> bool {
        let a = &self.loaded.config.analysis;
        a.all_types().contains(&m.article_type)
            && a.all_parties().iter().any(|p| p == &m.party)
            && a.date_range.is_none_or(|r| r.contains(m.published_at))
    }

    fn chat_client(&self) -> Result<Box<dyn ChatClient>, PipelineError> {
        let s2 = &self.loaded.config.stage2;
        match s2.provider {
            Provider::Mock => Ok(Box::new(RuleBasedMock::default())),
            Provider::Anthropic => {
                let key = std::env::var(&s2.api_key_env).map_err(|_| PipelineError::Config {
                    field: "stage2.api_key_env".into(),
                    message: format!("environment variable {} is not set", s2.api_key_env),
                })?;
                let client = MessagesClient::new(&s2.endpoint, &key, Duration::from_secs(s2.timeout_secs))
                    .map_err(|e| PipelineError::stage("stage2", e))?;
                Ok(Box::new(client))
            }
        }
    }

    fn stage2(&self) -> Result<StageReport, PipelineError> {
        let cfg = &self.loaded.config;
        let paths = &self.loaded.paths;
        let sampling_seed = derive_seed(cfg.seed, "stage2.sampling");
        let fp = Fingerprint::new("stage2")
            .value("stage2", &cfg.stage2)
            .value("analysis", &cfg.analysis)
            .value("seed", &sampling_seed)
            .file("mentions", &paths.mentions)?
            .file("labels", &paths.labels)?
            .finish();
        let mut m = match self.begin(Stage::Stage2, fp)? {
            Ok(m) => m,
            Err(skip) => return Ok(skip),
        };
        let mentions: Vec<Mention> = jsonl::read(&paths.mentions)?;
        let labels: Vec<Stage1Label> = jsonl::read(&paths.labels)?;
        let biased: HashSet<&str> = labels.iter().filter(|l| l.is_biased()).map(|l| l.mention_id.as_str()).collect();
        let eligible: Vec<Mention> = mentions
            .iter()
            .filter(|x| biased.contains(x.mention_id.as_str()) && self.in_scope(x))
            .cloned()
            .collect();
        let strata = sample_strata(&eligible, &cfg.stage2.sampling_plan(sampling_seed));
        let client = self.chat_client()?;
        let cache = ResponseCache::open(&paths.cache).map_err(|e| PipelineError::stage("stage2", e))?;
        let budget = Budget::new(cfg.stage2.budget.clone());
        let attributor = Attributor::new(client.as_ref(), &cache, &budget, cfg.stage2.attribution())
            .map_err(|e| PipelineError::stage("stage2", e))?;
        let outcome = attributor.run(&strata);

        jsonl::write_atomic(&paths.results, &outcome.results)?;
        jsonl::write_atomic(&paths.quarantine, &outcome.quarantined)?;
        m.count("eligible", eligible.len());
        m.count("sampled", strata.values().map(Vec::len).sum());
        m.count("classified", outcome.results.len());
        m.count("requests", outcome.requests);
        m.count("cache_hits", outcome.cache_hits);
        m.count("off_target", outcome.results.iter().filter(|r| !r.is_on_target()).count());
        m.quarantined = outcome.quarantined.len() as u64;
        m.spent_usd = budget.spent();

        if let Some(reason) = &outcome.aborted {
            m.note = Some(format!("aborted: {reason}"));
            m.save(&paths.state)?;
            return Err(PipelineError::stage("stage2", reason));
        }
        if !outcome.exhausted_strata.is_empty() {
            let names: Vec<String> = outcome.exhausted_strata.iter().map(ToString::to_string).collect();
            let msg = format!(
                "spent ${:.4} of ${:.4}; incomplete strata: {}",
                budget.spent(),
                budget.max(),
                names.join(", ")
            );
            m.note = Some(msg.clone());
            m.save(&paths.state)?;
            return Err(PipelineError::BudgetExhausted(msg));
        }
        self.finish(Stage::Stage2, m, &[&paths.results, &paths.quarantine])
    }

    fn analyze(&self) -> Result<StageReport, PipelineError> {
        let cfg = &self.loaded.config;
        let paths = &self.loaded.paths;
        let fp = Fingerprint::new("analyze")
            .value("config_hash", &self.loaded.hash)
            .file("mentions", &paths.mentions)?
            .file("labels", &paths.labels)?
            .file("results", &paths.results)?
            .optional_file("quarantine", &paths.quarantine)?
            .finish();
        let mut m = match self.begin(Stage::Analyze, fp)? {
            Ok(m) => m,
            Err(skip) => return Ok(skip),
        };
        let mentions: Vec<Mention> = jsonl::read(&paths.mentions)?;
        let labels: Vec<Stage1Label> = jsonl::read(&paths.labels)?;
        let results: Vec<Stage2Result> = jsonl::read(&paths.results)?;
        let quarantined: Vec<QuarantineRecord> = jsonl::read_or_empty(&paths.quarantine)?;
        Dataset::new(&mentions, &labels, &results).map_err(|e| PipelineError::stage("analyze", e))?;

        let a = &cfg.analysis;
        let scoped: Vec<Mention> = mentions
            .iter()
            .filter(|x| a.date_range.is_none_or(|r| r.contains(x.published_at)))
            .cloned()
            .collect();
        let ids: HashSet<&str> = scoped.iter().map(|x| x.mention_id.as_str()).collect();
        let labels_in: Vec<Stage1Label> = labels.iter().filter(|l| ids.contains(l.mention_id.as_str())).cloned().collect();
        let results_in: Vec<Stage2Result> =
            results.iter().filter(|r| ids.contains(r.mention_id.as_str())).cloned().collect();
        let data = Dataset::new(&scoped, &labels_in, &results_in).map_err(|e| PipelineError::stage("analyze", e))?;

        let mut summaries: Vec<PartySummary> = Vec::new();
        for ty in a.all_types() {
            for party in a.all_parties() {
                summaries.push(data.summarize(&party, ty));
            }
        }
        let [pa, pb] = &a.primary_parties;
        let mut report = StatsReport::compare(&summaries, pa, pb, a.primary_article_type, a.ttest_variant)
            .map_err(|e| PipelineError::stage("analyze", e))?;
        let plotted: Vec<PartySummary> = summaries
            .iter()
            .filter(|s| a.parties.contains(&s.party) && a.article_types.contains(&s.article_type))
            .cloned()
            .collect();
        let figure = match figure_data(&plotted, &a.article_types, &a.baseline_mode) {
            Ok((rows, base)) => {
                report.baselines = base;
                rows
            }
            Err(e) => {
                report.notes.push(format!("figure data skipped: {e}"));
                Vec::new()
            }
        };
        let classified = data.classified(|x| self.in_scope(x));
        let classified_owned: Vec<Stage2Result> = classified.iter().map(|r| (*r).clone()).collect();
        report.misattribution_rate = misattribution_rate(&classified_owned);

        let mut manifest = ReportManifest {
            config_hash: self.loaded.hash.clone(),
            seed: cfg.seed,
            prompt_version: cfg.stage2.prompt_version.clone(),
            model_id: cfg.stage2.model_id.clone(),
            stage1_backend: labels.first().map(|l| l.backend_id.clone()).unwrap_or_default(),
            quarantined: quarantined.len() as u64,
            cost_usd: results.iter().map(|r| r.cost_usd).sum(),
            counts: BTreeMap::new(),
        };
        manifest.counts.insert("mentions".into(), mentions.len() as u64);
        manifest.counts.insert("mentions_in_date_range".into(), scoped.len() as u64);
        manifest.counts.insert("stage1_biased".into(), labels.iter().filter(|l| l.is_biased()).count() as u64);
        manifest.counts.insert("stage2_classified".into(), results.len() as u64);
        manifest
            .counts
            .insert("stage2_on_target".into(), results.iter().filter(|r| r.is_on_target()).count() as u64);

        crate::stats::emit_reports(&summaries, &report, &figure, &manifest, &paths.reports)
            .map_err(|e| PipelineError::stage("analyze", e))?;
        m.count("summaries", summaries.len());
        m.count("figure_rows", figure.len());
        m.quarantined = quarantined.len() as u64;
        self.finish(Stage::Analyze, m, &[&paths.reports])
    }

    fn review(&self) -> Result<StageReport, PipelineError> {
        let cfg = &self.loaded.config;
        let paths = &self.loaded.paths;
        let seed = derive_seed(cfg.seed, "review");
        let fp = Fingerprint::new("review-sample")
            .value("review", &cfg.review)
            .value("seed", &seed)
            .file("mentions", &paths.mentions)?
            .file("results", &paths.results)?
            .finish();
        let mut m = match self.begin(Stage::ReviewSample, fp)? {
            Ok(m) => m,
            Err(skip) => return Ok(skip),
        };
        let mentions: Vec<Mention> = jsonl::read(&paths.mentions)?;
        let results: Vec<Stage2Result> = jsonl::read(&paths.results)?;
        let rows = review_sample(&mentions, &results, cfg.review.sample_size, seed);
        if let Some(parent) = paths.review.parent() {
            std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        let mut w = csv::Writer::from_path(&paths.review).map_err(|e| PipelineError::stage("review-sample", e))?;
        for r in &rows {
            w.serialize(r).map_err(|e| PipelineError::stage("review-sample", e))?;
        }
        w.flush().map_err(|e| PipelineError::io(&paths.review, e))?;
        m.count("rows", rows.len());
        self.finish(Stage::ReviewSample, m, &[&paths.review])
    }
}
