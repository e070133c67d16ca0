//! Stage 1: cheap local bias detection over every mention window.

mod lexicon;
#[cfg(feature = "transformer")]
mod transformer;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mentions::{AliasIndex, Mention};

pub use lexicon::LexiconBackend;
#[cfg(feature = "transformer")]
pub use transformer::TransformerBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasLabel {
    Biased,
    NonBiased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Label {
    pub mention_id: String,
    pub label: BiasLabel,
    /// Probability of the biased class.
    pub score: f64,
    pub backend_id: String,
}

impl Stage1Label {
    pub fn is_biased(&self) -> bool {
        self.label == BiasLabel::Biased
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    TransformerModel,
    LexiconTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceBackendSpec {
    pub kind: BackendKind,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub tokenizer_path: Option<PathBuf>,
    /// Lexicon file for the `lexicon_test` kind; the bundled list when unset.
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    #[serde(default = "InferenceBackendSpec::default_max_tokens")]
    pub max_sequence_tokens: usize,
    #[serde(default = "InferenceBackendSpec::default_threshold")]
    pub decision_threshold: f64,
    #[serde(default = "InferenceBackendSpec::default_batch_size")]
    pub batch_size: usize,
    /// Index of the biased class in the model's logits.
    #[serde(default = "InferenceBackendSpec::default_biased_index")]
    pub biased_label_index: usize,
}

impl InferenceBackendSpec {
    fn default_max_tokens() -> usize {
        512
    }
    fn default_threshold() -> f64 {
        0.5
    }
    fn default_batch_size() -> usize {
        16
    }
    fn default_biased_index() -> usize {
        1
    }

    pub fn lexicon() -> Self {
        Self {
            kind: BackendKind::LexiconTest,
            model_path: None,
            tokenizer_path: None,
            lexicon_path: None,
            max_sequence_tokens: Self::default_max_tokens(),
            decision_threshold: Self::default_threshold(),
            batch_size: Self::default_batch_size(),
            biased_label_index: Self::default_biased_index(),
        }
    }

    pub fn transformer(model_path: impl Into<PathBuf>, tokenizer_path: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::TransformerModel,
            model_path: Some(model_path.into()),
            tokenizer_path: Some(tokenizer_path.into()),
            ..Self::lexicon()
        }
    }

    pub fn validate(&self) -> Vec<(String, String)> {
        let mut errs = Vec::new();
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            errs.push(("decision_threshold".into(), "must lie strictly between 0 and 1".into()));
        }
        if self.max_sequence_tokens < 8 {
            errs.push(("max_sequence_tokens".into(), "must be at least 8".into()));
        }
        if self.batch_size < 1 {
            errs.push(("batch_size".into(), "must be at least 1".into()));
        }
        if self.kind == BackendKind::TransformerModel {
            if self.model_path.is_none() {
                errs.push(("model_path".into(), "required for transformer_model".into()));
            }
            if self.tokenizer_path.is_none() {
                errs.push(("tokenizer_path".into(), "required for transformer_model".into()));
            }
        }
        errs
    }

    pub fn label_for(&self, score: f64) -> BiasLabel {
        if score >= self.decision_threshold {
            BiasLabel::Biased
        } else {
            BiasLabel::NonBiased
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Stage1Error {
    #[error("failed to initialise backend: {0}")]
    Init(String),
    #[error("{failed} of {total} items failed, above the 10% tolerance; first: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("mention {mention_id}: {message}")]
    Item { mention_id: String, message: String },
}

/// A window to score plus the byte offset of the party alias in it.
#[derive(Debug, Clone, Copy)]
pub struct ScoreInput<'a> {
    pub text: &'a str,
    pub focus: Option<usize>,
}

pub trait BiasBackend {
    fn backend_id(&self) -> &str;

    /// Probability in [0, 1] that the text contains loaded language.
    fn score(&mut self, input: ScoreInput<'_>) -> Result<f64, String>;

    /// Must agree item-for-item with [`BiasBackend::score`].
    fn score_batch(&mut self, inputs: &[ScoreInput<'_>]) -> Vec<Result<f64, String>> {
        inputs.iter().map(|i| self.score(*i)).collect()
    }
}

pub fn load_backend(spec: &InferenceBackendSpec) -> Result<Box<dyn BiasBackend>, Stage1Error> {
    match spec.kind {
        BackendKind::LexiconTest => {
            let backend = match &spec.lexicon_path {
                Some(p) => LexiconBackend::from_file(p)?,
                None => LexiconBackend::bundled(),
            };
            Ok(Box::new(backend))
        }
        BackendKind::TransformerModel => load_transformer(spec),
    }
}

#[cfg(feature = "transformer")]
fn load_transformer(spec: &InferenceBackendSpec) -> Result<Box<dyn BiasBackend>, Stage1Error> {
    let (Some(model), Some(tok)) = (&spec.model_path, &spec.tokenizer_path) else {
        return Err(Stage1Error::Init("transformer_model needs model_path and tokenizer_path".into()));
    };
    Ok(Box::new(TransformerBackend::load(
        model,
        tok,
        spec.max_sequence_tokens,
        spec.biased_label_index,
    )?))
}

#[cfg(not(feature = "transformer"))]
fn load_transformer(_spec: &InferenceBackendSpec) -> Result<Box<dyn BiasBackend>, Stage1Error> {
    Err(Stage1Error::Init("built without the `transformer` feature".into()))
}

/// Scores one window and applies the decision threshold.
pub fn classify_window(
    mention_id: &str,
    input: ScoreInput<'_>,
    backend: &mut dyn BiasBackend,
    spec: &InferenceBackendSpec,
) -> Result<Stage1Label, Stage1Error> {
    let score = backend.score(input).map_err(|message| Stage1Error::Item {
        mention_id: mention_id.to_string(),
        message,
    })?;
    Ok(make_label(mention_id, score, backend.backend_id(), spec))
}

fn make_label(mention_id: &str, score: f64, backend_id: &str, spec: &InferenceBackendSpec) -> Stage1Label {
    let score = score.clamp(0.0, 1.0);
    Stage1Label {
        mention_id: mention_id.to_string(),
        label: spec.label_for(score),
        score,
        backend_id: backend_id.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub biased_count: usize,
    /// Absent when nothing was labelled.
    pub bias_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub mention_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub labels: Vec<Stage1Label>,
    pub failures: Vec<ItemFailure>,
    pub summary: BatchSummary,
}

/// Labels every mention in order, `spec.batch_size` at a time. Failed items
/// are skipped and reported; the call only fails when more than 10% of the
/// items fail.
pub fn batch_classify(
    mentions: &[Mention],
    backend: &mut dyn BiasBackend,
    spec: &InferenceBackendSpec,
    aliases: Option<&AliasIndex>,
) -> Result<BatchOutcome, Stage1Error> {
    let mut labels = Vec::with_capacity(mentions.len());
    let mut failures = Vec::new();
    for chunk in mentions.chunks(spec.batch_size.max(1)) {
        let inputs: Vec<ScoreInput<'_>> = chunk
            .iter()
            .map(|m| ScoreInput {
                text: &m.window_text,
                focus: aliases.and_then(|a| a.first_occurrence(&m.party, &m.window_text)),
            })
            .collect();
        let scores = backend.score_batch(&inputs);
        for (m, s) in chunk.iter().zip(scores) {
            match s {
                Ok(score) => labels.push(make_label(&m.mention_id, score, backend.backend_id(), spec)),
                Err(message) => {
                    tracing::warn!(mention_id = %m.mention_id, %message, "stage 1 item skipped");
                    failures.push(ItemFailure {
                        mention_id: m.mention_id.clone(),
                        message,
                    });
                }
            }
        }
    }
    if failures.len() * 10 > mentions.len() {
        return Err(Stage1Error::TooManyFailures {
            failed: failures.len(),
            total: mentions.len(),
            first: failures[0].message.clone(),
        });
    }
    let biased_count = labels.iter().filter(|l| l.is_biased()).count();
    let total = labels.len();
    Ok(BatchOutcome {
        summary: BatchSummary {
            total,
            biased_count,
            bias_rate: (total > 0).then(|| biased_count as f64 / total as f64),
        },
        labels,
        failures,
    })
}

/// Reference scores recorded from the original checkpoint by the exporter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityFixture {
    pub sentences: Vec<String>,
    pub reference_scores: Vec<f64>,
    pub model_fingerprint: String,
}

impl ParityFixture {
    pub fn load(path: &Path) -> Result<Self, Stage1Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Stage1Error::Init(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Stage1Error::Init(format!("{}: {e}", path.display())))
    }

    /// Hex SHA-256 of a model file, the fingerprint format the exporter uses.
    pub fn fingerprint(model_path: &Path) -> Result<String, Stage1Error> {
        let bytes = std::fs::read(model_path).map_err(|e| Stage1Error::Init(format!("{}: {e}", model_path.display())))?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
