//! Statement-bias audit pipeline for political news coverage.
//!
//! The pipeline runs in five file-backed stages:
//!
//! 1. [`corpus`] harvests articles from a WordPress REST endpoint, strips the
//!    rendered HTML to plain text and keeps articles that match enough
//!    politics keywords.
//! 2. [`mentions`] splits article text into sentences and turns every
//!    sentence that names a party into a [`mentions::Mention`] carrying a
//!    ±k sentence context window.
//! 3. [`stage1`] runs a cheap local bias detector over every window.
//! 4. [`stage2`] sends only the windows flagged as biased to a remote LLM,
//!    which decides whether the bias is aimed at the named party and scores
//!    its sentiment on a five-point scale.
//! 5. [`stats`] compares parties with two-proportion z-tests, Cohen's h,
//!    two-sample t-tests and Cohen's d, and writes the report tables.
//!
//! [`pipeline`] wires the stages together behind one config file.

pub mod corpus;
pub mod jsonl;
pub mod mentions;
pub mod net;
pub mod pipeline;
pub mod stage1;
pub mod stage2;
pub mod stats;
pub mod text;

pub use corpus::{ArticleRecord, ArticleType, HarvestConfig};
pub use mentions::{Mention, PartyAliasSet, SentenceSpan};
pub use pipeline::{PipelineConfig, PipelineError, RunManifest};
pub use stage1::{BiasLabel, Stage1Label};
pub use stage2::{Sentiment, Stage2Result};
pub use stats::{PartySummary, StatsReport};
