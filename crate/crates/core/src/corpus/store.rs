//! Corpus file: one JSON-encoded [`ArticleRecord`] per line.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::ArticleRecord;
use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: duplicate article_id {id}")]
    DuplicateId { path: String, id: String },
}

#[derive(Debug, Clone)]
pub struct CorpusStore {
    path: PathBuf,
}

impl CorpusStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Missing file reads as an empty corpus.
    pub fn read(&self) -> Result<Vec<ArticleRecord>, CorpusError> {
        let records: Vec<ArticleRecord> = jsonl::read_or_empty(&self.path)?;
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.article_id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    path: self.path.display().to_string(),
                    id: r.article_id.clone(),
                });
            }
        }
        Ok(records)
    }

    pub fn write(&self, records: &[ArticleRecord]) -> Result<(), CorpusError> {
        jsonl::write_atomic(&self.path, records)?;
        Ok(())
    }

    /// Appends records whose `article_id` is not stored yet; returns how many
    /// were written.
    pub fn append_new(&self, records: &[ArticleRecord]) -> Result<usize, CorpusError> {
        let existing = self.read()?;
        let mut seen: HashSet<String> = existing.into_iter().map(|r| r.article_id).collect();
        let fresh: Vec<&ArticleRecord> = records
            .iter()
            .filter(|r| seen.insert(r.article_id.clone()))
            .collect();
        jsonl::append(&self.path, &fresh)?;
        Ok(fresh.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ArticleType;
    use chrono::NaiveDate;

    fn rec(id: &str) -> ArticleRecord {
        ArticleRecord {
            article_id: id.into(),
            url: format!("https://news.example/{id}"),
            published_at: NaiveDate::from_ymd_opt(2024, 5, 1).unwrap(),
            title: "Title".into(),
            body_html: "<p>Body</p>".into(),
            body_text: "Body".into(),
            article_type: ArticleType::News,
            keywords_matched: ["senedd".to_string()].into_iter().collect(),
        }
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::new(dir.path().join("corpus.jsonl"));
        let recs = vec![rec("1"), rec("2"), rec("3")];
        store.write(&recs).unwrap();
        assert_eq!(store.read().unwrap(), recs);
    }

    #[test]
    fn duplicate_append_is_a_no_op() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::new(dir.path().join("corpus.jsonl"));
        store.write(&[rec("1"), rec("2")]).unwrap();
        let before = std::fs::read(store.path()).unwrap();
        assert_eq!(store.append_new(&[rec("1")]).unwrap(), 0);
        assert_eq!(std::fs::read(store.path()).unwrap(), before);
        assert_eq!(store.append_new(&[rec("3"), rec("3")]).unwrap(), 1);
        assert_eq!(store.read().unwrap().len(), 3);
    }

    #[test]
    fn corrupt_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::new(dir.path().join("corpus.jsonl"));
        store.write(&[rec("1"), rec("2"), rec("3")]).unwrap();
        let text = std::fs::read_to_string(store.path()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let broken = lines[1][..20].to_string();
        lines[1] = &broken;
        std::fs::write(store.path(), lines.join("\n")).unwrap();
        let err = store.read().unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
