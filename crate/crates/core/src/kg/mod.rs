//! Offline ConceptNet triple store.
//!
//! A dump is ingested once ([`build_index`]), filtered down to English
//! endpoints and the whitelisted relations, and persisted as a snapshot
//! ([`snapshot`]) so that serving does not re-parse the dump.

mod dump;
mod index;
mod relation;
pub mod snapshot;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dump::{parse_assertion_line, ParsedLine, RelationFilter, SkipReason};
pub use index::{build_index, open_dump, IngestReport, KnowledgeIndex};
pub use relation::RelationKind;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("invalid concept label {0:?}")]
    InvalidLabel(String),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("ingestion failed after {} lines: {source}", report.lines)]
    Ingest {
        report: IngestReport,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Canonical concept key: lowercase, single-underscore separated, with any
/// ConceptNet URI prefix and part-of-speech suffix removed.
///
/// `"Short Sword"` → `"short_sword"`, `"/c/en/dagger/n"` → `"dagger"`.
pub fn normalize_concept(label: &str) -> Result<String, KgError> {
    let folded = fold_separators(&label.to_lowercase());
    let key = if let Some(rest) = folded.strip_prefix("/c/") {
        // /c/<lang>/<term>[/<pos>[/...]]
        let term = rest.split('/').nth(1).unwrap_or("");
        fold_separators(term)
    } else {
        folded
    };
    if key.is_empty() {
        return Err(KgError::InvalidLabel(label.to_string()));
    }
    Ok(key)
}

fn fold_separators(s: &str) -> String {
    s.split(|c: char| c.is_whitespace() || c == '_')
        .filter(|part| !part.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

/// Renders a concept key for display: underscores become spaces.
pub fn display_concept(key: &str) -> String {
    key.replace('_', " ")
}

/// One ConceptNet assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub source: String,
    pub relation: RelationKind,
    pub target: String,
    pub weight: f64,
    pub source_display: String,
    pub target_display: String,
}

impl Triple {
    /// Builds a triple from free-form labels, normalizing both endpoints.
    pub fn new(
        source: &str,
        relation: RelationKind,
        target: &str,
        weight: f64,
    ) -> Result<Triple, KgError> {
        let source = normalize_concept(source)?;
        let target = normalize_concept(target)?;
        Ok(Triple {
            source_display: display_concept(&source),
            target_display: display_concept(&target),
            source,
            relation,
            target,
            weight,
        })
    }

    pub fn key(&self) -> TripleKey {
        TripleKey {
            source: self.source.clone(),
            relation: self.relation.name().to_string(),
            target: self.target.clone(),
        }
    }

    pub fn mentions(&self, concept: &str) -> bool {
        self.source == concept || self.target == concept
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.source_display,
            self.relation.phrase(),
            self.target_display
        )
    }
}

/// Identity of a triple for deduplication and ordering. Ordered
/// lexicographically by source, relation name, target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripleKey {
    pub source: String,
    pub relation: String,
    pub target: String,
}
