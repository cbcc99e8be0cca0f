//! Annotation workflow: story corpus, the three-step session state
//! machine, the append-only record store, and dataset export.

mod corpus;
mod export;
mod session;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{convert_fairytaleqa, load_corpus, parse_corpus, write_corpus, StorySection};
pub use export::{
    dataset_rows_from_csv, dataset_rows_from_jsonl, export_dataset, import_dataset, load_dataset_rows,
    read_split_map, summary_statistics, DatasetRow, ExportRecord, ExportTriple, SplitMap, SplitStatistics,
    StatisticsReport, STAT_ROWS,
};
pub use session::{AnnotationSession, Event, QaPair, SessionState};
pub use store::{quarantine_path, AuditReport, JsonlLog, RecordStore};

use crate::kg::Triple;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("cannot apply {event} in state {state}")]
    State { state: SessionState, event: String },
    #[error("validation failed: {}", .violations.join("; "))]
    Validation { violations: Vec<String> },
    #[error("corpus line {line} (story {story_id:?}): {message}")]
    Load {
        line: usize,
        story_id: Option<String>,
        message: String,
    },
    #[error("stories missing from the split map: {}", .missing.join(", "))]
    Export { missing: Vec<String> },
    #[error("import line {line}: {message}")]
    Import { line: usize, message: String },
    #[error("persistence: {0}")]
    Persistence(#[from] std::io::Error),
}

impl AnnotationError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::State { .. } => "state_error",
            AnnotationError::Validation { .. } => "validation_error",
            AnnotationError::Load { .. } | AnnotationError::Import { .. } => "load_error",
            AnnotationError::Export { .. } => "export_error",
            AnnotationError::Persistence(_) => "persistence_error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" | "dev" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One stored QA annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub record_id: u64,
    pub session_id: String,
    pub story_id: String,
    pub section_index: u32,
    pub section_text: String,
    pub concept: String,
    pub triple: Triple,
    /// The recommendation list shown when the triple was chosen.
    #[serde(default)]
    pub recommended: Vec<Triple>,
    pub question: String,
    pub answer: String,
    pub annotator_id: String,
    pub created_at: chrono::DateTime<chrono::Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Hard violations and lint-level warnings for a QA pair bound to a triple.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QaCheck {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn check_qa(triple: &Triple, question: &str, answer: &str) -> QaCheck {
    let mut check = QaCheck::default();
    let (q, a) = (question.trim(), answer.trim());
    if q.is_empty() {
        check.violations.push("question is empty".into());
    }
    if a.is_empty() {
        check.violations.push("answer is empty".into());
    }
    if !q.is_empty() && !q.ends_with('?') {
        check.warnings.push("question does not end with '?'".into());
    }
    let mentioned = [&triple.source_display, &triple.target_display]
        .iter()
        .any(|c| contains_phrase(q, c) || contains_phrase(a, c));
    if !mentioned && !(q.is_empty() && a.is_empty()) {
        check.violations.push(format!(
            "neither {:?} nor {:?} appears in the question or answer",
            triple.source_display, triple.target_display
        ));
    }
    check
}

impl AnnotationRecord {
    pub fn check(&self) -> QaCheck {
        let mut check = check_qa(&self.triple, &self.question, &self.answer);
        if !self.recommended.is_empty() && !self.recommended.iter().any(|t| t.key() == self.triple.key()) {
            check.violations.push("triple is not in the recommendation snapshot".into());
        }
        check
    }
}

/// Case-insensitive phrase search on word boundaries.
pub fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    let phrase = phrase.trim().to_lowercase();
    if phrase.is_empty() {
        return false;
    }
    let hay = haystack.to_lowercase();
    let is_word = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
    let mut from = 0;
    while let Some(i) = hay[from..].find(&phrase) {
        let start = from + i;
        let end = start + phrase.len();
        if !is_word(hay[..start].chars().next_back()) && !is_word(hay[end..].chars().next()) {
            return true;
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}
