use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::concepts::count_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorySection {
    pub story_id: String,
    /// 1-based position within the story.
    pub section_index: u32,
    pub text: String,
    pub token_count: usize,
}

impl StorySection {
    pub fn new(story_id: impl Into<String>, section_index: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        StorySection {
            story_id: story_id.into(),
            section_index,
            token_count: count_tokens(&text),
            text,
        }
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    story_id: String,
    section_index: u32,
    text: String,
}

pub fn load_corpus(path: &Path) -> Result<Vec<StorySection>, AnnotationError> {
    parse_corpus(std::fs::File::open(path)?)
}

/// Reads `{story_id, section_index, text}` JSON lines. Token counts are
/// recomputed; a repeated `(story_id, section_index)` is an error.
pub fn parse_corpus(reader: impl Read) -> Result<Vec<StorySection>, AnnotationError> {
    let mut sections = Vec::new();
    let mut seen = HashSet::new();
    for (no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let story_hint = serde_json::from_str::<serde_json::Value>(&line)
            .ok()
            .and_then(|v| v.get("story_id").and_then(|s| s.as_str()).map(str::to_string));
        let load_err = |message: String| AnnotationError::Load {
            line: no + 1,
            story_id: story_hint.clone(),
            message,
        };
        let rec: CorpusLine = serde_json::from_str(&line).map_err(|e| load_err(e.to_string()))?;
        if rec.section_index == 0 {
            return Err(load_err("section_index must be positive".into()));
        }
        if !seen.insert((rec.story_id.clone(), rec.section_index)) {
            return Err(load_err(format!("duplicate section {}", rec.section_index)));
        }
        sections.push(StorySection::new(rec.story_id, rec.section_index, rec.text));
    }
    Ok(sections)
}

pub fn write_corpus(sections: &[StorySection], mut out: impl Write) -> std::io::Result<()> {
    for s in sections {
        let line = serde_json::json!({
            "story_id": s.story_id,
            "section_index": s.section_index,
            "text": s.text,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

const STORY_COLUMNS: &[&str] = &["story_id", "story_name", "story", "story_title"];
const SECTION_COLUMNS: &[&str] = &["cor_section", "section", "section_index", "section_id"];
const TEXT_COLUMNS: &[&str] = &["text", "section_text", "content", "story_section"];

/// Converts a FairytaleQA-style section CSV. The story id comes from a
/// story column when present, else from `default_story_id` (typically the
/// file stem). Section cells such as `3` or `3,4` use their first number.
/// Rows repeating a section (one row per question) are collapsed.
pub fn convert_fairytaleqa(reader: impl Read, default_story_id: &str) -> Result<Vec<StorySection>, AnnotationError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers: Vec<String> = csv
        .headers()
        .map_err(|e| load_error(1, None, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let find = |names: &[&str]| names.iter().find_map(|n| headers.iter().position(|h| h == n));
    let text_col = find(TEXT_COLUMNS).ok_or_else(|| load_error(1, None, "no text column".into()))?;
    let section_col = find(SECTION_COLUMNS);
    let story_col = find(STORY_COLUMNS);

    let mut sections: Vec<StorySection> = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in csv.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| load_error(line, None, e.to_string()))?;
        let story = story_col
            .and_then(|c| row.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .unwrap_or(default_story_id)
            .to_string();
        let text = row.get(text_col).unwrap_or_default().trim();
        if text.is_empty() {
            continue;
        }
        let index = match section_col {
            Some(c) => {
                let cell = row.get(c).unwrap_or_default();
                cell.split(|ch: char| !ch.is_ascii_digit())
                    .find(|s| !s.is_empty())
                    .and_then(|s| s.parse::<u32>().ok())
                    .filter(|&n| n > 0)
                    .ok_or_else(|| load_error(line, Some(story.clone()), format!("bad section cell {cell:?}")))?
            }
            None => sections.iter().filter(|s| s.story_id == story).count() as u32 + 1,
        };
        if seen.insert((story.clone(), index)) {
            sections.push(StorySection::new(story, index, text));
        }
    }
    Ok(sections)
}

fn load_error(line: usize, story_id: Option<String>, message: String) -> AnnotationError {
    AnnotationError::Load {
        line,
        story_id,
        message,
    }
}
