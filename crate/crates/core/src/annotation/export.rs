use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnnotationError, AnnotationRecord, Split};
use crate::concepts::count_tokens;
use crate::kg::{RelationKind, Triple};
use crate::metrics::{question_type_distribution, relation_distribution, DistributionRow, QuestionType, Summary};

pub type SplitMap = BTreeMap<String, Split>;

/// Reads a story → split assignment: either a JSON object
/// `{"story": "train", ...}` or one `story<TAB or comma>split` per line.
pub fn read_split_map(text: &str) -> Result<SplitMap, String> {
    if text.trim_start().starts_with('{') {
        let raw: BTreeMap<String, String> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        return raw.into_iter().map(|(k, v)| Ok((k, v.parse()?))).collect();
    }
    let mut map = SplitMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (story, split) = line
            .rsplit_once(['\t', ','])
            .ok_or_else(|| format!("line {}: expected story and split", no + 1))?;
        map.insert(story.trim().to_string(), split.parse().map_err(|e| format!("line {}: {e}", no + 1))?);
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportTriple {
    pub source: String,
    pub relation_phrase: String,
    pub target: String,
    pub relation: String,
    pub weight: f64,
}

/// One line of the exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub story_id: String,
    pub section_index: u32,
    pub section_text: String,
    pub concept: String,
    pub triple: ExportTriple,
    pub question: String,
    pub answer: String,
    pub split: Split,
    pub record_id: u64,
    pub session_id: String,
    pub annotator_id: String,
    pub created_at: chrono::DateTime<chrono::Utc>,
    #[serde(default)]
    pub recommended: Vec<Triple>,
}

impl ExportRecord {
    fn from_record(r: &AnnotationRecord, split: Split) -> Self {
        ExportRecord {
            story_id: r.story_id.clone(),
            section_index: r.section_index,
            section_text: r.section_text.clone(),
            concept: r.concept.clone(),
            triple: ExportTriple {
                source: r.triple.source_display.clone(),
                relation_phrase: r.triple.relation.phrase().to_string(),
                target: r.triple.target_display.clone(),
                relation: r.triple.relation.name().to_string(),
                weight: r.triple.weight,
            },
            question: r.question.clone(),
            answer: r.answer.clone(),
            split,
            record_id: r.record_id,
            session_id: r.session_id.clone(),
            annotator_id: r.annotator_id.clone(),
            created_at: r.created_at,
            recommended: r.recommended.clone(),
        }
    }

    fn into_record(self) -> Result<AnnotationRecord, String> {
        let relation = Some(RelationKind::from_name(&self.triple.relation))
            .filter(RelationKind::is_whitelisted)
            .or_else(|| RelationKind::from_phrase(&self.triple.relation_phrase))
            .ok_or_else(|| format!("unknown relation {:?}", self.triple.relation))?;
        let triple = Triple::new(&self.triple.source, relation, &self.triple.target, self.triple.weight)
            .map_err(|e| e.to_string())?;
        Ok(AnnotationRecord {
            record_id: self.record_id,
            session_id: self.session_id,
            story_id: self.story_id,
            section_index: self.section_index,
            section_text: self.section_text,
            concept: self.concept,
            triple,
            recommended: self.recommended,
            question: self.question,
            answer: self.answer,
            annotator_id: self.annotator_id,
            created_at: self.created_at,
            split: Some(self.split),
        })
    }
}

/// Writes one JSON line per record, assigning splits by story. Fails
/// before writing anything if any story is unmapped. Returns the number of
/// lines written.
pub fn export_dataset(
    records: &[AnnotationRecord],
    splits: &SplitMap,
    mut out: impl Write,
) -> Result<usize, AnnotationError> {
    let missing: BTreeSet<&str> = records
        .iter()
        .filter(|r| !splits.contains_key(&r.story_id))
        .map(|r| r.story_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(AnnotationError::Export {
            missing: missing.into_iter().map(str::to_string).collect(),
        });
    }
    for r in records {
        let line = ExportRecord::from_record(r, splits[&r.story_id]);
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(records.len())
}

/// Reads an export back into records (with their split set).
pub fn import_dataset(reader: impl Read) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let mut out = Vec::new();
    for (no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let import_err = |message: String| AnnotationError::Import { line: no + 1, message };
        let rec: ExportRecord = serde_json::from_str(&line).map_err(|e| import_err(e.to_string()))?;
        out.push(rec.into_record().map_err(import_err)?);
    }
    Ok(out)
}

/// The fields dataset statistics need, from any supported source.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub story_id: String,
    pub section: String,
    pub section_text: String,
    pub question: String,
    pub answer: String,
    pub relation: Option<RelationKind>,
    pub split: Option<Split>,
}

impl From<&AnnotationRecord> for DatasetRow {
    fn from(r: &AnnotationRecord) -> Self {
        DatasetRow {
            story_id: r.story_id.clone(),
            section: r.section_index.to_string(),
            section_text: r.section_text.clone(),
            question: r.question.clone(),
            answer: r.answer.clone(),
            relation: Some(r.triple.relation.clone()),
            split: r.split,
        }
    }
}

const STORY_KEYS: &[&str] = &["story_id", "story_name", "story", "story_title"];
const SECTION_KEYS: &[&str] = &["section_index", "section_id", "cor_section", "section"];
const TEXT_KEYS: &[&str] = &["section_text", "text", "story_section", "content"];
const QUESTION_KEYS: &[&str] = &["question", "question_text", "q"];
const ANSWER_KEYS: &[&str] = &["answer", "answer_text", "answer1", "a"];
const RELATION_KEYS: &[&str] = &["relation_phrase", "relation", "rel", "predicate"];
const TRIPLE_KEYS: &[&str] = &["triple", "knowledge", "kg_triple", "triplet"];
const SPLIT_KEYS: &[&str] = &["split", "subset", "partition"];

/// Loads dataset rows from JSON lines (this crate's export or any object
/// carrying the usual field names) or CSV with a header row. A split can
/// be implied by the file name (`train`, `val`, `test`).
pub fn load_dataset_rows(path: &Path) -> Result<Vec<DatasetRow>, AnnotationError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_ascii_lowercase();
    let implied = ["train", "val", "valid", "validation", "dev", "test"]
        .iter()
        .find(|s| name.contains(*s))
        .and_then(|s| s.parse::<Split>().ok());
    let file = std::fs::File::open(path)?;
    let rows = if name.ends_with(".csv") {
        dataset_rows_from_csv(file)?
    } else {
        dataset_rows_from_jsonl(file)?
    };
    Ok(rows
        .into_iter()
        .map(|mut r| {
            r.split = r.split.or(implied);
            r
        })
        .collect())
}

fn pick(fields: &HashMap<String, String>, keys: &[&str]) -> Option<String> {
    keys.iter()
        .find_map(|k| fields.get(*k))
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
}

fn row_from_fields(fields: HashMap<String, String>, line: usize) -> Result<DatasetRow, AnnotationError> {
    let need = |keys: &[&str], what: &str| {
        pick(&fields, keys).ok_or_else(|| AnnotationError::Import {
            line,
            message: format!("no {what} field"),
        })
    };
    let relation = pick(&fields, RELATION_KEYS)
        .or_else(|| pick(&fields, TRIPLE_KEYS).and_then(|t| relation_from_triple_text(&t)))
        .map(|r| RelationKind::parse_any(&r).unwrap_or(RelationKind::Other(r)));
    Ok(DatasetRow {
        story_id: need(STORY_KEYS, "story")?,
        section: pick(&fields, SECTION_KEYS).unwrap_or_default(),
        section_text: pick(&fields, TEXT_KEYS).unwrap_or_default(),
        question: need(QUESTION_KEYS, "question")?,
        answer: pick(&fields, ANSWER_KEYS).unwrap_or_default(),
        relation,
        split: pick(&fields, SPLIT_KEYS).and_then(|s| s.parse().ok()),
    })
}

/// `(bag, used for, carrying things)` → `used for`.
fn relation_from_triple_text(text: &str) -> Option<String> {
    let inner = text.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    let parts: Vec<&str> = inner.split(',').map(|p| p.trim().trim_matches(['\'', '"'])).collect();
    (parts.len() >= 3).then(|| parts[1].to_string())
}

fn flatten_json(value: &Value, out: &mut HashMap<String, String>) {
    if let Value::Object(map) = value {
        for (k, v) in map {
            let k = k.to_ascii_lowercase();
            match v {
                Value::String(s) => {
                    out.entry(k).or_insert_with(|| s.clone());
                }
                Value::Number(n) => {
                    out.entry(k).or_insert_with(|| n.to_string());
                }
                Value::Object(_) if k == "triple" => {
                    if let Some(p) = v.get("relation_phrase").or_else(|| v.get("relation")).and_then(Value::as_str) {
                        out.entry("relation_phrase".into()).or_insert_with(|| p.to_string());
                    }
                }
                Value::Array(items) if TRIPLE_KEYS.contains(&k.as_str()) && items.len() == 3 => {
                    if let Some(p) = items[1].as_str() {
                        out.entry("relation_phrase".into()).or_insert_with(|| p.to_string());
                    }
                }
                _ => {}
            }
        }
    }
}

pub fn dataset_rows_from_jsonl(reader: impl Read) -> Result<Vec<DatasetRow>, AnnotationError> {
    let mut rows = Vec::new();
    for (no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| AnnotationError::Import {
            line: no + 1,
            message: e.to_string(),
        })?;
        let mut fields = HashMap::new();
        flatten_json(&value, &mut fields);
        rows.push(row_from_fields(fields, no + 1)?);
    }
    Ok(rows)
}

pub fn dataset_rows_from_csv(reader: impl Read) -> Result<Vec<DatasetRow>, AnnotationError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers: Vec<String> = csv
        .headers()
        .map_err(|e| AnnotationError::Import {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| AnnotationError::Import {
            line: i + 2,
            message: e.to_string(),
        })?;
        let fields = headers
            .iter()
            .zip(rec.iter())
            .map(|(h, v)| (h.clone(), v.to_string()))
            .collect();
        rows.push(row_from_fields(fields, i + 2)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStatistics {
    pub stories: usize,
    pub sections: usize,
    pub questions: usize,
    /// Row label → summary, in display order.
    pub rows: Vec<(String, Summary)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticsReport {
    /// Keyed by split name; rows without a split are under `unsplit`, and
    /// `all` covers everything.
    pub splits: BTreeMap<String, SplitStatistics>,
    pub question_types: Vec<DistributionRow<QuestionType>>,
    pub relations: Vec<DistributionRow<RelationKind>>,
}

pub const STAT_ROWS: [&str; 7] = [
    "sections/story",
    "tokens/story",
    "tokens/section",
    "questions/story",
    "questions/section",
    "tokens/question",
    "tokens/answer",
];

fn split_statistics(rows: &[&DatasetRow]) -> SplitStatistics {
    // story → section → (token count, questions)
    let mut stories: BTreeMap<&str, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for r in rows {
        let entry = stories
            .entry(&r.story_id)
            .or_default()
            .entry(&r.section)
            .or_insert((count_tokens(&r.section_text), 0));
        entry.1 += 1;
    }
    let per_story = |f: &dyn Fn(&BTreeMap<&str, (usize, usize)>) -> usize| -> Vec<f64> {
        stories.values().map(|s| f(s) as f64).collect()
    };
    let sections: Vec<(usize, usize)> = stories.values().flat_map(|s| s.values().copied()).collect();
    let columns: [Vec<f64>; 7] = [
        per_story(&|s| s.len()),
        per_story(&|s| s.values().map(|v| v.0).sum()),
        sections.iter().map(|v| v.0 as f64).collect(),
        per_story(&|s| s.values().map(|v| v.1).sum()),
        sections.iter().map(|v| v.1 as f64).collect(),
        rows.iter().map(|r| count_tokens(&r.question) as f64).collect(),
        rows.iter().map(|r| count_tokens(&r.answer) as f64).collect(),
    ];
    SplitStatistics {
        stories: stories.len(),
        sections: sections.len(),
        questions: rows.len(),
        rows: STAT_ROWS
            .iter()
            .zip(columns)
            .filter_map(|(label, values)| Summary::of(&values).map(|s| (label.to_string(), s)))
            .collect(),
    }
}

/// Per-split descriptive statistics plus question-type and relation
/// distributions over all rows.
pub fn summary_statistics(rows: &[DatasetRow]) -> StatisticsReport {
    let mut groups: BTreeMap<String, Vec<&DatasetRow>> = BTreeMap::new();
    for r in rows {
        let key = r.split.map_or("unsplit".to_string(), |s| s.to_string());
        groups.entry(key).or_default().push(r);
        groups.entry("all".into()).or_default().push(r);
    }
    let questions: Vec<&str> = rows.iter().map(|r| r.question.as_str()).collect();
    let relations: Vec<RelationKind> = rows.iter().filter_map(|r| r.relation.clone()).collect();
    StatisticsReport {
        splits: groups.into_iter().map(|(k, v)| (k, split_statistics(&v))).collect(),
        question_types: question_type_distribution(&questions),
        relations: relation_distribution(&relations),
    }
}
