//! Second-annotator validation: task sampling, result intake and
//! agreement measures.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{AnnotationRecord, JsonlLog, QaPair, Split};
use crate::kg::{Triple, TripleKey};
use crate::metrics::rouge_l;

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("split has {available} records, {requested} requested")]
    Sampling { available: usize, requested: usize },
    #[error("no validator other than {0:?} is available")]
    NoValidator(String),
    #[error("invalid result: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("task {0:?} already has a different result")]
    Conflict(String),
    #[error("persistence: {0}")]
    Persistence(#[from] std::io::Error),
}

impl ValidationError {
    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::Sampling { .. } | ValidationError::NoValidator(_) => "sampling_error",
            ValidationError::Invalid(_) => "validation_error",
            ValidationError::UnknownTask(_) => "not_found",
            ValidationError::Conflict(_) => "conflict",
            ValidationError::Persistence(_) => "persistence_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTask {
    pub task_id: String,
    pub original: AnnotationRecord,
    pub recommended: Vec<Triple>,
    pub validator_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub task_id: String,
    /// The validator's ranking, best first.
    pub top3: Vec<TripleKey>,
    /// The validator's own QA pair for their top triple.
    pub validator_qa: QaPair,
    /// The validator's answer to the original question.
    pub validator_answer: String,
    pub started_at: DateTime<Utc>,
    pub submitted_at: DateTime<Utc>,
}

/// Draws `n` records of `split` uniformly without replacement and assigns
/// validators round-robin, skipping each record's own annotator. The same
/// seed and inputs always give the same tasks.
pub fn sample_tasks(
    records: &[AnnotationRecord],
    split: Split,
    n: usize,
    seed: u64,
    validators: &[String],
) -> Result<Vec<ValidationTask>, ValidationError> {
    let mut pool: Vec<&AnnotationRecord> = records.iter().filter(|r| r.split == Some(split)).collect();
    if pool.len() < n {
        return Err(ValidationError::Sampling {
            available: pool.len(),
            requested: n,
        });
    }
    pool.sort_by_key(|r| r.record_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<&AnnotationRecord> = pool.choose_multiple(&mut rng, n).copied().collect();

    let mut tasks = Vec::with_capacity(n);
    let mut cursor = 0usize;
    for record in chosen {
        let validator = (0..validators.len())
            .map(|k| &validators[(cursor + k) % validators.len()])
            .position(|v| v != &record.annotator_id)
            .ok_or_else(|| ValidationError::NoValidator(record.annotator_id.clone()))?;
        let slot = (cursor + validator) % validators.len();
        cursor = slot + 1;
        let recommended = if record.recommended.is_empty() {
            vec![record.triple.clone()]
        } else {
            record.recommended.clone()
        };
        tasks.push(ValidationTask {
            task_id: format!("{seed}-{}", record.record_id),
            original: record.clone(),
            recommended,
            validator_id: validators[slot].clone(),
        });
    }
    Ok(tasks)
}

/// Checks the result-side rules for a task.
pub fn check_result(task: &ValidationTask, result: &ValidationResult) -> Result<(), ValidationError> {
    let mut problems = Vec::new();
    if result.task_id != task.task_id {
        problems.push(format!("result is for task {:?}", result.task_id));
    }
    let expected = task.recommended.len().min(3);
    if result.top3.len() != expected {
        problems.push(format!("top3 must list {expected} triples, got {}", result.top3.len()));
    }
    let listed: HashSet<TripleKey> = task.recommended.iter().map(Triple::key).collect();
    let mut seen = HashSet::new();
    for key in &result.top3 {
        if !listed.contains(key) {
            problems.push(format!(
                "({}, {}, {}) is not in the recommended list",
                key.source, key.relation, key.target
            ));
        }
        if !seen.insert(key) {
            problems.push(format!("({}, {}, {}) is listed twice", key.source, key.relation, key.target));
        }
    }
    if result.validator_qa.question.trim().is_empty() || result.validator_qa.answer.trim().is_empty() {
        problems.push("validator QA pair is incomplete".into());
    }
    if result.validator_answer.trim().is_empty() {
        problems.push("answer to the original question is empty".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ValidationError::Invalid(problems))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Entry {
    Task(ValidationTask),
    Result(ValidationResult),
}

struct StoreInner {
    log: JsonlLog,
    tasks: BTreeMap<String, ValidationTask>,
    results: BTreeMap<String, ValidationResult>,
}

/// Durable tasks and results; one result per task.
pub struct ValidationStore {
    inner: Mutex<StoreInner>,
}

impl ValidationStore {
    pub fn in_memory() -> Self {
        Self::from_entries(JsonlLog::in_memory(), Vec::new())
    }

    pub fn open(path: &Path) -> Result<Self, ValidationError> {
        let (log, entries, _) = JsonlLog::open::<Entry>(path)?;
        Ok(Self::from_entries(log, entries))
    }

    fn from_entries(log: JsonlLog, entries: Vec<Entry>) -> Self {
        let mut tasks = BTreeMap::new();
        let mut results = BTreeMap::new();
        for e in entries {
            match e {
                Entry::Task(t) => {
                    tasks.insert(t.task_id.clone(), t);
                }
                Entry::Result(r) => {
                    results.entry(r.task_id.clone()).or_insert(r);
                }
            }
        }
        ValidationStore {
            inner: Mutex::new(StoreInner { log, tasks, results }),
        }
    }

    /// Adds tasks not already present; returns how many were new.
    pub fn add_tasks(&self, tasks: &[ValidationTask]) -> Result<usize, ValidationError> {
        let mut inner = self.inner.lock().unwrap();
        let mut added = 0;
        for t in tasks {
            if inner.tasks.contains_key(&t.task_id) {
                continue;
            }
            inner.log.append(&Entry::Task(t.clone()))?;
            inner.tasks.insert(t.task_id.clone(), t.clone());
            added += 1;
        }
        Ok(added)
    }

    pub fn task(&self, task_id: &str) -> Option<ValidationTask> {
        self.inner.lock().unwrap().tasks.get(task_id).cloned()
    }

    pub fn tasks(&self) -> Vec<ValidationTask> {
        self.inner.lock().unwrap().tasks.values().cloned().collect()
    }

    /// Tasks assigned to `validator_id` that have no result yet.
    pub fn pending_for(&self, validator_id: &str) -> Vec<ValidationTask> {
        let inner = self.inner.lock().unwrap();
        inner
            .tasks
            .values()
            .filter(|t| t.validator_id == validator_id && !inner.results.contains_key(&t.task_id))
            .cloned()
            .collect()
    }

    /// Stores a result. Resubmitting an identical result returns the stored
    /// copy; a different one for the same task is a conflict.
    pub fn record_result(&self, result: ValidationResult) -> Result<ValidationResult, ValidationError> {
        let mut inner = self.inner.lock().unwrap();
        let task = inner
            .tasks
            .get(&result.task_id)
            .ok_or_else(|| ValidationError::UnknownTask(result.task_id.clone()))?;
        check_result(task, &result)?;
        if let Some(existing) = inner.results.get(&result.task_id) {
            return if same_submission(existing, &result) {
                Ok(existing.clone())
            } else {
                Err(ValidationError::Conflict(result.task_id))
            };
        }
        inner.log.append(&Entry::Result(result.clone()))?;
        inner.results.insert(result.task_id.clone(), result.clone());
        Ok(result)
    }

    pub fn results(&self) -> Vec<ValidationResult> {
        self.inner.lock().unwrap().results.values().cloned().collect()
    }

    /// Every task with its result, for completed tasks only.
    pub fn completed(&self) -> Vec<(ValidationTask, ValidationResult)> {
        let inner = self.inner.lock().unwrap();
        inner
            .results
            .values()
            .filter_map(|r| inner.tasks.get(&r.task_id).map(|t| (t.clone(), r.clone())))
            .collect()
    }
}

fn same_submission(a: &ValidationResult, b: &ValidationResult) -> bool {
    a.top3 == b.top3 && a.validator_qa == b.validator_qa && a.validator_answer == b.validator_answer
}

/// Sentence embeddings for the optional semantic-similarity measure.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAgreement {
    pub task_id: String,
    /// 1-based position of the original triple in the validator's list.
    pub original_rank: Option<usize>,
    pub rouge_l_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub tasks: usize,
    pub top3_agreement: f64,
    pub top1_agreement: f64,
    pub mean_rouge_l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_similarity: Option<f64>,
    pub per_task: Vec<TaskAgreement>,
}

/// "question answer", lowercased.
pub fn concatenate_qa(question: &str, answer: &str) -> String {
    format!("{question} {answer}").to_lowercase()
}

/// Agreement between original annotators and validators. Results are
/// processed in task-id order so the report does not depend on input order.
pub fn agreement_report(
    completed: &[(ValidationTask, ValidationResult)],
    embedder: Option<&dyn EmbeddingProvider>,
) -> AgreementReport {
    let mut items: Vec<&(ValidationTask, ValidationResult)> = completed.iter().collect();
    items.sort_by(|a, b| a.0.task_id.cmp(&b.0.task_id));

    let mut per_task = Vec::with_capacity(items.len());
    let mut embed_sum = 0.0;
    for (task, result) in &items {
        let original_key = task.original.triple.key();
        let original_rank = result.top3.iter().position(|k| k == &original_key).map(|i| i + 1);
        let original_qa = concatenate_qa(&task.original.question, &task.original.answer);
        let validator_qa = concatenate_qa(&result.validator_qa.question, &result.validator_qa.answer);
        if let Some(e) = embedder {
            embed_sum += cosine(&e.embed(&original_qa), &e.embed(&validator_qa));
        }
        per_task.push(TaskAgreement {
            task_id: task.task_id.clone(),
            original_rank,
            rouge_l_f1: rouge_l(&validator_qa, &original_qa).f1,
        });
    }
    let n = per_task.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    AgreementReport {
        tasks: n,
        top3_agreement: frac(per_task.iter().filter(|t| t.original_rank.is_some()).count()),
        top1_agreement: frac(per_task.iter().filter(|t| t.original_rank == Some(1)).count()),
        mean_rouge_l: if n == 0 {
            0.0
        } else {
            per_task.iter().map(|t| t.rouge_l_f1).sum::<f64>() / n as f64
        },
        embedding_similarity: embedder.filter(|_| n > 0).map(|_| embed_sum / n as f64),
        per_task,
    }
}
