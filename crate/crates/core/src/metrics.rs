//! Rouge-L, question-type classification and distribution statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::RelationKind;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("at least one reference is required")]
    NoReferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_lcs(lcs: usize, candidate_len: usize, reference_len: usize) -> RougeScore {
        if lcs == 0 || candidate_len == 0 || reference_len == 0 {
            return RougeScore::default();
        }
        let precision = lcs as f64 / candidate_len as f64;
        let recall = lcs as f64 / reference_len as f64;
        let f1 = 2.0 * precision * recall / (precision + recall);
        RougeScore { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Max,
    Mean,
}

impl std::str::FromStr for Reduction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Reduction::Max),
            "mean" => Ok(Reduction::Mean),
            other => Err(format!("unknown reduction {other:?} (expected max or mean)")),
        }
    }
}

/// Lowercases, turns punctuation into spaces and splits on whitespace.
/// Apostrophes inside words are dropped so "bag's" stays one token.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() || c.is_whitespace() {
            cleaned.push(c);
        } else if c != '\'' && c != '’' {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_lcs(lcs_len(candidate, reference), candidate.len(), reference.len())
}

pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    rouge_l_tokens(&normalize_tokens(candidate), &normalize_tokens(reference))
}

/// Scores against every reference and reduces. `Max` keeps the whole
/// score of the best-F1 reference; `Mean` averages each component.
pub fn rouge_l_multi_ref<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    reduction: Reduction,
) -> Result<RougeScore, MetricsError> {
    if references.is_empty() {
        return Err(MetricsError::NoReferences);
    }
    let cand = normalize_tokens(candidate);
    let scores = references
        .iter()
        .map(|r| rouge_l_tokens(&cand, &normalize_tokens(r.as_ref())));
    Ok(match reduction {
        Reduction::Max => scores
            .reduce(|best, s| if s.f1 > best.f1 { s } else { best })
            .unwrap_or_default(),
        Reduction::Mean => {
            let n = references.len() as f64;
            let sum = scores.fold(RougeScore::default(), |acc, s| RougeScore {
                precision: acc.precision + s.precision,
                recall: acc.recall + s.recall,
                f1: acc.f1 + s.f1,
            });
            RougeScore {
                precision: sum.precision / n,
                recall: sum.recall / n,
                f1: sum.f1 / n,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    What,
    Why,
    Who,
    Where,
    When,
    How,
    Other,
}

impl QuestionType {
    pub const ALL: [QuestionType; 7] = [
        QuestionType::What,
        QuestionType::Why,
        QuestionType::Who,
        QuestionType::Where,
        QuestionType::When,
        QuestionType::How,
        QuestionType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::What => "what",
            QuestionType::Why => "why",
            QuestionType::Who => "who",
            QuestionType::Where => "where",
            QuestionType::When => "when",
            QuestionType::How => "how",
            QuestionType::Other => "other",
        }
    }
}

impl std::fmt::Display for QuestionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The first interrogative word in the question decides its type.
pub fn question_type(question: &str) -> QuestionType {
    for token in question.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '’')) {
        let token = token.to_lowercase();
        let token = token.trim_matches(|c| c == '\'' || c == '’');
        let base = token
            .strip_suffix("'s")
            .or_else(|| token.strip_suffix("’s"))
            .unwrap_or(token);
        let kind = match base {
            "what" | "whats" => QuestionType::What,
            "why" => QuestionType::Why,
            "who" => QuestionType::Who,
            "where" => QuestionType::Where,
            "when" => QuestionType::When,
            "how" => QuestionType::How,
            _ => continue,
        };
        return kind;
    }
    QuestionType::Other
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow<K> {
    pub key: K,
    pub count: usize,
    pub fraction: f64,
}

/// Counts and fractions, sorted by count descending then key.
fn distribution<K: Ord + Clone>(keys: impl IntoIterator<Item = K>) -> Vec<DistributionRow<K>> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let mut rows: Vec<_> = counts
        .into_iter()
        .map(|(key, count)| DistributionRow {
            key,
            count,
            fraction: count as f64 / total as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    rows
}

pub fn question_type_distribution<S: AsRef<str>>(questions: &[S]) -> Vec<DistributionRow<QuestionType>> {
    distribution(questions.iter().map(|q| question_type(q.as_ref())))
}

pub fn relation_distribution<'a>(
    relations: impl IntoIterator<Item = &'a RelationKind>,
) -> Vec<DistributionRow<RelationKind>> {
    distribution(relations.into_iter().cloned())
}

/// Mean, population SD, min and max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            count: values.len(),
            mean,
            sd: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}
