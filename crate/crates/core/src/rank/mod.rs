//! Triple ranking for the recommendation list.
//!
//! Each candidate triple of a concept is rendered as a short sentence, the
//! sentences are embedded with TF-IDF fit on that candidate set alone, and
//! every triple is scored `1 − s̄ + w` where `s̄` is its mean cosine
//! similarity to the other candidates and `w` is the ConceptNet weight.
//! Redundant triples are pushed down; credible ones up.

mod tfidf;

use std::cmp::Ordering;
use std::num::NonZeroUsize;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{display_concept, KnowledgeIndex, Triple};

pub use tfidf::{tokenize, TfIdf};

pub const DEFAULT_TOP_K: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("no candidate documents")]
    EmptyCandidates,
    #[error("top_k must be at least 1")]
    ZeroTopK,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleDocument {
    pub triple_index: usize,
    pub text: String,
}

/// `"bag is used for carrying things"`.
pub fn triple_to_document(triple_index: usize, triple: &Triple) -> TripleDocument {
    TripleDocument {
        triple_index,
        text: format!(
            "{} {} {}",
            display_concept(&triple.source),
            triple.relation.phrase(),
            display_concept(&triple.target)
        ),
    }
}

/// Mean TF-IDF cosine similarity of each document to the others, with the
/// TF-IDF statistics fit on `docs` only. A lone document scores 0.
pub fn mean_similarities(docs: &[TripleDocument]) -> Result<Vec<f64>, RankError> {
    if docs.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    Ok(TfIdf::fit(&texts).mean_cosine_to_others())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Higher weight first, then lexicographic (source, relation, target).
    #[default]
    WeightThenLexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub top_k: NonZeroUsize,
    pub tie_break: TieBreak,
    /// Divide weights by the candidate set's maximum before scoring. Off by
    /// default: raw weights are used as-is even when they exceed 1.
    pub normalize_weights: bool,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            top_k: NonZeroUsize::new(DEFAULT_TOP_K).unwrap(),
            tie_break: TieBreak::default(),
            normalize_weights: false,
        }
    }
}

impl RankingConfig {
    pub fn with_top_k(top_k: usize) -> Result<Self, RankError> {
        Ok(RankingConfig {
            top_k: NonZeroUsize::new(top_k).ok_or(RankError::ZeroTopK)?,
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTriple {
    pub triple: Triple,
    pub mean_similarity: f64,
    /// The weight term that entered the score. Equals `triple.weight`
    /// unless weight normalization is enabled.
    pub weight: f64,
    pub score: f64,
}

/// Scores and orders one concept's candidate triples, returning at most
/// `top_k`. The result does not depend on the input order.
pub fn rank(triples: &[Triple], config: &RankingConfig) -> Vec<RankedTriple> {
    if triples.is_empty() {
        return Vec::new();
    }
    // Canonical order first, so floating-point sums and therefore scores
    // are identical under any permutation of the input.
    let mut candidates: Vec<&Triple> = triples.iter().collect();
    candidates.sort_by(|a, b| a.key().cmp(&b.key()).then(a.weight.total_cmp(&b.weight)));

    let docs: Vec<TripleDocument> = candidates
        .iter()
        .enumerate()
        .map(|(i, t)| triple_to_document(i, t))
        .collect();
    let sims = mean_similarities(&docs).expect("candidate set is non-empty");

    let max_weight = candidates.iter().map(|t| t.weight).fold(0.0f64, f64::max);
    let mut ranked: Vec<RankedTriple> = candidates
        .into_iter()
        .zip(sims)
        .map(|(t, s)| {
            let w = if config.normalize_weights && max_weight > 0.0 {
                t.weight / max_weight
            } else {
                t.weight
            };
            RankedTriple {
                triple: t.clone(),
                mean_similarity: s,
                weight: w,
                score: 1.0 - s + w,
            }
        })
        .collect();
    ranked.sort_by(|a, b| compare_ranked(a, b, config.tie_break));
    ranked.truncate(config.top_k.get());
    ranked
}

/// Ordering used by [`rank`]: score descending, then the tie-break rule.
pub fn compare_ranked(a: &RankedTriple, b: &RankedTriple, tie_break: TieBreak) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| match tie_break {
        TieBreak::WeightThenLexicographic => b
            .triple
            .weight
            .total_cmp(&a.triple.weight)
            .then_with(|| a.triple.key().cmp(&b.triple.key())),
    })
}

/// Produces the recommendation list for a selected concept.
pub trait Recommender: Send + Sync {
    fn recommend(&self, concept: &str) -> Vec<RankedTriple>;
}

/// Index lookup followed by [`rank`].
#[derive(Debug, Clone)]
pub struct KnowledgeMatcher {
    index: Arc<KnowledgeIndex>,
    config: RankingConfig,
}

impl KnowledgeMatcher {
    pub fn new(index: Arc<KnowledgeIndex>, config: RankingConfig) -> Self {
        KnowledgeMatcher { index, config }
    }

    pub fn index(&self) -> &KnowledgeIndex {
        &self.index
    }

    pub fn config(&self) -> &RankingConfig {
        &self.config
    }
}

impl Recommender for KnowledgeMatcher {
    fn recommend(&self, concept: &str) -> Vec<RankedTriple> {
        rank(&self.index.lookup(concept), &self.config)
    }
}
