use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{check_qa, AnnotationError, AnnotationRecord, StorySection};
use crate::kg::{normalize_concept, Triple, TripleKey};
use crate::rank::{RankedTriple, Recommender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Started,
    ConceptChosen,
    TripleChosen,
    Completed,
    Abandoned,
}

impl std::fmt::Display for SessionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    ChooseConcept { concept: String },
    ChooseTriple { triple: TripleKey },
    SubmitQa { question: String, answer: String },
    StepBack,
    Abandon,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::ChooseConcept { .. } => "ChooseConcept",
            Event::ChooseTriple { .. } => "ChooseTriple",
            Event::SubmitQa { .. } => "SubmitQa",
            Event::StepBack => "StepBack",
            Event::Abandon => "Abandon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

/// One annotator working through one section: concept, then triple, then
/// a QA pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub session_id: String,
    pub annotator_id: String,
    pub story_id: String,
    pub section_index: u32,
    pub section_text: String,
    pub state: SessionState,
    pub chosen_concept: Option<String>,
    pub recommended: Option<Vec<RankedTriple>>,
    pub chosen_triple: Option<Triple>,
    pub qa: Option<QaPair>,
    /// Lint-level findings from the last QA submission.
    #[serde(default)]
    pub warnings: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl AnnotationSession {
    pub fn new(annotator_id: impl Into<String>, section: &StorySection) -> Self {
        let now = Utc::now();
        AnnotationSession {
            session_id: uuid::Uuid::new_v4().to_string(),
            annotator_id: annotator_id.into(),
            story_id: section.story_id.clone(),
            section_index: section.section_index,
            section_text: section.text.clone(),
            state: SessionState::Started,
            chosen_concept: None,
            recommended: None,
            chosen_triple: None,
            qa: None,
            warnings: Vec::new(),
            created_at: now,
            updated_at: now,
        }
    }

    /// Applies one event, returning the next session. The receiver is left
    /// untouched, so a rejected event never changes state.
    pub fn advance(&self, event: &Event, recommender: &dyn Recommender) -> Result<Self, AnnotationError> {
        use SessionState::*;
        let illegal = || AnnotationError::State {
            state: self.state,
            event: event.name().to_string(),
        };
        let mut next = self.clone();
        match (self.state, event) {
            (Started, Event::ChooseConcept { concept }) => {
                let key = normalize_concept(concept).map_err(|e| AnnotationError::Validation {
                    violations: vec![e.to_string()],
                })?;
                // Snapshot: later index changes do not affect this session.
                next.recommended = Some(recommender.recommend(&key));
                next.chosen_concept = Some(key);
                next.state = ConceptChosen;
            }
            (ConceptChosen, Event::ChooseTriple { triple }) => {
                let found = self
                    .recommended
                    .iter()
                    .flatten()
                    .find(|r| &r.triple.key() == triple)
                    .ok_or_else(|| AnnotationError::Validation {
                        violations: vec![format!(
                            "triple ({}, {}, {}) is not in the recommended list",
                            triple.source, triple.relation, triple.target
                        )],
                    })?;
                next.chosen_triple = Some(found.triple.clone());
                next.state = TripleChosen;
            }
            (TripleChosen, Event::SubmitQa { question, answer }) => {
                let triple = self.chosen_triple.as_ref().ok_or_else(illegal)?;
                let check = check_qa(triple, question, answer);
                if !check.violations.is_empty() {
                    return Err(AnnotationError::Validation {
                        violations: check.violations,
                    });
                }
                next.qa = Some(QaPair {
                    question: question.trim().to_string(),
                    answer: answer.trim().to_string(),
                });
                next.warnings = check.warnings;
                next.state = Completed;
            }
            (ConceptChosen, Event::StepBack) => {
                next.chosen_concept = None;
                next.recommended = None;
                next.state = Started;
            }
            (TripleChosen, Event::StepBack) => {
                next.chosen_triple = None;
                next.state = ConceptChosen;
            }
            (Started | ConceptChosen | TripleChosen, Event::Abandon) => next.state = Abandoned,
            _ => return Err(illegal()),
        }
        next.updated_at = Utc::now();
        Ok(next)
    }

    /// Describes the first broken state invariant, if any.
    pub fn invariant_violation(&self) -> Option<String> {
        use SessionState::*;
        let concept = self.chosen_concept.is_some() && self.recommended.is_some();
        let triple_listed = self.chosen_triple.as_ref().is_some_and(|t| {
            self.recommended
                .iter()
                .flatten()
                .any(|r| r.triple.key() == t.key())
        });
        match self.state {
            ConceptChosen if !concept => Some("ConceptChosen without concept and recommendations".into()),
            TripleChosen if !(concept && triple_listed) => Some("TripleChosen without a recommended triple".into()),
            Completed if !(concept && triple_listed) => Some("Completed without concept and triple".into()),
            Completed => {
                let qa = self.qa.as_ref()?;
                let check = check_qa(self.chosen_triple.as_ref()?, &qa.question, &qa.answer);
                (!check.violations.is_empty()).then(|| check.violations.join("; "))
            }
            _ => None,
        }
    }

    /// The record a completed session produces.
    pub fn to_record(&self, record_id: u64, created_at: DateTime<Utc>) -> Result<AnnotationRecord, AnnotationError> {
        let (Some(concept), Some(triple), Some(qa), SessionState::Completed) =
            (&self.chosen_concept, &self.chosen_triple, &self.qa, self.state)
        else {
            return Err(AnnotationError::State {
                state: self.state,
                event: "save".into(),
            });
        };
        Ok(AnnotationRecord {
            record_id,
            session_id: self.session_id.clone(),
            story_id: self.story_id.clone(),
            section_index: self.section_index,
            section_text: self.section_text.clone(),
            concept: concept.clone(),
            triple: triple.clone(),
            recommended: self
                .recommended
                .iter()
                .flatten()
                .map(|r| r.triple.clone())
                .collect(),
            question: qa.question.clone(),
            answer: qa.answer.clone(),
            annotator_id: self.annotator_id.clone(),
            created_at,
            split: None,
        })
    }
}
