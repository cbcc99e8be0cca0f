//! Candidate concept extraction from story sections.
//!
//! Function words and punctuation are dropped by part of speech, and the
//! remaining nouns, verbs and adjectives are kept only when their lemma is
//! tier 1 or tier 2 vocabulary. Semantic roles (agent, goal, result) can be
//! supplied through a pre-tagged import and move the tokens that carry them
//! to the front of the candidate list.

mod lexicon;
mod pretagged;
mod tokenize;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::normalize_concept;

pub use lexicon::{LexiconEntry, Tier, TierLexicon, DEFAULT_TIER1_MAX_RANK, DEFAULT_TIER2_MAX_RANK};
pub use pretagged::{apply_roles, import_pretagged, PretaggedSection, RoleOutcome, RoleSpan};
pub use tokenize::{count_tokens, tokenize, tokenize_untagged};

#[derive(Debug, Error, PartialEq)]
pub enum ConceptError {
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("pre-tagged input: field `{field}`: {message}")]
    Import { field: String, message: String },
}

/// Universal part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Noun,
    Propn,
    Verb,
    #[serde(rename = "ADJ")]
    Adjective,
    Adv,
    Pron,
    Num,
    Aux,
    Adp,
    Det,
    Part,
    Cconj,
    Sconj,
    Intj,
    Punct,
    Sym,
    X,
}

impl Pos {
    /// Tags that never yield a candidate.
    pub const EXCLUDED: [Pos; 7] = [Pos::Aux, Pos::Adp, Pos::Det, Pos::Part, Pos::Punct, Pos::Sym, Pos::X];

    pub fn is_excluded(self) -> bool {
        Self::EXCLUDED.contains(&self)
    }

    pub fn is_open_class_candidate(self) -> bool {
        matches!(self, Pos::Noun | Pos::Verb | Pos::Adjective)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Propn => "PROPN",
            Pos::Verb => "VERB",
            Pos::Adjective => "ADJ",
            Pos::Adv => "ADV",
            Pos::Pron => "PRON",
            Pos::Num => "NUM",
            Pos::Aux => "AUX",
            Pos::Adp => "ADP",
            Pos::Det => "DET",
            Pos::Part => "PART",
            Pos::Cconj => "CCONJ",
            Pos::Sconj => "SCONJ",
            Pos::Intj => "INTJ",
            Pos::Punct => "PUNCT",
            Pos::Sym => "SYM",
            Pos::X => "X",
        }
    }

    /// Accepts UPOS tags and a few long names, case-insensitively.
    pub fn parse(s: &str) -> Option<Pos> {
        let pos = match s.trim().to_ascii_lowercase().as_str() {
            "noun" | "n" => Pos::Noun,
            "propn" => Pos::Propn,
            "verb" | "v" => Pos::Verb,
            "adj" | "adjective" | "a" => Pos::Adjective,
            "adv" | "adverb" => Pos::Adv,
            "pron" | "pronoun" => Pos::Pron,
            "num" | "numeral" => Pos::Num,
            "aux" | "auxiliary" => Pos::Aux,
            "adp" | "adposition" => Pos::Adp,
            "det" | "determiner" => Pos::Det,
            "part" | "particle" => Pos::Part,
            "cconj" | "conj" => Pos::Cconj,
            "sconj" => Pos::Sconj,
            "intj" | "interjection" => Pos::Intj,
            "punct" | "punctuation" => Pos::Punct,
            "sym" | "symbol" => Pos::Sym,
            "x" | "other" => Pos::X,
            _ => return None,
        };
        Some(pos)
    }
}

/// Half-open character offsets `[start, end)` into the section text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// The substring at this span, if the span is valid for `text`.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        if self.start >= self.end {
            return None;
        }
        let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let start = indices.nth(self.start)?;
        let end = indices.nth(self.end - self.start - 1)?;
        Some(&text[start..end])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lemma: String,
    pub pos: Pos,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Agent,
    Goal,
    Result,
}

impl Role {
    pub fn parse(label: &str) -> Option<Role> {
        match label.trim().to_ascii_lowercase().as_str() {
            "agent" => Some(Role::Agent),
            "goal" => Some(Role::Goal),
            "result" => Some(Role::Result),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    #[serde(flatten)]
    pub span: Span,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConcept {
    pub lemma: String,
    pub pos: Pos,
    pub spans: Vec<Occurrence>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub roles: BTreeSet<Role>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FilterConfig {
    /// Drop lexicon entries whose concreteness score is below this value.
    /// Entries without a score always pass.
    pub min_concreteness: Option<f64>,
}

pub fn filter_candidates(tokens: &[Token], lexicon: &TierLexicon) -> Vec<CandidateConcept> {
    filter_candidates_with(tokens, lexicon, &FilterConfig::default())
}

/// Keeps tier 1/2 nouns, verbs and adjectives, merging repeated lemmas into
/// one candidate; candidates appear in first-occurrence order.
pub fn filter_candidates_with(
    tokens: &[Token],
    lexicon: &TierLexicon,
    config: &FilterConfig,
) -> Vec<CandidateConcept> {
    let mut out: Vec<CandidateConcept> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for token in tokens {
        if token.pos.is_excluded() || !token.pos.is_open_class_candidate() {
            continue;
        }
        let Ok(lemma) = normalize_concept(&token.lemma) else {
            continue;
        };
        let Some(entry) = lexicon.get(&lemma) else {
            continue;
        };
        if !entry.pos.contains(&token.pos) {
            continue;
        }
        if let (Some(min), Some(score)) = (config.min_concreteness, entry.concreteness) {
            if score < min {
                continue;
            }
        }
        let occurrence = Occurrence {
            span: token.span,
            text: token.text.clone(),
        };
        match seen.get(&lemma) {
            Some(&i) => out[i].spans.push(occurrence),
            None => {
                seen.insert(lemma.clone(), out.len());
                out.push(CandidateConcept {
                    lemma,
                    pos: token.pos,
                    spans: vec![occurrence],
                    roles: BTreeSet::new(),
                });
            }
        }
    }
    out
}

/// Tokenizes with the default tagger and filters.
pub fn extract_candidates(text: &str, lexicon: &TierLexicon) -> Vec<CandidateConcept> {
    filter_candidates(&tokenize(text, lexicon), lexicon)
}
