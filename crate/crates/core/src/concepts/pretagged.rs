//! Pre-tagged section import.
//!
//! One JSON object per line:
//!
//! ```json
//! {"id": "tang-swordsmen#3",
//!  "text": "They wore a hidden dagger.",
//!  "tokens": [["They", "they", "PRON", 0, 4], ["wore", "wear", "VERB", 5, 9], ...],
//!  "roles": [["agent", 0, 4], ["goal", 12, 25]]}
//! ```
//!
//! `tokens` entries are `[text, lemma, pos, start, end]` with character
//! offsets into `text`; `pos` is a UPOS tag. `roles` is optional; entries are
//! `[label, start, end]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{filter_candidates, CandidateConcept, ConceptError, Pos, Role, Span, TierLexicon, Token};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSpan {
    pub label: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretaggedSection {
    pub id: Option<String>,
    pub text: String,
    pub tokens: Vec<Token>,
    pub roles: Vec<RoleSpan>,
}

fn import_err(field: impl Into<String>, message: impl Into<String>) -> ConceptError {
    ConceptError::Import {
        field: field.into(),
        message: message.into(),
    }
}

/// Parses one pre-tagged record. Tokens and roles are taken verbatim; each
/// token span must select exactly the token text.
pub fn import_pretagged(line: &str) -> Result<PretaggedSection, ConceptError> {
    let doc: Value = serde_json::from_str(line).map_err(|e| import_err("<record>", e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| import_err("<record>", "expected a JSON object"))?;

    let id = match obj.get("id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(import_err("id", "expected a string")),
    };
    let text = obj
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| import_err("text", "missing or not a string"))?
        .to_string();
    let text_len = text.chars().count();

    let raw_tokens = obj
        .get("tokens")
        .and_then(Value::as_array)
        .ok_or_else(|| import_err("tokens", "missing or not an array"))?;
    let mut tokens = Vec::with_capacity(raw_tokens.len());
    for (i, raw) in raw_tokens.iter().enumerate() {
        let field = |j: usize| format!("tokens[{i}][{j}]");
        let arr = raw
            .as_array()
            .filter(|a| a.len() == 5)
            .ok_or_else(|| import_err(format!("tokens[{i}]"), "expected [text, lemma, pos, start, end]"))?;
        let str_at = |j: usize| arr[j].as_str().ok_or_else(|| import_err(field(j), "expected a string"));
        let int_at = |j: usize| {
            arr[j]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| import_err(field(j), "expected a non-negative integer"))
        };
        let surface = str_at(0)?;
        let lemma = str_at(1)?;
        let pos_tag = str_at(2)?;
        let pos = Pos::parse(pos_tag).ok_or_else(|| import_err(field(2), format!("unknown POS tag {pos_tag:?}")))?;
        let span = Span {
            start: int_at(3)?,
            end: int_at(4)?,
        };
        if span.start >= span.end || span.end > text_len {
            return Err(import_err(format!("tokens[{i}]"), "span out of range"));
        }
        if span.slice(&text) != Some(surface) {
            return Err(import_err(format!("tokens[{i}]"), "span does not match token text"));
        }
        tokens.push(Token {
            text: surface.to_string(),
            lemma: lemma.to_string(),
            pos,
            span,
        });
    }

    let mut roles = Vec::new();
    match obj.get("roles") {
        None | Some(Value::Null) => {}
        Some(Value::Array(raw_roles)) => {
            for (i, raw) in raw_roles.iter().enumerate() {
                let arr = raw
                    .as_array()
                    .filter(|a| a.len() == 3)
                    .ok_or_else(|| import_err(format!("roles[{i}]"), "expected [label, start, end]"))?;
                let label = arr[0]
                    .as_str()
                    .ok_or_else(|| import_err(format!("roles[{i}][0]"), "expected a string"))?;
                let bound = |j: usize| {
                    arr[j]
                        .as_u64()
                        .map(|v| v as usize)
                        .ok_or_else(|| import_err(format!("roles[{i}][{j}]"), "expected a non-negative integer"))
                };
                let span = Span {
                    start: bound(1)?,
                    end: bound(2)?,
                };
                if span.start >= span.end || span.end > text_len {
                    return Err(import_err(format!("roles[{i}]"), "span out of range"));
                }
                roles.push(RoleSpan {
                    label: label.to_string(),
                    span,
                });
            }
        }
        Some(_) => return Err(import_err("roles", "expected an array")),
    }

    Ok(PretaggedSection { id, text, tokens, roles })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleOutcome {
    pub candidates: Vec<CandidateConcept>,
    pub warnings: Vec<String>,
}

/// Filters the section's tokens, attaches agent/goal/result roles to
/// overlapping candidates and moves role-bearing candidates to the front
/// (order within each group is preserved). Role-bearing tokens must still
/// pass the tier and part-of-speech filter.
pub fn apply_roles(section: &PretaggedSection, lexicon: &TierLexicon) -> RoleOutcome {
    let mut candidates = filter_candidates(&section.tokens, lexicon);
    let mut warnings = Vec::new();
    for role in &section.roles {
        let Some(kind) = Role::parse(&role.label) else {
            warnings.push(format!(
                "role {:?} at {}..{} is not agent/goal/result; ignored",
                role.label, role.span.start, role.span.end
            ));
            continue;
        };
        let mut attached = false;
        for cand in &mut candidates {
            if cand.spans.iter().any(|o| o.span.overlaps(&role.span)) {
                cand.roles.insert(kind);
                attached = true;
            }
        }
        if !attached {
            warnings.push(format!(
                "role {:?} at {}..{} overlaps no candidate; discarded",
                role.label, role.span.start, role.span.end
            ));
        }
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    let (mut with_roles, without): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|c| !c.roles.is_empty());
    with_roles.extend(without);
    RoleOutcome {
        candidates: with_roles,
        warnings,
    }
}

impl PretaggedSection {
    pub fn role_set(&self) -> BTreeSet<Role> {
        self.roles.iter().filter_map(|r| Role::parse(&r.label)).collect()
    }
}
