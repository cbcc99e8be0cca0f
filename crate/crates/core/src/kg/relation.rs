use std::fmt;

use serde::{Deserialize, Serialize};

/// A ConceptNet relation. Only the whitelisted kinds are ever indexed;
/// anything else is carried as `Other` so callers can report it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum RelationKind {
    Causes,
    Desires,
    HasContext,
    HasProperty,
    HasSubevent,
    IsA,
    AtLocation,
    CapableOf,
    CreatedBy,
    MadeOf,
    PartOf,
    Antonym,
    UsedFor,
    Other(String),
}

impl RelationKind {
    /// The whitelisted relations, in the order they are listed to annotators
    /// and in generation prompts.
    pub const WHITELIST: [RelationKind; 13] = [
        RelationKind::Causes,
        RelationKind::Desires,
        RelationKind::HasContext,
        RelationKind::HasProperty,
        RelationKind::HasSubevent,
        RelationKind::IsA,
        RelationKind::AtLocation,
        RelationKind::CapableOf,
        RelationKind::CreatedBy,
        RelationKind::MadeOf,
        RelationKind::PartOf,
        RelationKind::Antonym,
        RelationKind::UsedFor,
    ];

    /// ConceptNet's relation name, as it appears after `/r/` in a dump.
    pub fn name(&self) -> &str {
        match self {
            RelationKind::Causes => "Causes",
            RelationKind::Desires => "Desires",
            RelationKind::HasContext => "HasContext",
            RelationKind::HasProperty => "HasProperty",
            RelationKind::HasSubevent => "HasSubevent",
            RelationKind::IsA => "IsA",
            RelationKind::AtLocation => "AtLocation",
            RelationKind::CapableOf => "CapableOf",
            RelationKind::CreatedBy => "CreatedBy",
            RelationKind::MadeOf => "MadeOf",
            RelationKind::PartOf => "PartOf",
            RelationKind::Antonym => "Antonym",
            RelationKind::UsedFor => "UsedFor",
            RelationKind::Other(raw) => raw,
        }
    }

    /// Natural-language phrase shown to annotators ("is used for").
    /// `Other` renders its raw label.
    pub fn phrase(&self) -> &str {
        match self {
            RelationKind::Causes => "causes",
            RelationKind::Desires => "desires",
            RelationKind::HasContext => "has context of",
            RelationKind::HasProperty => "has property",
            RelationKind::HasSubevent => "has subevent",
            RelationKind::IsA => "is a",
            RelationKind::AtLocation => "is at location of",
            RelationKind::CapableOf => "is capable of",
            RelationKind::CreatedBy => "is created by",
            RelationKind::MadeOf => "is made of",
            RelationKind::PartOf => "is part of",
            RelationKind::Antonym => "is the antonym of",
            RelationKind::UsedFor => "is used for",
            RelationKind::Other(raw) => raw,
        }
    }

    /// The dump URI token, e.g. `/r/IsA`.
    pub fn uri(&self) -> String {
        format!("/r/{}", self.name())
    }

    pub fn is_whitelisted(&self) -> bool {
        !matches!(self, RelationKind::Other(_))
    }

    /// Parses a relation URI (`/r/IsA`). Anything not in the whitelist,
    /// including namespaced relations like `/r/dbpedia/genre`, is `Other`.
    pub fn from_uri(uri: &str) -> RelationKind {
        match uri.strip_prefix("/r/") {
            Some(name) if !name.contains('/') => RelationKind::from_name(name),
            _ => RelationKind::Other(uri.to_string()),
        }
    }

    pub fn from_name(name: &str) -> RelationKind {
        Self::WHITELIST
            .iter()
            .find(|k| k.name() == name)
            .cloned()
            .unwrap_or_else(|| RelationKind::Other(name.to_string()))
    }

    /// Matches a display phrase, ignoring case and spacing. Short forms
    /// without the leading "is"/"is the" ("used for", "antonym of") match too.
    pub fn from_phrase(phrase: &str) -> Option<RelationKind> {
        let folded = phrase.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let short = |p: &str| -> String {
            let p = p.strip_prefix("is ").unwrap_or(p);
            p.strip_prefix("the ").unwrap_or(p).to_string()
        };
        Self::WHITELIST
            .iter()
            .find(|k| k.phrase() == folded)
            .or_else(|| Self::WHITELIST.iter().find(|k| short(k.phrase()) == short(&folded)))
            .cloned()
    }

    /// Accepts a relation name, URI or phrase. Used for relation filter files.
    pub fn parse_any(label: &str) -> Option<RelationKind> {
        let label = label.trim();
        let by_name = if label.starts_with("/r/") {
            RelationKind::from_uri(label)
        } else {
            RelationKind::from_name(label)
        };
        if by_name.is_whitelisted() {
            return Some(by_name);
        }
        RelationKind::from_phrase(label)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

impl From<String> for RelationKind {
    fn from(s: String) -> Self {
        RelationKind::from_name(&s)
    }
}

impl From<RelationKind> for String {
    fn from(k: RelationKind) -> Self {
        k.name().to_string()
    }
}
