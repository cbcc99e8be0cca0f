use std::collections::BTreeSet;

use serde_json::Value;

use super::{display_concept, normalize_concept, KgError, RelationKind, Triple};

/// The relations admitted during ingestion. Defaults to the full whitelist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationFilter {
    allowed: BTreeSet<String>,
}

impl Default for RelationFilter {
    fn default() -> Self {
        RelationFilter::new(RelationKind::WHITELIST.iter().cloned())
    }
}

impl RelationFilter {
    /// Builds a filter from whitelisted kinds; `Other` kinds are ignored.
    pub fn new(kinds: impl IntoIterator<Item = RelationKind>) -> Self {
        RelationFilter {
            allowed: kinds
                .into_iter()
                .filter(RelationKind::is_whitelisted)
                .map(|k| k.name().to_string())
                .collect(),
        }
    }

    /// Parses a relations file: one relation per line (name, URI or
    /// phrase), `#` comments and blank lines ignored. Every entry must be a
    /// whitelisted relation.
    pub fn parse(text: &str) -> Result<Self, KgError> {
        let mut kinds = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let kind = RelationKind::parse_any(line).ok_or_else(|| KgError::Parse {
                line: no as u64 + 1,
                reason: format!("{line:?} is not a whitelisted relation"),
            })?;
            kinds.push(kind);
        }
        Ok(RelationFilter::new(kinds))
    }

    pub fn allows(&self, kind: &RelationKind) -> bool {
        kind.is_whitelisted() && self.allowed.contains(kind.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkipReason {
    NonEnglish,
    FilteredRelation,
    NegativeWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedLine {
    Triple(Triple),
    Skip(SkipReason),
}

const ENGLISH_PREFIX: &str = "/c/en/";

/// Parses one tab-separated assertion record:
/// `assertion URI, relation URI, start URI, end URI, metadata JSON`.
pub fn parse_assertion_line(
    line: &str,
    line_no: u64,
    filter: &RelationFilter,
) -> Result<ParsedLine, KgError> {
    let err = |reason: String| KgError::Parse { line: line_no, reason };
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
    }
    let (relation_uri, start, end, meta) = (fields[1], fields[2], fields[3], fields[4]);

    let meta: Value = serde_json::from_str(meta).map_err(|e| err(format!("metadata: {e}")))?;
    let weight = match meta.get("weight") {
        None | Some(Value::Null) => 1.0,
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| err("metadata: weight is not a finite number".into()))?,
        Some(other) => return Err(err(format!("metadata: weight is not a number: {other}"))),
    };
    if !meta.is_object() {
        return Err(err("metadata is not a JSON object".into()));
    }

    if !start.starts_with(ENGLISH_PREFIX) || !end.starts_with(ENGLISH_PREFIX) {
        return Ok(ParsedLine::Skip(SkipReason::NonEnglish));
    }
    let relation = RelationKind::from_uri(relation_uri);
    if !filter.allows(&relation) {
        return Ok(ParsedLine::Skip(SkipReason::FilteredRelation));
    }
    if weight < 0.0 {
        return Ok(ParsedLine::Skip(SkipReason::NegativeWeight));
    }

    let source = normalize_concept(start).map_err(|_| err(format!("bad start URI {start:?}")))?;
    let target = normalize_concept(end).map_err(|_| err(format!("bad end URI {end:?}")))?;
    Ok(ParsedLine::Triple(Triple {
        source_display: display_concept(&source),
        target_display: display_concept(&target),
        source,
        relation,
        target,
        weight,
    }))
}
