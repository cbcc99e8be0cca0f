use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use super::{parse_assertion_line, KgError, ParsedLine, RelationFilter, RelationKind, SkipReason, Triple, TripleKey};

/// Keep at most this many per-line errors in a report; the count is exact.
const MAX_REPORTED_ERRORS: usize = 100;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub lines: u64,
    pub accepted: u64,
    /// Accepted lines that collapsed onto an existing (source, relation, target).
    pub duplicates: u64,
    pub skipped: BTreeMap<SkipReason, u64>,
    pub error_count: u64,
    pub errors: Vec<(u64, String)>,
}

impl IngestReport {
    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }
}

/// Immutable triple index keyed by concept, covering both endpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeIndex {
    triples: Vec<Triple>,
    by_concept: HashMap<String, Vec<u32>>,
    stats: BTreeMap<String, usize>,
}

impl KnowledgeIndex {
    /// Builds an index from already-parsed triples. Duplicate
    /// (source, relation, target) entries keep the maximum weight, and
    /// non-whitelisted relations are dropped.
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut builder = Builder::default();
        for t in triples {
            builder.insert(t);
        }
        builder.finish()
    }

    /// Every triple mentioning `concept` as source or target.
    pub fn lookup(&self, concept: &str) -> Vec<Triple> {
        self.by_concept
            .get(concept)
            .map(|ids| ids.iter().map(|&i| self.triples[i as usize].clone()).collect())
            .unwrap_or_default()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn concept_count(&self) -> usize {
        self.by_concept.len()
    }

    /// Triple counts per whitelisted relation, in whitelist order, omitting zeros.
    pub fn stats(&self) -> Vec<(RelationKind, usize)> {
        RelationKind::WHITELIST
            .iter()
            .filter_map(|k| self.stats.get(k.name()).map(|&n| (k.clone(), n)))
            .collect()
    }
}

#[derive(Default)]
struct Builder {
    triples: Vec<Triple>,
    positions: HashMap<TripleKey, usize>,
}

impl Builder {
    /// Returns false when the triple merged into an existing entry.
    fn insert(&mut self, t: Triple) -> bool {
        if !t.relation.is_whitelisted() {
            return false;
        }
        match self.positions.get(&t.key()) {
            Some(&pos) => {
                let existing = &mut self.triples[pos];
                if t.weight > existing.weight {
                    existing.weight = t.weight;
                }
                false
            }
            None => {
                self.positions.insert(t.key(), self.triples.len());
                self.triples.push(t);
                true
            }
        }
    }

    fn finish(self) -> KnowledgeIndex {
        let mut by_concept: HashMap<String, Vec<u32>> = HashMap::new();
        let mut stats: BTreeMap<String, usize> = BTreeMap::new();
        for (i, t) in self.triples.iter().enumerate() {
            by_concept.entry(t.source.clone()).or_default().push(i as u32);
            if t.target != t.source {
                by_concept.entry(t.target.clone()).or_default().push(i as u32);
            }
            *stats.entry(t.relation.name().to_string()).or_default() += 1;
        }
        KnowledgeIndex {
            triples: self.triples,
            by_concept,
            stats,
        }
    }
}

/// Ingests dump lines. Malformed lines are counted and reported, never
/// fatal; an I/O failure aborts with the partial report attached.
pub fn build_index<I>(lines: I, filter: &RelationFilter) -> Result<(KnowledgeIndex, IngestReport), KgError>
where
    I: IntoIterator<Item = io::Result<String>>,
{
    let mut report = IngestReport::default();
    let mut builder = Builder::default();
    for line in lines {
        let line = match line {
            Ok(l) => l,
            Err(source) => return Err(KgError::Ingest { report, source }),
        };
        report.lines += 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_assertion_line(&line, report.lines, filter) {
            Ok(ParsedLine::Triple(t)) => {
                report.accepted += 1;
                if !builder.insert(t) {
                    report.duplicates += 1;
                }
            }
            Ok(ParsedLine::Skip(reason)) => *report.skipped.entry(reason).or_default() += 1,
            Err(e) => {
                report.error_count += 1;
                tracing::debug!("skipping malformed dump line: {e}");
                if report.errors.len() < MAX_REPORTED_ERRORS {
                    report.errors.push((report.lines, e.to_string()));
                }
            }
        }
        if report.lines % 1_000_000 == 0 {
            tracing::info!(lines = report.lines, triples = builder.triples.len(), "ingesting");
        }
    }
    Ok((builder.finish(), report))
}

/// Opens a dump file, transparently decompressing gzip input.
pub fn open_dump(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}
