//! On-disk index snapshot.
//!
//! Gzip-compressed UTF-8 text. The first line is the header
//! `STORYKG-SNAPSHOT<TAB><version><TAB><triple count>`; each following line
//! is one triple:
//!
//! ```text
//! source  relation  target  weight  source_display  target_display
//! ```
//!
//! fields separated by single tabs, relation as its ConceptNet name
//! (`IsA`), weight in shortest round-trip decimal form. Concept keys never
//! contain whitespace, so tabs cannot occur inside fields.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;

use super::{open_dump, KgError, KnowledgeIndex, RelationKind, Triple};

pub const MAGIC: &str = "STORYKG-SNAPSHOT";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_snapshot(index: &KnowledgeIndex, path: &Path) -> Result<(), KgError> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp)?;
        let mut out = BufWriter::new(GzEncoder::new(file, Compression::default()));
        writeln!(out, "{MAGIC}\t{FORMAT_VERSION}\t{}", index.len())?;
        for t in index.triples() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                t.source,
                t.relation.name(),
                t.target,
                t.weight,
                t.source_display,
                t.target_display
            )?;
        }
        let enc = out.into_inner().map_err(|e| e.into_error())?;
        enc.finish()?.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<KnowledgeIndex, KgError> {
    let reader = open_dump(path)?;
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| KgError::Snapshot("empty file".into()))?;
    let expected = parse_header(&header)?;

    let mut triples = Vec::with_capacity(expected);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let bad = |what: &str| KgError::Snapshot(format!("line {}: {what}", i + 2));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let relation = RelationKind::from_name(f[1]);
        if !relation.is_whitelisted() {
            return Err(bad("unknown relation"));
        }
        let weight: f64 = f[3].parse().map_err(|_| bad("bad weight"))?;
        triples.push(Triple {
            source: f[0].to_string(),
            relation,
            target: f[2].to_string(),
            weight,
            source_display: f[4].to_string(),
            target_display: f[5].to_string(),
        });
    }
    if triples.len() != expected {
        return Err(KgError::Snapshot(format!(
            "truncated: header promises {expected} triples, found {}",
            triples.len()
        )));
    }
    Ok(KnowledgeIndex::from_triples(triples))
}

fn parse_header(header: &str) -> Result<usize, KgError> {
    let parts: Vec<&str> = header.split('\t').collect();
    if parts.len() != 3 || parts[0] != MAGIC {
        return Err(KgError::Snapshot("not a snapshot file (bad magic)".into()));
    }
    let version: u32 = parts[1]
        .parse()
        .map_err(|_| KgError::Snapshot("bad format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(KgError::Snapshot(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    parts[2]
        .parse()
        .map_err(|_| KgError::Snapshot("bad triple count".into()))
}
