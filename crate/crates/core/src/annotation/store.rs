use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationRecord, AnnotationSession, SessionState};

/// Append-only JSON-lines file. Lines that fail to parse on open (for
/// example a tail cut short by a crash) are moved to `<path>.quarantine`
/// and the log is rewritten without them.
#[derive(Debug)]
pub struct JsonlLog {
    path: Option<PathBuf>,
    file: Option<File>,
}

impl JsonlLog {
    pub fn in_memory() -> Self {
        JsonlLog { path: None, file: None }
    }

    /// Opens the log and returns its entries and the number of lines
    /// quarantined.
    pub fn open<T: DeserializeOwned + Serialize>(path: &Path) -> io::Result<(Self, Vec<T>, usize)> {
        let mut items = Vec::new();
        let mut bad = Vec::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<T>(&line) {
                    Ok(item) => items.push(item),
                    Err(e) => {
                        tracing::warn!(path = %path.display(), "quarantining unreadable line: {e}");
                        bad.push(line);
                    }
                }
            }
        }
        let mut log = JsonlLog {
            path: Some(path.to_path_buf()),
            file: None,
        };
        if !bad.is_empty() {
            let mut q = OpenOptions::new()
                .create(true)
                .append(true)
                .open(quarantine_path(path))?;
            for line in &bad {
                writeln!(q, "{line}")?;
            }
            q.sync_all()?;
            log.rewrite(&items)?;
        } else {
            log.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        }
        Ok((log, items, bad.len()))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append<T: Serialize>(&mut self, item: &T) -> io::Result<()> {
        if let Some(file) = self.file.as_mut() {
            let mut line = serde_json::to_string(item).map_err(io::Error::other)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        Ok(())
    }

    /// Atomically replaces the log contents.
    pub fn rewrite<T: Serialize>(&mut self, items: &[T]) -> io::Result<()> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = io::BufWriter::new(File::create(&tmp)?);
            for item in items {
                serde_json::to_writer(&mut out, item).map_err(io::Error::other)?;
                out.write_all(b"\n")?;
            }
            out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        std::fs::rename(&tmp, &path)?;
        self.file = Some(OpenOptions::new().append(true).open(&path)?);
        Ok(())
    }
}

pub fn quarantine_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".quarantine");
    PathBuf::from(name)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub records: usize,
    pub quarantined_lines: usize,
    /// `(record_id, violations)` for every invalid record.
    pub invalid: Vec<(u64, Vec<String>)>,
    pub warnings: usize,
    pub duplicate_ids: Vec<u64>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.invalid.is_empty() && self.duplicate_ids.is_empty()
    }
}

struct Inner {
    log: JsonlLog,
    records: Vec<AnnotationRecord>,
    by_session: HashMap<String, usize>,
    by_id: HashMap<u64, usize>,
    next_id: u64,
    quarantined: usize,
}

/// Durable store of completed annotations. Writes are serialized; record
/// ids increase by one per new record.
pub struct RecordStore {
    inner: Mutex<Inner>,
}

impl RecordStore {
    pub fn in_memory() -> Self {
        Self::from_parts(JsonlLog::in_memory(), Vec::new(), 0)
    }

    pub fn open(path: &Path) -> Result<Self, AnnotationError> {
        let (log, records, quarantined) = JsonlLog::open::<AnnotationRecord>(path)?;
        Ok(Self::from_parts(log, records, quarantined))
    }

    fn from_parts(log: JsonlLog, records: Vec<AnnotationRecord>, quarantined: usize) -> Self {
        let next_id = records.iter().map(|r| r.record_id).max().map_or(1, |m| m + 1);
        let by_session = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.session_id.clone(), i))
            .collect();
        let by_id = records.iter().enumerate().map(|(i, r)| (r.record_id, i)).collect();
        RecordStore {
            inner: Mutex::new(Inner {
                log,
                records,
                by_session,
                by_id,
                next_id,
                quarantined,
            }),
        }
    }

    /// Stores the record for a completed session. Saving the same session
    /// again returns the record already stored.
    pub fn save(&self, session: &AnnotationSession) -> Result<AnnotationRecord, AnnotationError> {
        if session.state != SessionState::Completed {
            return Err(AnnotationError::State {
                state: session.state,
                event: "save".into(),
            });
        }
        let mut inner = self.inner.lock().unwrap();
        if let Some(&i) = inner.by_session.get(&session.session_id) {
            return Ok(inner.records[i].clone());
        }
        let record = session.to_record(inner.next_id, Utc::now())?;
        let check = record.check();
        if !check.violations.is_empty() {
            return Err(AnnotationError::Validation {
                violations: check.violations,
            });
        }
        self.push_locked(&mut inner, record)
    }

    /// Adds an already-built record (for instance from an import), giving
    /// it the next id. Records failing validation are rejected.
    pub fn insert(&self, mut record: AnnotationRecord) -> Result<AnnotationRecord, AnnotationError> {
        let check = record.check();
        if !check.violations.is_empty() {
            return Err(AnnotationError::Validation {
                violations: check.violations,
            });
        }
        let mut inner = self.inner.lock().unwrap();
        if let Some(&i) = inner.by_session.get(&record.session_id) {
            return Ok(inner.records[i].clone());
        }
        record.record_id = inner.next_id;
        self.push_locked(&mut inner, record)
    }

    fn push_locked(&self, inner: &mut Inner, record: AnnotationRecord) -> Result<AnnotationRecord, AnnotationError> {
        inner.log.append(&record)?;
        inner.next_id = record.record_id + 1;
        let idx = inner.records.len();
        inner.by_session.insert(record.session_id.clone(), idx);
        inner.by_id.insert(record.record_id, idx);
        inner.records.push(record.clone());
        Ok(record)
    }

    pub fn get(&self, record_id: u64) -> Option<AnnotationRecord> {
        let inner = self.inner.lock().unwrap();
        inner.by_id.get(&record_id).map(|&i| inner.records[i].clone())
    }

    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.inner.lock().unwrap().records.clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn quarantined(&self) -> usize {
        self.inner.lock().unwrap().quarantined
    }

    /// Rewrites the log from the in-memory records.
    pub fn compact(&self) -> Result<(), AnnotationError> {
        let mut inner = self.inner.lock().unwrap();
        let records = inner.records.clone();
        inner.log.rewrite(&records)?;
        Ok(())
    }

    /// Re-checks every stored record.
    pub fn audit(&self) -> AuditReport {
        let inner = self.inner.lock().unwrap();
        let mut report = AuditReport {
            records: inner.records.len(),
            quarantined_lines: inner.quarantined,
            ..AuditReport::default()
        };
        let mut ids = HashSet::new();
        for r in &inner.records {
            if !ids.insert(r.record_id) {
                report.duplicate_ids.push(r.record_id);
            }
            let check = r.check();
            report.warnings += check.warnings.len();
            if !check.violations.is_empty() {
                report.invalid.push((r.record_id, check.violations));
            }
        }
        report
    }
}
