//! Wiktionary explanations for selected concepts.
//!
//! Lookups go fixture → cache → network. Offline mode never touches the
//! transport. Cached glosses are persisted as JSON lines (last entry per
//! concept wins) so they survive restarts.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const DEFAULT_BASE_URL: &str = "https://en.wiktionary.org/api/rest_v1";
pub const BASE_URL_ENV: &str = "STORYKG_WIKTIONARY_URL";
/// Senses shown to annotators.
pub const MAX_SENSES: usize = 3;

#[derive(Debug, Error)]
pub enum GlossError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("gloss cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlossSource {
    Live,
    Cache,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchMode {
    Live,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gloss {
    pub concept: String,
    pub definitions: Vec<String>,
    pub source: GlossSource,
    pub fetched_at: DateTime<Utc>,
}

/// HTTP GET abstraction. `Ok(None)` means the page does not exist.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Option<String>, GlossError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, GlossError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("storykg/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| GlossError::Transport(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Option<String>, GlossError> {
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| GlossError::Transport(e.to_string()))?;
        if resp.status() == reqwest::StatusCode::NOT_FOUND {
            return Ok(None);
        }
        if !resp.status().is_success() {
            return Err(GlossError::Transport(format!("HTTP {}", resp.status())));
        }
        resp.text().map(Some).map_err(|e| GlossError::Transport(e.to_string()))
    }
}

/// Extracts plain-text English senses, in order, from a REST definition
/// response. Example sentences and nested lists are dropped.
pub fn parse_definition_response(body: &str) -> Vec<String> {
    let Ok(doc) = serde_json::from_str::<Value>(body) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for entry in doc.get("en").and_then(Value::as_array).into_iter().flatten() {
        for def in entry.get("definitions").and_then(Value::as_array).into_iter().flatten() {
            if let Some(text) = def.get("definition").and_then(Value::as_str) {
                let plain = strip_markup(text);
                if !plain.is_empty() {
                    out.push(plain);
                }
            }
        }
    }
    out
}

pub fn strip_markup(html: &str) -> String {
    // Nested lists inside a definition hold quotations and examples.
    let cut = ["<dl", "<ul", "<ol"]
        .iter()
        .filter_map(|t| html.find(t))
        .min()
        .unwrap_or(html.len());
    let mut text = String::with_capacity(cut);
    let mut in_tag = false;
    for c in html[..cut].chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => text.push(c),
            _ => {}
        }
    }
    let decoded = decode_entities(&text);
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let decoded = tail.find(';').filter(|&j| j <= 10).and_then(|j| {
            let name = &tail[1..j];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some(' '),
                _ => name
                    .strip_prefix("#x")
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()))
                    .and_then(char::from_u32),
            };
            c.map(|c| (c, j))
        });
        match decoded {
            Some((c, j)) => {
                out.push(c);
                rest = &tail[j + 1..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn encode_title(concept: &str) -> String {
    let mut out = String::new();
    for b in concept.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Persistent gloss cache: concurrent readers, serialized writers.
pub struct GlossCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, Gloss>>,
    writer: Mutex<Option<File>>,
}

impl GlossCache {
    pub fn in_memory() -> Self {
        GlossCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Opens or creates a cache file. Unreadable lines are skipped.
    pub fn open(path: &Path) -> Result<Self, GlossError> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                match serde_json::from_str::<Gloss>(&line) {
                    Ok(g) => {
                        entries.insert(g.concept.clone(), g);
                    }
                    Err(e) if !line.trim().is_empty() => tracing::warn!("gloss cache: skipping bad line: {e}"),
                    Err(_) => {}
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(GlossCache {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn load(&self, concept: &str) -> Option<Gloss> {
        self.entries.read().unwrap().get(concept).cloned()
    }

    pub fn store(&self, gloss: &Gloss) -> Result<(), GlossError> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(file) = writer.as_mut() {
            let line = serde_json::to_string(gloss).expect("gloss serializes");
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        self.entries.write().unwrap().insert(gloss.concept.clone(), gloss.clone());
        Ok(())
    }
}

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub struct GlossProvider {
    transport: Option<Arc<dyn Transport>>,
    cache: GlossCache,
    fixtures: HashMap<String, Vec<String>>,
    ttl: chrono::Duration,
    base_url: String,
    clock: Clock,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl GlossProvider {
    /// A provider with no transport: every fetch behaves as offline.
    pub fn offline(cache: GlossCache) -> Self {
        GlossProvider {
            transport: None,
            cache,
            fixtures: HashMap::new(),
            ttl: chrono::Duration::days(30),
            base_url: std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string()),
            clock: Arc::new(Utc::now),
            inflight: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = Some(transport);
        self
    }

    pub fn with_ttl(mut self, ttl: chrono::Duration) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn with_base_url(mut self, base_url: impl Into<String>) -> Self {
        self.base_url = base_url.into();
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_fixture(mut self, concept: &str, definitions: Vec<String>) -> Self {
        self.fixtures.insert(concept.to_string(), definitions);
        self
    }

    /// Loads `<concept>.json` files holding saved REST responses.
    pub fn with_fixture_dir(mut self, dir: &Path) -> Result<Self, GlossError> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(concept) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let body = std::fs::read_to_string(&path)?;
            self.fixtures.insert(concept.to_string(), parse_definition_response(&body));
        }
        Ok(self)
    }

    pub fn definition_url(&self, concept: &str) -> String {
        format!("{}/page/definition/{}", self.base_url.trim_end_matches('/'), encode_title(concept))
    }

    pub fn fetch(&self, concept: &str, mode: FetchMode) -> Result<Gloss, GlossError> {
        let now = (self.clock)();
        if let Some(defs) = self.fixtures.get(concept) {
            return Ok(Gloss {
                concept: concept.to_string(),
                definitions: truncate(defs.clone()),
                source: GlossSource::Fixture,
                fetched_at: now,
            });
        }
        let transport = match (mode, &self.transport) {
            (FetchMode::Live, Some(t)) => t.clone(),
            _ => {
                return Ok(self.cached(concept).unwrap_or_else(|| Gloss {
                    concept: concept.to_string(),
                    definitions: Vec::new(),
                    source: GlossSource::Cache,
                    fetched_at: now,
                }))
            }
        };
        if let Some(hit) = self.fresh(concept, now) {
            return Ok(hit);
        }

        // One live request per key: later callers wait, then hit the cache.
        let key_lock = {
            let mut inflight = self.inflight.lock().unwrap();
            inflight.entry(concept.to_string()).or_default().clone()
        };
        let _guard = key_lock.lock().unwrap();
        if let Some(hit) = self.fresh(concept, (self.clock)()) {
            return Ok(hit);
        }
        let definitions = match transport.get(&self.definition_url(concept))? {
            Some(body) => truncate(parse_definition_response(&body)),
            None => Vec::new(),
        };
        let gloss = Gloss {
            concept: concept.to_string(),
            definitions,
            source: GlossSource::Live,
            fetched_at: (self.clock)(),
        };
        self.cache.store(&gloss)?;
        Ok(gloss)
    }

    fn cached(&self, concept: &str) -> Option<Gloss> {
        self.cache.load(concept).map(|g| Gloss {
            source: GlossSource::Cache,
            ..g
        })
    }

    fn fresh(&self, concept: &str, now: DateTime<Utc>) -> Option<Gloss> {
        self.cached(concept).filter(|g| now - g.fetched_at < self.ttl)
    }
}

fn truncate(mut defs: Vec<String>) -> Vec<String> {
    defs.truncate(MAX_SENSES);
    defs
}
