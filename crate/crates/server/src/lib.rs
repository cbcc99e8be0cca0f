//! HTTP service for the annotation tool: sections and candidate concepts,
//! ranked triples and glosses, annotation sessions, cross-validation tasks,
//! export and statistics.
//!
//! Every response carries an `x-schema-version` header matching
//! `schema/api.schema.json`. Mutating routes honor an `idempotency-key`
//! header: a retried request with the same key and body gets the original
//! response back without being applied again.

mod error;
mod idempotency;
mod routes;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::http::HeaderValue;
use axum::middleware;
use axum::Router;

use storykg_core::annotation::{AnnotationSession, RecordStore, SplitMap, StorySection};
use storykg_core::concepts::TierLexicon;
use storykg_core::gloss::{FetchMode, GlossCache, GlossProvider};
use storykg_core::rank::Recommender;
use storykg_core::validation::ValidationStore;

pub use error::{ApiError, ErrorCode};
pub use idempotency::{IdempotencyCache, IDEMPOTENCY_HEADER, REPLAY_HEADER};
pub use routes::{section_id, SectionDetail, SectionSummary, SessionView, TripleView};

pub const SCHEMA_VERSION: &str = "1";
pub const SCHEMA_HEADER: &str = "x-schema-version";
pub const ANNOTATOR_HEADER: &str = "x-annotator-id";
pub const SCHEMA_JSON: &str = include_str!("../schema/api.schema.json");

/// Shared server state: immutable corpus, lexicon and recommender, plus
/// the stores that serialize their own writes.
pub struct AppState {
    sections: Vec<StorySection>,
    by_id: HashMap<String, usize>,
    lexicon: TierLexicon,
    recommender: Arc<dyn Recommender>,
    gloss: Arc<GlossProvider>,
    gloss_mode: FetchMode,
    records: RecordStore,
    validation: ValidationStore,
    splits: SplitMap,
    sessions: Mutex<HashMap<String, AnnotationSession>>,
    idempotency: IdempotencyCache,
}

impl AppState {
    pub fn new(
        sections: Vec<StorySection>,
        recommender: Arc<dyn Recommender>,
        records: RecordStore,
        validation: ValidationStore,
    ) -> Self {
        let by_id = sections
            .iter()
            .enumerate()
            .map(|(i, s)| (section_id(&s.story_id, s.section_index), i))
            .collect();
        AppState {
            sections,
            by_id,
            lexicon: TierLexicon::packaged(),
            recommender,
            gloss: Arc::new(GlossProvider::offline(GlossCache::in_memory())),
            gloss_mode: FetchMode::Offline,
            records,
            validation,
            splits: SplitMap::new(),
            sessions: Mutex::new(HashMap::new()),
            idempotency: IdempotencyCache::default(),
        }
    }

    pub fn with_lexicon(mut self, lexicon: TierLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn with_gloss(mut self, provider: GlossProvider, mode: FetchMode) -> Self {
        self.gloss = Arc::new(provider);
        self.gloss_mode = mode;
        self
    }

    pub fn with_splits(mut self, splits: SplitMap) -> Self {
        self.splits = splits;
        self
    }

    pub fn records(&self) -> &RecordStore {
        &self.records
    }

    pub fn validation(&self) -> &ValidationStore {
        &self.validation
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    routes::routes()
        .layer(middleware::from_fn_with_state(state.clone(), idempotency::idempotent))
        .layer(middleware::map_response(|mut resp: axum::response::Response| async move {
            resp.headers_mut()
                .insert(SCHEMA_HEADER, HeaderValue::from_static(SCHEMA_VERSION));
            resp
        }))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
