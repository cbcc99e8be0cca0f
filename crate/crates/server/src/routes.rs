use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use storykg_core::annotation::{
    export_dataset, summary_statistics, AnnotationRecord, AnnotationSession, DatasetRow, Event, QaPair,
    SessionState, Split, StatisticsReport,
};
use storykg_core::concepts::{extract_candidates, CandidateConcept};
use storykg_core::gloss::{FetchMode, Gloss};
use storykg_core::kg::{normalize_concept, TripleKey};
use storykg_core::rank::RankedTriple;
use storykg_core::validation::{agreement_report, AgreementReport, ValidationResult, ValidationTask};

use crate::error::{ApiError, ErrorCode};
use crate::{AppState, ANNOTATOR_HEADER, SCHEMA_JSON};

type AppResult<T> = Result<T, ApiError>;

pub fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/schema", get(schema))
        .route("/sections", get(list_sections))
        .route("/sections/{id}", get(get_section))
        .route("/concepts/{word}/triples", get(concept_triples))
        .route("/concepts/{word}/gloss", get(concept_gloss))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/concept", post(choose_concept))
        .route("/sessions/{id}/triple", post(choose_triple))
        .route("/sessions/{id}/qa", post(submit_qa))
        .route("/sessions/{id}/back", post(step_back))
        .route("/sessions/{id}/abandon", post(abandon))
        .route("/validation/tasks", get(validation_tasks))
        .route("/validation/tasks/{id}", get(validation_task))
        .route("/validation/tasks/{id}/result", post(submit_result))
        .route("/validation/report", get(validation_report))
        .route("/export", get(export))
        .route("/stats", get(stats))
        .fallback(|| async { ApiError::not_found("no such route") })
}

/// `story_id:section_index`.
pub fn section_id(story_id: &str, section_index: u32) -> String {
    format!("{story_id}:{section_index}")
}

/// JSON body extractor whose rejections use the API error shape.
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(rejection(e)),
        }
    }
}

fn rejection(e: JsonRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

fn annotator(headers: &HeaderMap) -> Option<String> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn schema() -> Response {
    ([(header::CONTENT_TYPE, "application/schema+json")], SCHEMA_JSON).into_response()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSummary {
    pub id: String,
    pub story_id: String,
    pub section_index: u32,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDetail {
    pub id: String,
    pub story_id: String,
    pub section_index: u32,
    pub text: String,
    pub candidates: Vec<CandidateConcept>,
}

async fn list_sections(State(state): State<Arc<AppState>>) -> Json<Vec<SectionSummary>> {
    Json(
        state
            .sections
            .iter()
            .map(|s| SectionSummary {
                id: section_id(&s.story_id, s.section_index),
                story_id: s.story_id.clone(),
                section_index: s.section_index,
                token_count: s.token_count,
            })
            .collect(),
    )
}

async fn get_section(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<SectionDetail>> {
    let s = state
        .by_id
        .get(&id)
        .map(|&i| &state.sections[i])
        .ok_or_else(|| ApiError::not_found(format!("unknown section {id:?}")))?;
    Ok(Json(SectionDetail {
        id,
        story_id: s.story_id.clone(),
        section_index: s.section_index,
        text: s.text.clone(),
        candidates: extract_candidates(&s.text, &state.lexicon),
    }))
}

/// One recommendation as shown to annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleView {
    pub rank: usize,
    pub key: TripleKey,
    pub source: String,
    pub relation: String,
    pub target: String,
    pub text: String,
    pub weight: f64,
    pub mean_similarity: f64,
    pub score: f64,
}

impl TripleView {
    fn new(rank: usize, r: &RankedTriple) -> Self {
        TripleView {
            rank,
            key: r.triple.key(),
            source: r.triple.source_display.clone(),
            relation: r.triple.relation.phrase().to_string(),
            target: r.triple.target_display.clone(),
            text: r.triple.to_string(),
            weight: r.weight,
            mean_similarity: r.mean_similarity,
            score: r.score,
        }
    }
}

#[derive(Serialize)]
struct TriplesResponse {
    concept: String,
    triples: Vec<TripleView>,
}

async fn concept_triples(
    State(state): State<Arc<AppState>>,
    Path(word): Path<String>,
) -> AppResult<Json<TriplesResponse>> {
    let concept = normalize_concept(&word).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let triples = state
        .recommender
        .recommend(&concept)
        .iter()
        .enumerate()
        .map(|(i, r)| TripleView::new(i + 1, r))
        .collect();
    Ok(Json(TriplesResponse { concept, triples }))
}

#[derive(Deserialize)]
struct GlossQuery {
    offline: Option<bool>,
}

async fn concept_gloss(
    State(state): State<Arc<AppState>>,
    Path(word): Path<String>,
    Query(q): Query<GlossQuery>,
) -> AppResult<Json<Gloss>> {
    let concept = normalize_concept(&word).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mode = match q.offline {
        Some(true) => FetchMode::Offline,
        Some(false) => FetchMode::Live,
        None => state.gloss_mode,
    };
    let provider = state.gloss.clone();
    let gloss = tokio::task::spawn_blocking(move || provider.fetch(&concept, mode))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?;
    Ok(Json(gloss))
}

/// A session plus, once it completes, the stored record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session: AnnotationSession,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<AnnotationRecord>,
}

#[derive(Deserialize)]
struct CreateSession {
    section_id: String,
    #[serde(default)]
    annotator_id: Option<String>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Body(body): Body<CreateSession>,
) -> AppResult<(StatusCode, Json<SessionView>)> {
    let annotator_id = annotator(&headers)
        .or(body.annotator_id.filter(|a| !a.trim().is_empty()))
        .ok_or_else(|| ApiError::bad_request(format!("missing {ANNOTATOR_HEADER} header")))?;
    let section = state
        .by_id
        .get(&body.section_id)
        .map(|&i| &state.sections[i])
        .ok_or_else(|| ApiError::not_found(format!("unknown section {:?}", body.section_id)))?;
    let session = AnnotationSession::new(annotator_id, section);
    state
        .sessions
        .lock()
        .unwrap()
        .insert(session.session_id.clone(), session.clone());
    Ok((StatusCode::CREATED, Json(SessionView { session, record: None })))
}

fn view(state: &AppState, session: AnnotationSession) -> SessionView {
    let record = (session.state == SessionState::Completed)
        .then(|| {
            state
                .records
                .records()
                .into_iter()
                .find(|r| r.session_id == session.session_id)
        })
        .flatten();
    SessionView { session, record }
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<SessionView>> {
    let session = state
        .sessions
        .lock()
        .unwrap()
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))?;
    Ok(Json(view(&state, session)))
}

/// Applies an event under the sessions lock. A completing event is only
/// committed once its record is stored.
fn apply(state: &AppState, id: &str, headers: &HeaderMap, event: Event) -> AppResult<Json<SessionView>> {
    let mut sessions = state.sessions.lock().unwrap();
    let current = sessions
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))?;
    if let Some(who) = annotator(headers) {
        if who != current.annotator_id {
            return Err(ApiError::new(
                ErrorCode::Conflict,
                format!("session belongs to annotator {:?}", current.annotator_id),
            ));
        }
    }
    let next = current.advance(&event, state.recommender.as_ref())?;
    let record = if next.state == SessionState::Completed {
        Some(state.records.save(&next)?)
    } else {
        None
    };
    sessions.insert(id.to_string(), next.clone());
    Ok(Json(SessionView { session: next, record }))
}

#[derive(Deserialize)]
struct ConceptBody {
    concept: String,
}

#[derive(Deserialize)]
struct TripleBody {
    triple: TripleKey,
}

#[derive(Deserialize)]
struct QaBody {
    question: String,
    answer: String,
}

async fn choose_concept(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(body): Body<ConceptBody>,
) -> AppResult<Json<SessionView>> {
    apply(&state, &id, &headers, Event::ChooseConcept { concept: body.concept })
}

async fn choose_triple(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(body): Body<TripleBody>,
) -> AppResult<Json<SessionView>> {
    apply(&state, &id, &headers, Event::ChooseTriple { triple: body.triple })
}

async fn submit_qa(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(body): Body<QaBody>,
) -> AppResult<Json<SessionView>> {
    apply(
        &state,
        &id,
        &headers,
        Event::SubmitQa {
            question: body.question,
            answer: body.answer,
        },
    )
}

async fn step_back(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> AppResult<Json<SessionView>> {
    apply(&state, &id, &headers, Event::StepBack)
}

async fn abandon(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> AppResult<Json<SessionView>> {
    apply(&state, &id, &headers, Event::Abandon)
}

#[derive(Deserialize)]
struct TasksQuery {
    validator: Option<String>,
}

async fn validation_tasks(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<TasksQuery>,
) -> AppResult<Json<Vec<ValidationTask>>> {
    let validator = q
        .validator
        .filter(|v| !v.trim().is_empty())
        .or_else(|| annotator(&headers))
        .ok_or_else(|| ApiError::bad_request("missing validator query parameter"))?;
    Ok(Json(state.validation.pending_for(&validator)))
}

async fn validation_task(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<ValidationTask>> {
    state
        .validation
        .task(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown task {id:?}")))
}

#[derive(Deserialize)]
struct ResultBody {
    top3: Vec<TripleKey>,
    validator_qa: QaPair,
    validator_answer: String,
    started_at: DateTime<Utc>,
    #[serde(default)]
    submitted_at: Option<DateTime<Utc>>,
}

async fn submit_result(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Body(body): Body<ResultBody>,
) -> AppResult<Json<ValidationResult>> {
    let task = state
        .validation
        .task(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown task {id:?}")))?;
    if let Some(who) = annotator(&headers) {
        if who != task.validator_id {
            return Err(ApiError::new(
                ErrorCode::Conflict,
                format!("task is assigned to validator {:?}", task.validator_id),
            ));
        }
    }
    let result = ValidationResult {
        task_id: id,
        top3: body.top3,
        validator_qa: body.validator_qa,
        validator_answer: body.validator_answer,
        started_at: body.started_at,
        submitted_at: body.submitted_at.unwrap_or_else(Utc::now),
    };
    Ok(Json(state.validation.record_result(result)?))
}

async fn validation_report(State(state): State<Arc<AppState>>) -> Json<AgreementReport> {
    Json(agreement_report(&state.validation.completed(), None))
}

fn with_splits(state: &AppState) -> Vec<AnnotationRecord> {
    let mut records = state.records.records();
    for r in &mut records {
        if let Some(&split) = state.splits.get(&r.story_id) {
            r.split = Some(split);
        }
    }
    records
}

async fn export(State(state): State<Arc<AppState>>) -> AppResult<Response> {
    let mut out = Vec::new();
    export_dataset(&with_splits(&state), &state.splits, &mut out)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

#[derive(Deserialize)]
struct StatsQuery {
    split: Option<String>,
}

async fn stats(State(state): State<Arc<AppState>>, Query(q): Query<StatsQuery>) -> AppResult<Json<StatisticsReport>> {
    let only: Option<Split> = q
        .split
        .map(|s| s.parse())
        .transpose()
        .map_err(ApiError::bad_request)?;
    let rows: Vec<DatasetRow> = with_splits(&state)
        .iter()
        .filter(|r| only.is_none() || r.split == only)
        .map(DatasetRow::from)
        .collect();
    Ok(Json(summary_statistics(&rows)))
}
