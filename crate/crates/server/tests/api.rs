use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use storykg_core::annotation::{RecordStore, Split, SplitMap, StorySection};
use storykg_core::gloss::{FetchMode, GlossCache, GlossProvider};
use storykg_core::kg::{KnowledgeIndex, RelationKind, Triple};
use storykg_core::rank::{KnowledgeMatcher, RankingConfig};
use storykg_core::validation::{sample_tasks, ValidationStore};
use storykg_server::{router, AppState, SCHEMA_HEADER, SCHEMA_JSON, SCHEMA_VERSION};

const STORY: &str = "The knight drew a dagger from his bag and walked to the river.";

fn triples() -> Vec<Triple> {
    let t = |s: &str, r, o: &str, w| Triple::new(s, r, o, w).unwrap();
    vec![
        t("dagger", RelationKind::IsA, "weapon", 2.0),
        t("dagger", RelationKind::UsedFor, "stabbing", 1.5),
        t("dagger", RelationKind::AtLocation, "sheath", 1.0),
        t("dagger", RelationKind::PartOf, "armory", 0.5),
        t("dagger", RelationKind::MadeOf, "steel", 1.0),
        t("dagger", RelationKind::HasProperty, "sharp", 3.0),
        t("knife", RelationKind::Antonym, "dagger", 0.3),
        t("dagger", RelationKind::CapableOf, "cut", 1.2),
        t("bag", RelationKind::UsedFor, "carrying things", 1.0),
        t("river", RelationKind::AtLocation, "valley", 1.0),
    ]
}

fn sections() -> Vec<StorySection> {
    vec![
        StorySection::new("knight", 1, STORY),
        StorySection::new("knight", 2, "The river was cold and the knight was tired."),
        StorySection::new("fox", 1, "A fox carried a bag through the forest."),
    ]
}

fn state() -> Arc<AppState> {
    let index = Arc::new(KnowledgeIndex::from_triples(triples()));
    let matcher = Arc::new(KnowledgeMatcher::new(index, RankingConfig::default()));
    let gloss = GlossProvider::offline(GlossCache::in_memory()).with_fixture(
        "dagger",
        vec!["A stabbing weapon.".into(), "A typographic mark.".into()],
    );
    let mut splits = SplitMap::new();
    splits.insert("knight".into(), Split::Test);
    splits.insert("fox".into(), Split::Train);
    Arc::new(
        AppState::new(sections(), matcher, RecordStore::in_memory(), ValidationStore::in_memory())
            .with_gloss(gloss, FetchMode::Offline)
            .with_splits(splits),
    )
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Value,
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    Reply { status, headers, body }
}

async fn get(app: &Router, uri: &str) -> Reply {
    call(app, "GET", uri, None, &[]).await
}

async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, "POST", uri, Some(body), &[("x-annotator-id", "ann1")]).await
}

async fn start_session(app: &Router) -> String {
    let r = post(app, "/sessions", json!({ "section_id": "knight:1" })).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
    r.body["session"]["session_id"].as_str().unwrap().to_string()
}

async fn complete_session(app: &Router) -> Value {
    let id = start_session(app).await;
    let r = post(app, &format!("/sessions/{id}/concept"), json!({ "concept": "dagger" })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let key = json!({ "source": "dagger", "relation": "UsedFor", "target": "stabbing" });
    let r = post(app, &format!("/sessions/{id}/triple"), json!({ "triple": key })).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let qa = json!({ "question": "What is a dagger used for?", "answer": "Stabbing." });
    let r = post(app, &format!("/sessions/{id}/qa"), qa).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    r.body
}

#[tokio::test]
async fn health_and_schema_header() {
    let app = router(state());
    let r = get(&app, "/healthz").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers[SCHEMA_HEADER], SCHEMA_VERSION);
    let r = get(&app, "/nope").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.headers[SCHEMA_HEADER], SCHEMA_VERSION);
}

#[tokio::test]
async fn schema_document_matches_header_version() {
    let doc: Value = serde_json::from_str(SCHEMA_JSON).unwrap();
    assert_eq!(doc["version"], SCHEMA_VERSION);
    let app = router(state());
    let r = get(&app, "/schema").await;
    assert_eq!(r.body, doc);
}

#[tokio::test]
async fn sections_list_and_detail() {
    let app = router(state());
    let r = get(&app, "/sections").await;
    let ids: Vec<&str> = r.body.as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["knight:1", "knight:2", "fox:1"]);

    let r = get(&app, "/sections/knight:1").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["text"], STORY);
    let lemmas: Vec<&str> = r.body["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["lemma"].as_str().unwrap())
        .collect();
    assert!(lemmas.contains(&"dagger"), "{lemmas:?}");
    let dagger = r.body["candidates"].as_array().unwrap().iter().find(|c| c["lemma"] == "dagger").unwrap();
    let span = &dagger["spans"][0];
    let (s, e) = (span["start"].as_u64().unwrap() as usize, span["end"].as_u64().unwrap() as usize);
    assert_eq!(&STORY[s..e], "dagger");
}

#[tokio::test]
async fn unknown_section_is_not_found() {
    let app = router(state());
    let r = get(&app, "/sections/nowhere:9").await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.body["code"], "not_found");
}

#[tokio::test]
async fn dagger_triples_are_top_six_by_score() {
    let app = router(state());
    let r = get(&app, "/concepts/dagger/triples").await;
    assert_eq!(r.status, StatusCode::OK);
    let list = r.body["triples"].as_array().unwrap();
    assert_eq!(list.len(), 6);
    let scores: Vec<f64> = list.iter().map(|t| t["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    for (i, t) in list.iter().enumerate() {
        assert_eq!(t["rank"], i + 1);
        let expected = 1.0 - t["mean_similarity"].as_f64().unwrap() + t["weight"].as_f64().unwrap();
        assert!((t["score"].as_f64().unwrap() - expected).abs() < 1e-12);
    }
    let r = get(&app, "/concepts/unicorn/triples").await;
    assert_eq!(r.body["triples"], json!([]));
}

#[tokio::test]
async fn gloss_from_fixture() {
    let app = router(state());
    let r = get(&app, "/concepts/dagger/gloss").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["source"], "fixture");
    assert_eq!(r.body["definitions"][0], "A stabbing weapon.");
    let r = get(&app, "/concepts/zzz/gloss?offline=true").await;
    assert_eq!(r.body["definitions"], json!([]));
}

#[tokio::test]
async fn qa_before_triple_is_a_state_error() {
    let app = router(state());
    let id = start_session(&app).await;
    let r = post(&app, &format!("/sessions/{id}/qa"), json!({ "question": "Q?", "answer": "A" })).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.body["code"], "state_error");
    assert_eq!(r.body["detail"]["state"], "Started");
}

#[tokio::test]
async fn session_requires_annotator() {
    let app = router(state());
    let r = call(&app, "POST", "/sessions", Some(json!({ "section_id": "knight:1" })), &[]).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.body["code"], "bad_request");
    let r = post(&app, "/sessions", json!({ "wrong": 1 })).await;
    assert_eq!(r.body["code"], "bad_request");
}

#[tokio::test]
async fn full_workflow_stores_one_record() {
    let st = state();
    let app = router(st.clone());
    let done = complete_session(&app).await;
    assert_eq!(done["session"]["state"], "Completed");
    assert_eq!(done["record"]["triple"]["target"], "stabbing");
    assert_eq!(done["record"]["recommended"].as_array().unwrap().len(), 6);
    assert_eq!(st.records().len(), 1);

    let id = done["session"]["session_id"].as_str().unwrap();
    let r = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(r.body["record"]["record_id"], done["record"]["record_id"]);

    let r = post(&app, &format!("/sessions/{id}/qa"), json!({ "question": "Q?", "answer": "dagger" })).await;
    assert_eq!(r.body["code"], "state_error");
    assert_eq!(st.records().len(), 1);
}

#[tokio::test]
async fn qa_must_mention_triple_concept() {
    let app = router(state());
    let id = start_session(&app).await;
    post(&app, &format!("/sessions/{id}/concept"), json!({ "concept": "dagger" })).await;
    let key = json!({ "source": "dagger", "relation": "IsA", "target": "weapon" });
    post(&app, &format!("/sessions/{id}/triple"), json!({ "triple": key })).await;
    let r = post(&app, &format!("/sessions/{id}/qa"), json!({ "question": "Who walked?", "answer": "The knight." })).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert!(!r.body["detail"]["violations"].as_array().unwrap().is_empty());
    let r = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(r.body["session"]["state"], "TripleChosen");
}

#[tokio::test]
async fn step_back_and_abandon() {
    let app = router(state());
    let id = start_session(&app).await;
    let r = post(&app, &format!("/sessions/{id}/back"), json!({})).await;
    assert_eq!(r.body["code"], "state_error");
    post(&app, &format!("/sessions/{id}/concept"), json!({ "concept": "dagger" })).await;
    let r = post(&app, &format!("/sessions/{id}/back"), json!({})).await;
    assert_eq!(r.body["session"]["state"], "Started");
    let r = post(&app, &format!("/sessions/{id}/abandon"), json!({})).await;
    assert_eq!(r.body["session"]["state"], "Abandoned");
    let r = post(&app, &format!("/sessions/{id}/concept"), json!({ "concept": "dagger" })).await;
    assert_eq!(r.body["code"], "state_error");
}

#[tokio::test]
async fn other_annotator_cannot_drive_a_session() {
    let app = router(state());
    let id = start_session(&app).await;
    let r = call(
        &app,
        "POST",
        &format!("/sessions/{id}/concept"),
        Some(json!({ "concept": "dagger" })),
        &[("x-annotator-id", "intruder")],
    )
    .await;
    assert_eq!(r.body["code"], "conflict");
}

#[tokio::test]
async fn idempotency_key_replays_response() {
    let app = router(state());
    let hdr = [("x-annotator-id", "ann1"), ("idempotency-key", "k-1")];
    let body = json!({ "section_id": "knight:1" });
    let a = call(&app, "POST", "/sessions", Some(body.clone()), &hdr).await;
    let b = call(&app, "POST", "/sessions", Some(body), &hdr).await;
    assert_eq!(a.status, StatusCode::CREATED);
    assert_eq!(b.status, StatusCode::CREATED);
    assert_eq!(a.body, b.body);
    assert_eq!(b.headers["idempotent-replay"], "true");
    assert_eq!(b.headers[SCHEMA_HEADER], SCHEMA_VERSION);

    let c = call(&app, "POST", "/sessions", Some(json!({ "section_id": "fox:1" })), &hdr).await;
    assert_eq!(c.status, StatusCode::CONFLICT);
    assert_eq!(c.body["code"], "conflict");
}

#[tokio::test]
async fn concurrent_retries_apply_once() {
    let st = state();
    let app = router(st.clone());
    let id = start_session(&app).await;
    post(&app, &format!("/sessions/{id}/concept"), json!({ "concept": "dagger" })).await;
    let key = json!({ "source": "dagger", "relation": "UsedFor", "target": "stabbing" });
    post(&app, &format!("/sessions/{id}/triple"), json!({ "triple": key })).await;

    let uri = format!("/sessions/{id}/qa");
    let qa = json!({ "question": "What is a dagger used for?", "answer": "Stabbing." });
    let mut handles = Vec::new();
    for _ in 0..8 {
        let (app, uri, qa) = (app.clone(), uri.clone(), qa.clone());
        handles.push(tokio::spawn(async move {
            call(&app, "POST", &uri, Some(qa), &[("x-annotator-id", "ann1"), ("idempotency-key", "qa-1")]).await
        }));
    }
    let mut bodies = Vec::new();
    for h in handles {
        let r = h.await.unwrap();
        assert_eq!(r.status, StatusCode::OK, "{}", r.body);
        bodies.push(r.body);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(st.records().len(), 1);
}

#[tokio::test]
async fn export_and_stats() {
    let app = router(state());
    complete_session(&app).await;
    complete_session(&app).await;
    let r = get(&app, "/export").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.headers["content-type"], "application/x-ndjson");
    let text = r.body.as_str().unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l["split"] == "test"));

    let r = get(&app, "/stats").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["splits"]["test"]["questions"], 2);
    let r = get(&app, "/stats?split=bogus").await;
    assert_eq!(r.body["code"], "bad_request");
}

#[tokio::test]
async fn export_with_unmapped_story_conflicts() {
    let index = Arc::new(KnowledgeIndex::from_triples(triples()));
    let matcher = Arc::new(KnowledgeMatcher::new(index, RankingConfig::default()));
    let st = Arc::new(AppState::new(sections(), matcher, RecordStore::in_memory(), ValidationStore::in_memory()));
    let app = router(st);
    complete_session(&app).await;
    let r = get(&app, "/export").await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.body["detail"]["missing_stories"], json!(["knight"]));
}

#[tokio::test]
async fn validation_task_flow() {
    let st = state();
    let app = router(st.clone());
    for _ in 0..3 {
        complete_session(&app).await;
    }
    let mut records = st.records().records();
    for r in &mut records {
        r.split = Some(Split::Test);
    }
    let tasks = sample_tasks(&records, Split::Test, 2, 7, &["val1".to_string()]).unwrap();
    st.validation().add_tasks(&tasks).unwrap();

    let r = get(&app, "/validation/tasks").await;
    assert_eq!(r.body["code"], "bad_request");
    let r = get(&app, "/validation/tasks?validator=val1").await;
    let pending = r.body.as_array().unwrap();
    assert_eq!(pending.len(), 2);
    let task_id = pending[0]["task_id"].as_str().unwrap().to_string();
    let recommended = pending[0]["recommended"].as_array().unwrap();
    let key = |t: &Value| json!({ "source": t["source"], "relation": t["relation"], "target": t["target"] });
    let original = key(&pending[0]["original"]["triple"]);
    let others: Vec<Value> = recommended.iter().map(key).filter(|k| *k != original).take(2).collect();

    let submission = json!({
        "top3": [original, others[0], others[1]],
        "validator_qa": { "question": "What is a dagger used for?", "answer": "Stabbing." },
        "validator_answer": "Stabbing.",
        "started_at": "2026-01-01T00:00:00Z",
        "submitted_at": "2026-01-01T00:05:00Z",
    });
    let uri = format!("/validation/tasks/{task_id}/result");
    let wrong = call(&app, "POST", &uri, Some(submission.clone()), &[("x-annotator-id", "someone")]).await;
    assert_eq!(wrong.body["code"], "conflict");
    let r = call(&app, "POST", &uri, Some(submission.clone()), &[("x-annotator-id", "val1")]).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.body);
    let again = call(&app, "POST", &uri, Some(submission), &[("x-annotator-id", "val1")]).await;
    assert_eq!(again.body, r.body);
    assert_eq!(st.validation().results().len(), 1);

    let foreign = json!({
        "top3": [{ "source": "x", "relation": "IsA", "target": "y" }],
        "validator_qa": { "question": "Q?", "answer": "A" },
        "validator_answer": "A",
        "started_at": "2026-01-01T00:00:00Z",
    });
    let other_task = pending[1]["task_id"].as_str().unwrap();
    let r = call(&app, "POST", &format!("/validation/tasks/{other_task}/result"), Some(foreign), &[]).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);

    let r = get(&app, "/validation/tasks?validator=val1").await;
    assert_eq!(r.body.as_array().unwrap().len(), 1);
    let r = get(&app, "/validation/report").await;
    assert_eq!(r.body["tasks"], 1);
    assert_eq!(r.body["top1_agreement"], 1.0);
    assert_eq!(r.body["mean_rouge_l"], 1.0);

    let r = get(&app, "/validation/tasks/none/result").await;
    assert_eq!(r.status, StatusCode::METHOD_NOT_ALLOWED);
    let r = post(&app, "/validation/tasks/none/result", json!({})).await;
    assert_eq!(r.body["code"], "bad_request");
}
