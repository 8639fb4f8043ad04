use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use storyloom_service::api::{router, AppState};
use storyloom_service::config::ProviderConfig;
use storyloom_service::session::SessionFactory;
use storyloom_service::store::FileStore;
use tower::ServiceExt;

struct Harness {
    app: Router,
    _dir: tempfile::TempDir,
}

impl Harness {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let state: Arc<AppState> = AppState::new(FileStore::open(dir.path()).unwrap(), SessionFactory::new(ProviderConfig::mock()));
        Harness { app: router(state), _dir: dir }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    async fn workspace(&self, seed: u64) -> String {
        let (status, ws) = self
            .call(Method::POST, "/api/workspaces", Some(json!({"name": "t", "seed": seed, "providerMode": "mock"})))
            .await;
        assert_eq!(status, StatusCode::CREATED);
        ws["id"].as_str().unwrap().to_string()
    }

    async fn brainstorm(&self, ws: &str, to: &str) -> Value {
        let (status, out) = self
            .call(
                Method::POST,
                &format!("/api/workspaces/{ws}/brainstorm"),
                Some(json!({"designContext": "Urban sustainability", "targetStage": to})),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "{out}");
        out
    }
}

fn kind_counts(ws: &Value) -> std::collections::BTreeMap<String, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for node in ws["graph"]["nodes"].as_object().unwrap().values() {
        *counts.entry(node["content"]["kind"].as_str().unwrap().to_string()).or_default() += 1;
    }
    counts
}

fn node_by_kind(ws: &Value, kind: &str) -> String {
    ws["graph"]["nodes"]
        .as_object()
        .unwrap()
        .iter()
        .find(|(_, n)| n["content"]["kind"] == kind)
        .map(|(id, _)| id.clone())
        .unwrap()
}

#[tokio::test]
async fn brainstorm_then_get_has_the_full_chain_shape() {
    let h = Harness::new();
    let ws = h.workspace(1).await;
    h.brainstorm(&ws, "storyboard").await;
    let (status, body) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let counts = kind_counts(&body);
    let expected: Vec<(&str, usize)> = vec![("context", 1), ("persona", 3), ("problem", 3), ("solution", 3), ("storyboard", 1)];
    assert_eq!(counts.iter().map(|(k, v)| (k.as_str(), *v)).collect::<Vec<_>>(), expected);
    let edges = body["graph"]["edges"].as_array().unwrap().len();
    assert_eq!(edges, 3 + 3 + 1);
}

#[tokio::test]
async fn persona_to_solution_is_rejected_with_422() {
    let h = Harness::new();
    let ws = h.workspace(2).await;
    h.brainstorm(&ws, "solution").await;
    let (_, body) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    let persona = node_by_kind(&body, "persona");
    let solution = node_by_kind(&body, "solution");
    let (status, err) = h
        .call(Method::POST, &format!("/api/workspaces/{ws}/connect"), Some(json!({"from": persona, "to": solution})))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "EdgeIllegal");
}

#[tokio::test]
async fn dry_run_returns_the_plan_without_changing_state() {
    let h = Harness::new();
    let ws = h.workspace(3).await;
    h.brainstorm(&ws, "storyboard").await;
    let (_, before) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    let persona = node_by_kind(&before, "persona");

    let (status, dry) = h
        .call(
            Method::POST,
            &format!("/api/workspaces/{ws}/propagate?dryRun=true"),
            Some(json!({"nodeId": persona, "direction": "forward"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{dry}");
    assert!(dry.get("result").is_none());
    let (_, after) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    assert_eq!(before, after);

    let (status, real) = h
        .call(
            Method::POST,
            &format!("/api/workspaces/{ws}/propagate"),
            Some(json!({"nodeId": persona, "direction": "forward"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{real}");
    assert_eq!(dry["plan"], real["plan"]);
    let steps = real["plan"]["steps"].as_array().unwrap();
    assert!(!steps.is_empty());
    let updated = real["result"]["updatedNodes"].as_array().unwrap();
    assert_eq!(updated.len(), steps.len());
}

#[tokio::test]
async fn node_crud_and_structured_errors() {
    let h = Harness::new();
    let ws = h.workspace(4).await;
    let (status, node) = h
        .call(
            Method::POST,
            &format!("/api/workspaces/{ws}/nodes"),
            Some(json!({"content": {"kind": "persona", "name": "Ada"}, "position": {"x": 1.0, "y": 2.0}})),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED);
    let id = node["id"].as_str().unwrap().to_string();

    let (status, updated) = h
        .call(
            Method::PUT,
            &format!("/api/workspaces/{ws}/nodes/{id}"),
            Some(json!({"content": {"kind": "persona", "name": "Ada L."}})),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(updated["node"]["content"]["name"], "Ada L.");
    assert_eq!(updated["change"]["diff"][0]["fieldPath"], "name");

    let (status, got) = h.call(Method::GET, &format!("/api/workspaces/{ws}/nodes/@Ada%20L."), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got["id"], id.as_str());

    let (status, _) = h.call(Method::DELETE, &format!("/api/workspaces/{ws}/nodes/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, err) = h.call(Method::GET, &format!("/api/workspaces/{ws}/nodes/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "NotFound");

    let (status, err) = h.call(Method::POST, &format!("/api/workspaces/{ws}/nodes"), Some(json!({"nope": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["code"], "BadRequest");

    let (status, err) = h.call(Method::GET, "/api/workspaces/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "WorkspaceNotFound");

    let (status, err) = h.call(Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["code"], "RouteNotFound");
}

#[tokio::test]
async fn feedback_incorporation_marks_downstream_and_streams_events() {
    let h = Harness::new();
    let ws = h.workspace(5).await;
    h.brainstorm(&ws, "solution").await;
    let (_, body) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    let persona = node_by_kind(&body, "persona");

    let (_, log) = h.call(Method::GET, &format!("/api/workspaces/{ws}/events/log"), None).await;
    let last = log.as_array().unwrap().last().unwrap()["seq"].as_u64().unwrap();

    let (status, questions) = h.call(Method::POST, &format!("/api/workspaces/{ws}/nodes/{persona}/feedback"), None).await;
    assert_eq!(status, StatusCode::OK);
    let qid = questions[0]["id"].as_str().unwrap().to_string();
    let (status, change) = h
        .call(
            Method::POST,
            &format!("/api/workspaces/{ws}/feedback/{qid}/incorporate"),
            Some(json!({"response": "She volunteers at a recycling program"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{change}");
    assert!(!change["marks"].as_array().unwrap().is_empty());

    let (status, err) = h
        .call(Method::POST, &format!("/api/workspaces/{ws}/feedback/{qid}/incorporate"), Some(json!({"response": "again"})))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "AlreadyIncorporated");

    let (_, newer) = h
        .call(Method::GET, &format!("/api/workspaces/{ws}/events/log?after={last}&waitMs=10"), None)
        .await;
    let kinds: Vec<&str> = newer.as_array().unwrap().iter().map(|e| e["type"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["FeedbackGenerated", "FeedbackIncorporated"]);
}

#[tokio::test]
async fn storyboard_build_and_metrics() {
    let h = Harness::new();
    let ws = h.workspace(6).await;
    h.brainstorm(&ws, "solution").await;
    let (_, body) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    let solution = node_by_kind(&body, "solution");
    let (status, built) = h
        .call(Method::POST, &format!("/api/workspaces/{ws}/storyboards"), Some(json!({"nodeIds": [solution]})))
        .await;
    assert_eq!(status, StatusCode::CREATED, "{built}");
    let frames = built["content"]["frames"].as_array().unwrap().len();
    assert!((4..=8).contains(&frames));
    let board = built["nodeId"].as_str().unwrap();

    let (status, _) = h
        .call(Method::POST, &format!("/api/workspaces/{ws}/nodes/{board}/regenerate-images"), None)
        .await;
    assert_eq!(status, StatusCode::OK);

    let (_, metrics) = h.call(Method::GET, &format!("/api/workspaces/{ws}/metrics"), None).await;
    assert_eq!(metrics["nodeCounts"]["storyboard"], 1);
    assert_eq!(metrics["featureUsage"]["Start Brainstorming"], 1);
    assert_eq!(metrics["featureUsage"]["Regenerate Images"], 1);

    let (status, md) = h.call(Method::GET, &format!("/api/workspaces/{ws}/export?format=md"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(md.as_str().unwrap().starts_with("# t\n"));
}

#[tokio::test]
async fn workspaces_can_be_listed_renamed_and_deleted() {
    let h = Harness::new();
    let a = h.workspace(7).await;
    let b = h.workspace(8).await;
    let (_, list) = h.call(Method::GET, "/api/workspaces", None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
    let (status, renamed) = h
        .call(Method::PATCH, &format!("/api/workspaces/{a}"), Some(json!({"name": "renamed", "defaultVariations": 2})))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(renamed["name"], "renamed");
    assert_eq!(renamed["settings"]["defaultVariations"], 2);
    let (status, _) = h.call(Method::DELETE, &format!("/api/workspaces/{b}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = h.call(Method::GET, &format!("/api/workspaces/{b}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn concurrent_mutations_on_one_workspace_are_serialized() {
    let h = Harness::new();
    let ws = h.workspace(9).await;
    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = h.app.clone();
        let uri = format!("/api/workspaces/{ws}/nodes");
        tasks.push(tokio::spawn(async move {
            let body = json!({"content": {"kind": "problem", "title": format!("p{i}")}}).to_string();
            let req = Request::builder()
                .method(Method::POST)
                .uri(uri)
                .header("content-type", "application/json")
                .body(Body::from(body))
                .unwrap();
            app.oneshot(req).await.unwrap().status()
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    let (_, body) = h.call(Method::GET, &format!("/api/workspaces/{ws}"), None).await;
    assert_eq!(body["graph"]["nodes"].as_object().unwrap().len(), 16);
    let seqs: Vec<u64> = body["events"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (0..16).collect::<Vec<_>>());
}

#[tokio::test]
async fn event_stream_opens_with_a_marks_snapshot() {
    let h = Harness::new();
    let ws = h.workspace(10).await;
    let req = Request::builder().uri(format!("/api/workspaces/{ws}/events")).body(Body::empty()).unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/event-stream"));
    let mut body = resp.into_body();
    let frame = body.frame().await.unwrap().unwrap().into_data().unwrap();
    let text = String::from_utf8(frame.to_vec()).unwrap();
    assert!(text.starts_with("event: marks\ndata: {\"marks\":[]}"), "{text}");
}
