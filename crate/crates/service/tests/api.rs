use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use biaslens::fixtures::{self, fixture_policy};
use biaslens::report::risk_json;
use biaslens::risk::{risk_report, ImpactProfile};
use biaslens_service::{router, SessionStore, DEFAULT_MAX_UPLOAD};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

fn fixture(name: &str) -> Vec<u8> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures");
    std::fs::read(dir.join(name)).unwrap()
}

const BOUNDARY: &str = "biaslens-test-boundary";

fn multipart(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, data) in parts {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}\"\r\n\
                 Content-Type: application/octet-stream\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn upload(prefix: &str) -> Vec<u8> {
    multipart(&[
        (
            "predictions",
            &fixture(&format!("{prefix}_predictions.csv")),
        ),
        ("attributes", &fixture(&format!("{prefix}_attributes.csv"))),
        ("schema", &fixture("schema.json")),
    ])
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, String) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(app: &Router, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

async fn create(app: &Router, body: Vec<u8>) -> (StatusCode, String) {
    let req = Request::post("/sessions")
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap();
    send(app, req).await
}

async fn create_ok(app: &Router, prefix: &str) -> String {
    let (status, body) = create(app, upload(prefix)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    v["session_id"].as_str().unwrap().to_string()
}

fn app(dir: &tempfile::TempDir, cap: usize) -> Router {
    router(Arc::new(SessionStore::open(dir.path()).unwrap()), cap)
}

#[tokio::test]
async fn table2_session_summary() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, DEFAULT_MAX_UPLOAD);
    let id = create_ok(&app, "table2").await;
    let (status, body) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["records"], 11);
    assert_eq!(v["rank_accuracy"][0]["k"], 1);
    assert_eq!(v["rank_accuracy"][0]["hits"], 8);
    assert_eq!(v["rank_accuracy"][1]["hits"], 10);

    let again = create_ok(&app, "table2").await;
    assert_ne!(id, again);
    let (_, list) = get(&app, "/sessions").await;
    assert!(list.contains(&id) && list.contains(&again));
}

#[tokio::test]
async fn upload_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, DEFAULT_MAX_UPLOAD);
    let bad =
        b"probe_id,true_label,rank,candidate_label,score\np15,15,1,15,11.8\np15,15,2,913,abc\n";
    let body = multipart(&[
        ("predictions", bad),
        ("attributes", &fixture("table2_attributes.csv")),
        ("schema", &fixture("schema.json")),
    ]);
    let (status, text) = create(&app, body).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(text.contains("line 3"), "{text}");

    let missing = multipart(&[("predictions", &fixture("table2_predictions.csv"))]);
    assert_eq!(create(&app, missing).await.0, StatusCode::BAD_REQUEST);

    let small = self::app(&dir, 1024);
    let (status, _) = create(&small, upload("table2")).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn risk_matches_library_output() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, DEFAULT_MAX_UPLOAD);
    let id = create_ok(&app, "checkpoint").await;
    let (status, body) = get(
        &app,
        &format!(
            "/sessions/{id}/risk?impact_fmr=1&impact_fnmr=1&policy=score_threshold&theta=0.25"
        ),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let expected = risk_json(
        &risk_report(
            &fixtures::checkpoint(),
            &fixture_policy(),
            &ImpactProfile::default(),
        )
        .unwrap(),
    );
    assert_eq!(body, expected);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["baseline"]["risk"]["display"], "0.0942");
}

#[tokio::test]
async fn parameter_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, DEFAULT_MAX_UPLOAD);
    assert_eq!(
        get(&app, "/sessions/nope/metrics").await.0,
        StatusCode::NOT_FOUND
    );
    let id = create_ok(&app, "table2").await;
    for q in ["theta=2", "policy=median", "top_k=0", "theta=x"] {
        let (status, body) = get(&app, &format!("/sessions/{id}/metrics?{q}")).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{q}: {body}");
        assert!(body.contains("\"category\""));
    }
    assert_eq!(
        get(&app, &format!("/sessions/{id}/risk?impact_fmr=-1"))
            .await
            .0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    assert_eq!(
        get(&app, &format!("/sessions/{id}/sweep?thetas=")).await.0,
        StatusCode::UNPROCESSABLE_ENTITY
    );
    let (status, _) = post_json(
        &app,
        &format!("/sessions/{id}/infer"),
        r#"{"query":"height"}"#,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = post_json(
        &app,
        &format!("/sessions/{id}/infer"),
        r#"{"query":"Outcome","evidence":{"gender":"Unknown"}}"#,
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn inference_and_conflicting_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir, DEFAULT_MAX_UPLOAD);
    let id = create_ok(&app, "priors").await;
    let uri = format!("/sessions/{id}/infer");

    let (status, body) = post_json(
        &app,
        &uri,
        r#"{"query":"gender","evidence":{},"alpha":0,"min_support":0}"#,
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["distribution"][0]["state"], "Male");
    assert_eq!(v["distribution"][0]["probability"]["display"], "0.6383");
    assert_eq!(v["distribution"][1]["probability"]["display"], "0.3617");

    let (status, body) = post_json(
        &app,
        &uri,
        r#"{"query":"Outcome","evidence":{"gender":"Female"},"alpha":0,"min_support":0,"policy":"score_threshold","theta":0.25}"#,
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["conditional_rates"]["fnmr"]["display"], "0.1233");
    assert_eq!(v["conditional_rates"]["fmr"]["display"], "0.0003");

    // every subject in this fixture was born in the 1950s
    let (status, body) = post_json(
        &app,
        &uri,
        r#"{"query":"gender","evidence":{"yob_decade":"1920s"},"alpha":0,"min_support":0}"#,
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert!(body.contains("\"evidence\""));
}

#[tokio::test]
async fn responses_survive_restart_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(&dir, DEFAULT_MAX_UPLOAD);
    let id = create_ok(&first, "table2").await;
    let uris = [
        format!("/sessions/{id}/metrics?policy=score_threshold&theta=0.5"),
        format!("/sessions/{id}/risk?impact_fmr=10&impact_fnmr=1"),
        format!("/sessions/{id}/sweep?thetas=0,0.5,0.9&impacts=1:1,10:1&policy=score_threshold"),
    ];
    let mut before = Vec::new();
    for u in &uris {
        let (status, body) = get(&first, u).await;
        assert_eq!(status, StatusCode::OK, "{u}: {body}");
        assert_eq!(get(&first, u).await.1, body);
        before.push(body);
    }
    let restarted = app(&dir, DEFAULT_MAX_UPLOAD);
    for (u, b) in uris.iter().zip(&before) {
        assert_eq!(&get(&restarted, u).await.1, b);
    }
    let sweep: Value = serde_json::from_str(&before[2]).unwrap();
    assert_eq!(sweep["points"].as_array().unwrap().len(), 6);
}

#[tokio::test]
async fn concurrent_inference_shares_one_network() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(SessionStore::open(dir.path()).unwrap());
    let app = router(Arc::clone(&store), DEFAULT_MAX_UPLOAD);
    let id = create_ok(&app, "checkpoint").await;
    let uri = format!("/sessions/{id}/infer");
    let body = r#"{"query":"Outcome","evidence":{"gender":"Male"},"alpha":1,"min_support":5}"#;
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let (app, uri) = (app.clone(), uri.clone());
            tokio::spawn(async move { post_json(&app, &uri, body).await })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        let (status, b) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(store.get(&id).unwrap().cached_networks(), 1);
}
