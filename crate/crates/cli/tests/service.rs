mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::*;
use http_body_util::BodyExt;
use invizo::imaging::{io, RasterImage};
use invizo::pipeline::PipelineConfig;
use invizo::template::serialize_template;
use invizo_cli::service::{router, AppState};
use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;
use tower::ServiceExt;

fn app(corrections: &Path) -> axum::Router {
    router(AppState::new(Arc::new(tiny_model()), PipelineConfig::default(), corrections.to_path_buf()))
}

async fn send(app: &axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::post(uri).header("content-type", "application/json").body(Body::from(body)).unwrap()
}

const BOUNDARY: &str = "invizo-test-boundary";

fn multipart(image: Option<&[u8]>, template_id: Option<&str>) -> Request<Body> {
    let mut body = Vec::new();
    if let Some(id) = template_id {
        body.extend(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"template_id\"\r\n\r\n{id}\r\n").bytes());
    }
    if let Some(img) = image {
        body.extend(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"t.png\"\r\nContent-Type: image/png\r\n\r\n")
                .bytes(),
        );
        body.extend_from_slice(img);
        body.extend(b"\r\n");
    }
    body.extend(format!("--{BOUNDARY}--\r\n").bytes());
    Request::post("/api/recognize")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

async fn store_template(app: &axum::Router) -> String {
    let (status, body) = send(app, post_json("/api/templates", serialize_template(&template()))).await;
    assert_eq!(status, StatusCode::OK);
    json_of(&body)["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body) = send(&app(&dir.path().join("c.ndjson")), get("/api/health")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(json_of(&body), json!({"status": "ok"}));
}

#[tokio::test]
async fn templates_round_trip_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("c.ndjson"));
    let id = store_template(&app).await;
    let (status, body) = send(&app, get(&format!("/api/templates/{id}"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, serialize_template(&template()));
    assert_eq!(send(&app, get("/api/templates/tpl-999999")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_templates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("c.ndjson"));
    let (status, body) = send(&app, post_json("/api/templates", b"{\"shapes\": 3}".to_vec())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(json_of(&body)["error"].is_string());
    let mut t: Value = serde_json::from_slice(&serialize_template(&template())).unwrap();
    t["shapes"][1]["possibilities"] = json!([]);
    let (status, _) = send(&app, post_json("/api/templates", serde_json::to_vec(&t).unwrap())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn recognize_and_correct() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("c.ndjson");
    let app = app(&log);
    let tid = store_template(&app).await;
    let png = io::encode_png(&filled_page(&template())).unwrap();
    let (status, body) = send(&app, multipart(Some(&png), Some(&tid))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let resp = json_of(&body);
    let preds = resp["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 3);
    assert_eq!(preds[0]["field_id"], "amount");
    let pid = resp["id"].as_str().unwrap().to_string();

    let uri = format!("/api/predictions/{pid}/corrections");
    let body = serde_json::to_vec(&json!({"corrections": [{"field_id": "amount", "text": "٤٢"}]})).unwrap();
    assert_eq!(send(&app, post_json(&uri, body)).await.0, StatusCode::OK);
    let body = serde_json::to_vec(&json!({"field_id": "amount", "text": "٤٣"})).unwrap();
    assert_eq!(send(&app, post_json(&uri, body)).await.0, StatusCode::OK);

    // Append-only log: both records kept, the latest wins on read.
    let lines: Vec<Value> = std::fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["corrected_text"], "٤٢");
    assert_eq!(lines[1]["field"], "amount");
    assert_eq!(lines[1]["id"], pid.as_str());
    assert!(lines[1]["timestamp"].is_u64());
    let (status, body) = send(&app, get(&format!("/api/predictions/{pid}"))).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!(v["predictions"][0]["corrected_text"], "٤٣");
    assert_eq!(v["predictions"][1]["corrected_text"], Value::Null);

    // Rejected corrections leave the log untouched.
    let body = serde_json::to_vec(&json!({"field_id": "nope", "text": "x"})).unwrap();
    assert_eq!(send(&app, post_json(&uri, body)).await.0, StatusCode::BAD_REQUEST);
    let body = serde_json::to_vec(&json!({"field_id": "amount", "text": "x"})).unwrap();
    assert_eq!(send(&app, post_json("/api/predictions/pred-999999/corrections", body)).await.0, StatusCode::NOT_FOUND);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 2);
}

#[tokio::test]
async fn recognize_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("c.ndjson"));
    let tid = store_template(&app).await;
    let png = io::encode_png(&filled_page(&template())).unwrap();
    assert_eq!(send(&app, multipart(Some(&png), None)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, multipart(None, Some(&tid))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, multipart(Some(b"not an image"), Some(&tid))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&app, multipart(Some(&png), Some("tpl-424242"))).await.0, StatusCode::NOT_FOUND);
    let blank = io::encode_png(&RasterImage::filled(400, 300, 255)).unwrap();
    let (status, body) = send(&app, multipart(Some(&blank), Some(&tid))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["stage"], "registration");
}
