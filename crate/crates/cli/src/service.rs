//! JSON HTTP API used by the review UI.
//!
//! Templates and predictions live in memory behind single-writer locks;
//! operator corrections are appended to a newline-delimited JSON file and
//! read back from it, so they survive restarts.

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use invizo::enhancement::Prediction;
use invizo::imaging::io as imgio;
use invizo::pipeline::{run_pipeline, PipelineConfig};
use invizo::recognizer::Recognizer;
use invizo::template::{parse_template, serialize_template, Template};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;

/// Shared service state. The recognizer is an immutable snapshot.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    recognizer: Arc<dyn Recognizer>,
    config: PipelineConfig,
    templates: RwLock<HashMap<String, Template>>,
    predictions: RwLock<HashMap<String, Vec<Prediction>>>,
    corrections_path: PathBuf,
    corrections_lock: Mutex<()>,
    next_template: AtomicU64,
    next_prediction: AtomicU64,
}

impl AppState {
    pub fn new(recognizer: Arc<dyn Recognizer>, config: PipelineConfig, corrections_path: PathBuf) -> Self {
        AppState {
            inner: Arc::new(Inner {
                recognizer,
                config,
                templates: RwLock::new(HashMap::new()),
                predictions: RwLock::new(HashMap::new()),
                corrections_path,
                corrections_lock: Mutex::new(()),
                next_template: AtomicU64::new(1),
                next_prediction: AtomicU64::new(1),
            }),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/templates", post(create_template))
        .route("/api/templates/{id}", get(get_template))
        .route("/api/recognize", post(recognize))
        .route("/api/predictions/{id}", get(get_predictions))
        .route("/api/predictions/{id}/corrections", post(add_corrections))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Error response: `{"error": ..., "stage": ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    stage: Option<&'static str>,
}

impl ApiError {
    fn bad_request(m: impl std::fmt::Display) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: m.to_string(),
            stage: None,
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: format!("unknown {what} id {id:?}"),
            stage: None,
        }
    }

    fn internal(m: impl std::fmt::Display) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: m.to_string(),
            stage: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(s) = self.stage {
            body["stage"] = json!(s);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_template(State(st): State<AppState>, body: axum::body::Bytes) -> ApiResult<Json<Value>> {
    let template = parse_template(&body).map_err(ApiError::bad_request)?;
    let id = format!("tpl-{:06}", st.inner.next_template.fetch_add(1, Ordering::SeqCst));
    let shapes = template.shapes.len();
    st.inner.templates.write().expect("template lock").insert(id.clone(), template);
    Ok(Json(json!({ "id": id, "shapes": shapes })))
}

async fn get_template(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let templates = st.inner.templates.read().expect("template lock");
    let t = templates.get(&id).ok_or_else(|| ApiError::not_found("template", &id))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], serialize_template(t)).into_response())
}

#[derive(Debug, Serialize)]
struct RecognizeResponse {
    id: String,
    template_id: String,
    predictions: Vec<Prediction>,
}

async fn recognize(State(st): State<AppState>, mut form: Multipart) -> ApiResult<Json<RecognizeResponse>> {
    let (mut image, mut template_id) = (None, None);
    while let Some(field) = form.next_field().await.map_err(ApiError::bad_request)? {
        match field.name() {
            Some("image") => image = Some(field.bytes().await.map_err(ApiError::bad_request)?),
            Some("template_id") => template_id = Some(field.text().await.map_err(ApiError::bad_request)?),
            _ => {}
        }
    }
    let image = image.ok_or_else(|| ApiError::bad_request("multipart field `image` is required"))?;
    let template_id = template_id.ok_or_else(|| ApiError::bad_request("multipart field `template_id` is required"))?;
    let template = st
        .inner
        .templates
        .read()
        .expect("template lock")
        .get(&template_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("template", &template_id))?;
    let image = imgio::decode(&image).map_err(ApiError::bad_request)?;
    let worker = st.clone();
    let preds = tokio::task::spawn_blocking(move || {
        run_pipeline(&image, &template, worker.inner.recognizer.as_ref(), &worker.inner.config)
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(|e| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        message: e.to_string(),
        stage: Some(e.stage.as_str()),
    })?;
    let id = format!("pred-{:06}", st.inner.next_prediction.fetch_add(1, Ordering::SeqCst));
    st.inner.predictions.write().expect("prediction lock").insert(id.clone(), preds.clone());
    Ok(Json(RecognizeResponse {
        id,
        template_id,
        predictions: preds,
    }))
}

#[derive(Debug, Clone, Deserialize)]
pub struct Correction {
    pub field_id: String,
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CorrectionBody {
    Wrapped { corrections: Vec<Correction> },
    List(Vec<Correction>),
    One(Correction),
}

/// One line of the corrections log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub id: String,
    pub field: String,
    pub corrected_text: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

fn read_corrections(path: &std::path::Path, id: &str) -> std::io::Result<BTreeMap<String, String>> {
    let mut latest = BTreeMap::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(latest),
        Err(e) => return Err(e),
    };
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if let Ok(r) = serde_json::from_str::<CorrectionRecord>(&line) {
            if r.id == id {
                latest.insert(r.field, r.corrected_text);
            }
        }
    }
    Ok(latest)
}

async fn add_corrections(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> ApiResult<Json<Value>> {
    let body: CorrectionBody = serde_json::from_value(body).map_err(ApiError::bad_request)?;
    let corrections = match body {
        CorrectionBody::Wrapped { corrections } | CorrectionBody::List(corrections) => corrections,
        CorrectionBody::One(c) => vec![c],
    };
    {
        let preds = st.inner.predictions.read().expect("prediction lock");
        let p = preds.get(&id).ok_or_else(|| ApiError::not_found("prediction", &id))?;
        if let Some(c) = corrections.iter().find(|c| !p.iter().any(|p| p.field_id == c.field_id)) {
            return Err(ApiError::bad_request(format!("prediction {id} has no field {:?}", c.field_id)));
        }
    }
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut lines = String::new();
    for c in &corrections {
        let rec = CorrectionRecord {
            id: id.clone(),
            field: c.field_id.clone(),
            corrected_text: c.text.clone(),
            timestamp,
        };
        lines.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        lines.push('\n');
    }
    let _guard = st.inner.corrections_lock.lock().expect("corrections lock");
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&st.inner.corrections_path)
        .and_then(|mut f| f.write_all(lines.as_bytes()))
        .map_err(ApiError::internal)?;
    Ok(Json(json!({ "id": id, "appended": corrections.len() })))
}

/// Predictions with the latest operator correction of each field.
async fn get_predictions(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let preds = st
        .inner
        .predictions
        .read()
        .expect("prediction lock")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("prediction", &id))?;
    let corrected = {
        let _guard = st.inner.corrections_lock.lock().expect("corrections lock");
        read_corrections(&st.inner.corrections_path, &id).map_err(ApiError::internal)?
    };
    let items: Vec<Value> = preds
        .iter()
        .map(|p| {
            let mut v = serde_json::to_value(p).expect("prediction serializes");
            v["corrected_text"] = corrected.get(&p.field_id).map_or(Value::Null, |t| json!(t));
            v
        })
        .collect();
    Ok(Json(json!({ "id": id, "predictions": items })))
}
