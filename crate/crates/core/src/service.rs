//! HTTP JSON API over a [`Session`].

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::{ingest_csv, MissingPolicy};
use crate::error::{Error, Result};
use crate::gbdt::load_model;
use crate::schema::{load_schema_file, ClassLabel, DatasetSchema};
use crate::session::{default_counts, EngineSettings, ExplainEngine, HypothesisRequest, Session, SessionLog};

/// Environment variables read by the `serve` command carry this prefix.
pub const ENV_PREFIX: &str = "HYPEX_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub model_path: PathBuf,
    pub data_path: PathBuf,
    #[serde(default)]
    pub schema_path: Option<PathBuf>,
    #[serde(default)]
    pub log_path: Option<PathBuf>,
    #[serde(default)]
    pub settings: EngineSettings,
}

/// Loads model, dataset and log; any failure here should stop the service
/// from starting.
pub fn load_session(config: &ServiceConfig) -> Result<Session> {
    let schema = match &config.schema_path {
        Some(p) => load_schema_file(p)?,
        None => DatasetSchema::thyroid(),
    };
    let model = load_model(&config.model_path)?;
    let (data, _) = ingest_csv(&config.data_path, &schema, MissingPolicy::DropRow)?;
    let engine = ExplainEngine::new(model, data)?.with_settings(config.settings.clone())?;
    let log = match &config.log_path {
        Some(p) => SessionLog::open(p)?,
        None => SessionLog::in_memory(),
    };
    Ok(Session::new(engine, log))
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/classes", get(classes))
        .route("/records/{id}", get(record))
        .route("/explain", post(explain))
        .route("/session", get(session_log))
        .with_state(session)
}

pub async fn serve(config: ServiceConfig) -> Result<()> {
    let session = Arc::new(load_session(&config)?);
    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|e| Error::io(format!("listen address {}", config.listen), e))?;
    tracing::info!(addr = %config.listen, model = session.engine().model_fingerprint(), "serving");
    axum::serve(listener, router(session))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("server", e))
}

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::RecordNotFound(_) => StatusCode::NOT_FOUND,
        Error::InvalidClass(_) | Error::InvalidCount(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Malformed(_) | Error::RecordShape(_) | Error::InvalidConfig(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.0.code(), "message": self.0.to_string()}});
        (status_for(&self.0), Json(body)).into_response()
    }
}

async fn health(State(s): State<Arc<Session>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "model_fingerprint": s.engine().model_fingerprint(),
        "records": s.engine().data().len(),
    }))
}

async fn classes(State(s): State<Arc<Session>>) -> Json<Value> {
    let list: Vec<Value> = ClassLabel::all()
        .map(|c| {
            let (cf, sc) = default_counts(c);
            json!({
                "index": c.index(),
                "name": s.engine().schema().class_name(c),
                "default_counts": {"n_counterexamples_per_class": cf, "n_similar_cases": sc},
            })
        })
        .collect();
    Json(Value::Array(list))
}

async fn record(State(s): State<Arc<Session>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let (r, _) = s
        .engine()
        .data()
        .find(&id)
        .ok_or_else(|| Error::RecordNotFound(id.clone()))?;
    Ok(Json(json!({"record_id": r.id, "values": s.engine().render_record(r)})))
}

async fn explain(State(s): State<Arc<Session>>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let value: Value = serde_json::from_slice(&body).map_err(|e| Error::Malformed(e.to_string()))?;
    let req = HypothesisRequest::from_json(value)?;
    let bundle = tokio::task::spawn_blocking(move || s.handle(&req))
        .await
        .map_err(|e| Error::SessionLog(format!("worker failed: {e}")))??;
    Ok((
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        bundle.to_json_bytes(),
    )
        .into_response())
}

async fn session_log(State(s): State<Arc<Session>>) -> Json<Value> {
    Json(json!({"entries": s.log().entries()}))
}
