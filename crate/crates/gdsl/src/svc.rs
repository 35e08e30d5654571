//! HTTP front end over [`Store`]. Routes are listed in `docs/api.md`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gdsl_core::nlcmd::SlotValue;
use gdsl_core::ops::Operation;
use gdsl_core::render::SvgConfig;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::backend::BackendConfig;
use crate::format::{deserialize_document, from_bytes, FormatError};
use crate::store::{Store, StoreError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub cors_origin: Option<String>,
    pub ui_dir: Option<PathBuf>,
    pub backend: BackendConfig,
}

struct AppState {
    store: Store,
    config: ServiceConfig,
}

type Shared = Arc<AppState>;

struct ApiError(StatusCode, Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        let (status, kind, extra) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound", json!({})),
            StoreError::Format(FormatError::MalformedInput { offset, .. }) => (
                StatusCode::BAD_REQUEST,
                "MalformedInput",
                json!({"offset": offset}),
            ),
            StoreError::Format(FormatError::SchemaViolation { field, .. }) => (
                StatusCode::BAD_REQUEST,
                "SchemaViolation",
                json!({"field": field}),
            ),
            StoreError::Invalid(_) => (StatusCode::BAD_REQUEST, "SchemaViolation", json!({})),
            StoreError::Conflict { index, error } => (
                StatusCode::CONFLICT,
                "OperationFailed",
                json!({"index": index, "field": error.field}),
            ),
            StoreError::NoPendingProposal => (StatusCode::CONFLICT, "NoPendingProposal", json!({})),
            StoreError::Slot(_) => (StatusCode::BAD_REQUEST, "SlotError", json!({})),
            StoreError::Import(crate::svg_import::ImportError::UnsupportedElement(tag)) => (
                StatusCode::BAD_REQUEST,
                "UnsupportedElement",
                json!({"element": tag}),
            ),
            StoreError::Import(_) => (StatusCode::BAD_REQUEST, "BadSvg", json!({})),
            StoreError::Infer(_) => (StatusCode::BAD_REQUEST, "InferenceFailed", json!({})),
            StoreError::Compile(_) => (StatusCode::CONFLICT, "RenderFailed", json!({})),
            StoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Storage", json!({})),
        };
        let mut body = json!({"error": kind, "message": message});
        if let (Value::Object(b), Value::Object(x)) = (&mut body, extra) {
            b.extend(x);
        }
        ApiError(status, body)
    }
}

fn bad_body(e: FormatError) -> ApiError {
    ApiError::from(StoreError::Format(e))
}

/// Runs blocking store work off the async workers.
async fn blocking<T: Send + 'static>(
    state: &Shared,
    f: impl FnOnce(&Store) -> Result<T, StoreError> + Send + 'static,
) -> Result<T, ApiError> {
    let st = state.clone();
    tokio::task::spawn_blocking(move || f(&st.store))
        .await
        .expect("store task panicked")
        .map_err(ApiError::from)
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RenderQuery {
    width: Option<f64>,
    height: Option<f64>,
    decimals: Option<u8>,
    annotate: Option<bool>,
}

impl RenderQuery {
    fn config(&self) -> SvgConfig {
        let d = SvgConfig::default();
        SvgConfig {
            width: self.width.unwrap_or(d.width),
            height: self.height.unwrap_or(d.height),
            decimals: self.decimals.unwrap_or(d.decimals),
            annotate: self.annotate.unwrap_or(false),
            ..d
        }
    }
}

async fn create_session(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let initial = if body.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        Some(deserialize_document(&body).map_err(bad_body)?)
    };
    let id = blocking(&s, move |st| st.create(initial)).await?;
    Ok((StatusCode::CREATED, Json(json!({"sessionId": id}))).into_response())
}

async fn post_ops(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let ops: Vec<Operation> = from_bytes(&body).map_err(bad_body)?;
    let (version, warnings) = blocking(&s, move |st| st.apply_ops(&id, &ops)).await?;
    Ok(Json(json!({"version": version, "warnings": warnings})))
}

#[derive(Deserialize)]
struct NlRequest {
    text: String,
    #[serde(default)]
    selection: Option<String>,
}

async fn post_nl(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: NlRequest = from_bytes(&body).map_err(bad_body)?;
    let r = blocking(&s, move |st| {
        st.parse_nl(&id, &req.text, req.selection.as_deref())
    })
    .await?;
    Ok(Json(
        serde_json::to_value(r).expect("parse result serializes"),
    ))
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct ConfirmRequest {
    #[serde(default)]
    slot_overrides: BTreeMap<String, SlotValue>,
}

async fn post_confirm(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ConfirmRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ConfirmRequest::default()
    } else {
        from_bytes(&body).map_err(bad_body)?
    };
    let version = blocking(&s, move |st| st.confirm(&id, &req.slot_overrides)).await?;
    Ok(Json(json!({"version": version})))
}

async fn get_preview(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let cfg = q.config();
    let p = blocking(&s, move |st| st.preview(&id, &cfg)).await?;
    let etag = HeaderValue::from_str(&p.etag).expect("hex etag");
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == p.etag || t.trim() == "*"));
    if matches {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response());
    }
    Ok((
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static("image/svg+xml"),
            ),
            (header::ETAG, etag),
        ],
        p.svg,
    )
        .into_response())
}

async fn post_infer(
    State(s): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let text = String::from_utf8(body.to_vec()).map_err(|e| {
        ApiError(
            StatusCode::BAD_REQUEST,
            json!({"error": "BadSvg", "message": e.to_string()}),
        )
    })?;
    let added = blocking(&s, move |st| st.infer(&id, &text)).await?;
    Ok(Json(json!({"addedContainerIds": added})))
}

async fn get_document(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let bytes = blocking(&s, move |st| st.document(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn get_history(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let bytes = blocking(&s, move |st| st.history(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn get_export(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
) -> Result<Json<Value>, ApiError> {
    let cfg = q.config();
    let bundle = blocking(&s, move |st| st.export(&id, &cfg)).await?;
    Ok(Json(
        serde_json::to_value(bundle).expect("bundle serializes"),
    ))
}

async fn get_config(State(s): State<Shared>) -> Json<Value> {
    Json(json!({
        "apiBase": "/",
        "backend": s.config.backend,
        "corsOrigin": s.config.cors_origin,
        "pollIntervalMs": 500,
        "previewAnnotate": true,
    }))
}

/// The service routes, backed by a store in `config.data_dir`.
pub fn router(config: ServiceConfig) -> std::io::Result<Router> {
    let store = Store::open(&config.data_dir, config.backend.build())?;
    let cors = config.cors_origin.clone();
    let ui = config.ui_dir.clone();
    let state = Arc::new(AppState { store, config });
    let mut app = Router::new()
        .route("/config", get(get_config))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/ops", post(post_ops))
        .route("/sessions/{id}/nl", post(post_nl))
        .route("/sessions/{id}/nl/confirm", post(post_confirm))
        .route("/sessions/{id}/preview.svg", get(get_preview))
        .route("/sessions/{id}/infer", post(post_infer))
        .route("/sessions/{id}/document", get(get_document))
        .route("/sessions/{id}/history", get(get_history))
        .route("/sessions/{id}/export", get(get_export))
        .with_state(state);
    if let Some(dir) = ui {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    if let Some(origin) = cors {
        let origin = HeaderValue::from_str(&origin)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE, header::IF_NONE_MATCH])
                .expose_headers([header::ETAG]),
        );
    }
    Ok(app)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    config: ServiceConfig,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `addr`, returning the bound address and the running server task.
pub async fn spawn(
    config: ServiceConfig,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let app = router(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let task = tokio::spawn(async move { axum::serve(listener, app).await });
    Ok((bound, task))
}
