//! HTTP compression service.
//!
//! `POST /v1/compress` takes `{text, profile?, keep_rate?, target_length?,
//! block_align?}` and answers `{text, token_count, keep_rate, ...}`. With an
//! upstream configured, `POST /v1/completions` compresses the `prompt` field
//! of a completion request, forwards the request and streams the upstream
//! response back. Errors are `{"error": {"class", "message"}}`.

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use xfam_core::bench::{run_sample, ProviderSource};
use xfam_core::config::{ConfigOverrides, Profiles, DEFAULT_PROFILE};
use xfam_core::corpus::Sample;
use xfam_core::pipeline::{CompressedPrompt, CompressionConfig, CompressionStats};
use xfam_core::tokenizer::Tokenizer;
use xfam_core::{Error, ErrorClass};

pub const COMPRESS_PATH: &str = "/v1/compress";
pub const COMPLETIONS_PATH: &str = "/v1/completions";

/// Shared, immutable service state.
pub struct AppState {
    pub profiles: Profiles,
    /// Command-line overrides, applied before per-request ones.
    pub overrides: ConfigOverrides,
    pub source: ProviderSource,
    pub draft: Arc<dyn Tokenizer>,
    pub target: Arc<dyn Tokenizer>,
    pub max_input_bytes: usize,
    pub upstream: Option<Upstream>,
}

pub struct Upstream {
    pub url: String,
    pub client: reqwest::Client,
}

impl Upstream {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), client: reqwest::Client::new() }
    }
}

/// Per-request compression settings.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeepSettings {
    pub profile: Option<String>,
    pub keep_rate: Option<f64>,
    pub target_length: Option<usize>,
    pub block_align: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressRequest {
    pub text: String,
    pub profile: Option<String>,
    pub keep_rate: Option<f64>,
    pub target_length: Option<usize>,
    pub block_align: Option<usize>,
}

impl CompressRequest {
    fn split(self) -> (String, KeepSettings) {
        let keep = KeepSettings {
            profile: self.profile,
            keep_rate: self.keep_rate,
            target_length: self.target_length,
            block_align: self.block_align,
        };
        (self.text, keep)
    }
}

#[derive(Debug, Serialize)]
pub struct CompressResponse {
    pub text: String,
    pub token_count: usize,
    pub keep_rate: f64,
    pub requested_keep_rate: f64,
    pub requested_target_tokens: f64,
    pub stats: CompressionStats,
}

impl From<CompressedPrompt> for CompressResponse {
    fn from(out: CompressedPrompt) -> Self {
        Self {
            token_count: out.stats.compressed_target_tokens,
            keep_rate: out.achieved_keep_rate,
            requested_keep_rate: out.requested_keep_rate,
            requested_target_tokens: out.stats.requested_target_tokens,
            text: out.text,
            stats: out.stats,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    class: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, class: &str, message: impl Into<String>) -> Self {
        Self { status, class: class.to_owned(), message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.class() {
            ErrorClass::InvalidInput | ErrorClass::InvalidConfig | ErrorClass::EmptySelection => {
                StatusCode::BAD_REQUEST
            }
            ErrorClass::DraftContext => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorClass::Capability => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Format | ErrorClass::Corruption | ErrorClass::Protocol | ErrorClass::Transport => {
                StatusCode::BAD_GATEWAY
            }
            ErrorClass::Tokenizer | ErrorClass::Io => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.class().as_str(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": {"class": self.class, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl AppState {
    fn config_for(&self, keep: &KeepSettings) -> Result<CompressionConfig, Error> {
        let base = self.profiles.get(keep.profile.as_deref().unwrap_or(DEFAULT_PROFILE))?;
        let cfg = self.overrides.apply(base)?;
        let request = ConfigOverrides {
            keep_rate: keep.keep_rate,
            target_length: keep.target_length,
            block_align: keep.block_align,
            ..ConfigOverrides::default()
        };
        request.apply(&cfg)
    }

    /// Runs one compression; blocking.
    pub fn compress(&self, text: String, keep: &KeepSettings) -> Result<CompressedPrompt, Error> {
        let config = self.config_for(keep)?;
        let sample = Sample { id: String::new(), prompt: text, needle: None, question: None };
        let (out, _) = run_sample(&sample, &config, &self.source, self.draft.as_ref(), self.target.as_ref())?;
        Ok(out)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.max_input_bytes;
    let mut app = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route(COMPRESS_PATH, post(compress_handler));
    if state.upstream.is_some() {
        app = app.route(COMPLETIONS_PATH, post(completions_handler));
    }
    app.layer(DefaultBodyLimit::max(limit)).with_state(state)
}

fn body_bytes(body: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    body.map_err(|r| {
        let class = if r.status() == StatusCode::PAYLOAD_TOO_LARGE { "too-large" } else { "invalid-input" };
        ApiError::new(r.status(), class, r.body_text())
    })
}

fn check_size(state: &AppState, text: &str) -> Result<(), ApiError> {
    if text.len() > state.max_input_bytes {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "too-large",
            format!("input is {} bytes, limit is {}", text.len(), state.max_input_bytes),
        ));
    }
    Ok(())
}

async fn run_blocking(state: Arc<AppState>, text: String, keep: KeepSettings) -> Result<CompressedPrompt, ApiError> {
    tokio::task::spawn_blocking(move || state.compress(text, &keep))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn compress_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<CompressResponse>, ApiError> {
    let body = body_bytes(body)?;
    let req: CompressRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid-input", format!("malformed request: {e}")))?;
    let (text, keep) = req.split();
    check_size(&state, &text)?;
    let out = run_blocking(state, text, keep).await?;
    Ok(Json(out.into()))
}

async fn completions_handler(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let body = body_bytes(body)?;
    let bad = |msg: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid-input", msg);
    let mut request: Value = serde_json::from_slice(&body).map_err(|e| bad(format!("malformed request: {e}")))?;
    let object = request.as_object_mut().ok_or_else(|| bad("request must be a JSON object".into()))?;
    let keep: KeepSettings = match object.remove("compression") {
        Some(v) => serde_json::from_value(v).map_err(|e| bad(format!("bad `compression` field: {e}")))?,
        None => KeepSettings::default(),
    };
    let prompt = match object.get("prompt") {
        Some(Value::String(p)) => p.clone(),
        _ => return Err(bad("`prompt` must be a string".into())),
    };
    check_size(&state, &prompt)?;

    let out = run_blocking(Arc::clone(&state), prompt, keep).await?;
    object.insert("prompt".into(), Value::String(out.text));
    let upstream = state.upstream.as_ref().expect("route exists only with an upstream");
    let resp = upstream.client.post(&upstream.url).json(&request).send().await.map_err(|e| {
        ApiError::new(StatusCode::BAD_GATEWAY, "upstream", format!("upstream {} unreachable: {e}", upstream.url))
    })?;

    let status = StatusCode::from_u16(resp.status().as_u16()).unwrap_or(StatusCode::BAD_GATEWAY);
    let content_type = resp.headers().get(reqwest::header::CONTENT_TYPE).cloned();
    let mut response = Response::new(Body::from_stream(resp.bytes_stream()));
    *response.status_mut() = status;
    let headers = response.headers_mut();
    if let Some(ct) = content_type.and_then(|v| HeaderValue::from_bytes(v.as_bytes()).ok()) {
        headers.insert(header::CONTENT_TYPE, ct);
    }
    headers.insert("x-xfam-keep-rate", HeaderValue::from_str(&format!("{:.6}", out.achieved_keep_rate)).expect("ascii"));
    headers.insert("x-xfam-token-count", HeaderValue::from(out.stats.compressed_target_tokens));
    Ok(response)
}

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
