//! Stateless JSON API over the printability engine.
//!
//! | method | path                                  | body                     |
//! |--------|---------------------------------------|--------------------------|
//! | GET    | `/api/v1/health`                      |                          |
//! | GET    | `/api/v1/critical-values/{technology}`|                          |
//! | POST   | `/api/v1/score`                       | printability config      |
//! | POST   | `/api/v1/fit-c`                       | `{"w": .., "direction": ..}` |
//!
//! Errors come back as `{"status", "code", "message", "path"?}`.

use std::net::SocketAddr;
use std::time::Instant;

use amprint_core::printability::{
    fit_coefficient, overall_printability, CoefficientFit, CriticalValue, Direction, PrintabilityError,
    PrintabilityReport, Technology,
};
use amprint_core::PrintabilityConfig;
use axum::body::Bytes;
use axum::extract::{Path, Request};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub const API_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, path: Option<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.to_string(), message: message.into(), path }
    }

    pub fn status_code(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{} ({}): {}", self.code, p, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

impl std::error::Error for ApiError {}

impl From<PrintabilityError> for ApiError {
    fn from(e: PrintabilityError) -> Self {
        let msg = e.to_string();
        match e {
            PrintabilityError::Invalid { field, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", msg, Some(field))
            }
            PrintabilityError::Unsupported { kind, .. } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unsupported_characteristic", msg, Some(kind.to_string()))
            }
            PrintabilityError::Fit { .. } => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "fit_failed", msg, None),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status_code(), Json(self)).into_response()
    }
}

/// Parses a JSON body: syntax errors map to 400, shape errors to 422 with
/// the offending field path.
pub fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    match serde_path_to_error::deserialize::<_, T>(de) {
        Ok(v) => Ok(v),
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            let path = (path != ".").then_some(path);
            if inner.is_data() {
                Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", inner.to_string(), path))
            } else {
                Err(ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", inner.to_string(), None))
            }
        }
    }
}

/// The scoring entry point shared by the HTTP handler and the CLI.
pub fn score_bytes(bytes: &[u8]) -> Result<PrintabilityReport, ApiError> {
    let config: PrintabilityConfig = parse_json(bytes)?;
    Ok(overall_printability(&config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub w: f64,
    #[serde(default = "decreasing")]
    pub direction: Direction,
}

fn decreasing() -> Direction {
    Direction::Decreasing
}

pub fn fit_bytes(bytes: &[u8]) -> Result<CoefficientFit, ApiError> {
    let req: FitRequest = parse_json(bytes)?;
    if !(req.w > 0.0 && req.w.is_finite()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_config",
            format!("critical value must be positive, got {}", req.w),
            Some("w".into()),
        ));
    }
    Ok(fit_coefficient(req.w, req.direction)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub technology: Technology,
    pub values: Vec<CriticalValue>,
}

pub fn critical_value_table(technology: &str) -> Result<CriticalValueTable, ApiError> {
    let t = Technology::parse(technology).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_technology",
            format!("unknown technology {technology:?} (expected FDM, BJ or MJ)"),
            None,
        )
    })?;
    Ok(CriticalValueTable { technology: t, values: t.critical_values() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub api: String,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into(), api: API_VERSION.into() })
}

async fn critical_values(Path(technology): Path<String>) -> Result<Json<CriticalValueTable>, ApiError> {
    critical_value_table(&technology).map(Json)
}

async fn score(body: Bytes) -> Result<Json<PrintabilityReport>, ApiError> {
    // coefficient fits are CPU-bound on first use
    tokio::task::spawn_blocking(move || score_bytes(&body))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None))?
        .map(Json)
}

async fn fit_c(body: Bytes) -> Result<Json<CoefficientFit>, ApiError> {
    tokio::task::spawn_blocking(move || fit_bytes(&body))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None))?
        .map(Json)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint", None)
}

async fn request_log(req: Request, next: Next) -> Response {
    let (method, uri) = (req.method().clone(), req.uri().path().to_string());
    let start = Instant::now();
    let resp = next.run(req).await;
    log::info!(
        "method={} path={} status={} elapsed_ms={:.3}",
        method,
        uri,
        resp.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    resp
}

pub fn router() -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/critical-values/{technology}", get(critical_values))
        .route("/api/v1/score", post(score))
        .route("/api/v1/fit-c", post(fit_c))
        .fallback(not_found)
        .layer(middleware::from_fn(request_log))
        .layer(CorsLayer::permissive())
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
