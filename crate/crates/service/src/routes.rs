//! HTTP routing. Pipeline work runs on the blocking pool.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::api::{ApiError, QueryRequest, RetrieveRequest, UploadRequest};
use crate::service::Service;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let mut err = ApiError::new(422, "bad_request", "input", e.to_string());
        err.details = Some(json!({"line": e.line(), "column": e.column()}));
        err
    })
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(500, "internal", "input", e.to_string()))?
}

fn reply<T: Serialize>(r: Result<T, ApiError>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn upload(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: UploadRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    reply(blocking(move || svc.upload(req)).await)
}

async fn list(State(svc): State<Arc<Service>>) -> Response {
    Json(json!({"graphs": svc.list()})).into_response()
}

async fn graph(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Response {
    reply(svc.graph_files(&id).map(|(nodes, adjacency)| json!({"nodes": nodes, "adjacency": adjacency})))
}

async fn stats(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Response {
    reply(svc.stats(&id))
}

async fn retrieve(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: RetrieveRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    reply(blocking(move || svc.retrieve(&req)).await)
}

async fn query(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: QueryRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    reply(blocking(move || svc.query(&req)).await)
}

#[derive(Deserialize)]
struct LogParams {
    limit: Option<usize>,
}

async fn logs(State(svc): State<Arc<Service>>, Query(p): Query<LogParams>) -> Response {
    Json(json!({"logs": svc.logs(p.limit)})).into_response()
}

async fn llms(State(svc): State<Arc<Service>>) -> Response {
    Json(json!({"llms": svc.llm_names()})).into_response()
}

async fn metrics(State(svc): State<Arc<Service>>) -> Response {
    (
        [(header::CONTENT_TYPE, "text/plain; version=0.0.4")],
        svc.metrics().render(),
    )
        .into_response()
}

async fn not_found() -> Response {
    ApiError::new(404, "not_found", "input", "no such endpoint").into_response()
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/graphs", post(upload).get(list))
        .route("/v1/graphs/:id", get(graph))
        .route("/v1/graphs/:id/stats", get(stats))
        .route("/v1/retrieve", post(retrieve))
        .route("/v1/query", post(query))
        .route("/v1/logs", get(logs))
        .route("/v1/llms", get(llms))
        .route("/metrics", get(metrics))
        .fallback(not_found)
        .with_state(svc)
}
