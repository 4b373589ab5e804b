//! JSON over HTTP. Errors come back as `{"error": kind, "message": text}`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fnvd_core::lmt::TrainParams;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ServiceError;
use crate::records::{ActionSubmission, FeedbackRequest};
use crate::service::{RecordFilter, Service};

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

pub fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::NoActiveModel => StatusCode::SERVICE_UNAVAILABLE,
        ServiceError::SchemaMismatch(_) | ServiceError::DegenerateExport(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServiceError::DuplicateActionId(_) | ServiceError::DuplicateFlag { .. } => StatusCode::CONFLICT,
        ServiceError::UnknownRecord(_) | ServiceError::UnknownVersion(_) => StatusCode::NOT_FOUND,
        ServiceError::BadFilter(_) | ServiceError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = status_of(&self);
        if status.is_server_error() {
            log::error!("{self}");
        }
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ServiceError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::InvalidRequest(format!("body: {e}")))
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

async fn post_action(State(svc): State<Arc<Service>>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let sub: ActionSubmission = parse_body(&body)?;
    let record = blocking(move || svc.evaluate_action(sub)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn list_records(
    State(svc): State<Arc<Service>>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<crate::service::RecordPage> {
    let filter = RecordFilter::from_query(&query)?;
    Ok(Json(svc.list_records(&filter)?))
}

fn parse_id(raw: &str) -> Result<u64, ServiceError> {
    raw.parse()
        .map_err(|_| ServiceError::InvalidRequest(format!("{raw:?} is not a numeric id")))
}

async fn get_record(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<crate::records::DecisionRecord> {
    Ok(Json(svc.get_record(parse_id(&id)?)?))
}

async fn post_feedback(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<crate::records::DecisionRecord> {
    let id = parse_id(&id)?;
    let req: FeedbackRequest = parse_body(&body)?;
    Ok(Json(blocking(move || svc.flag_feedback(id, req)).await?))
}

async fn metrics(State(svc): State<Arc<Service>>) -> Json<crate::service::ServiceMetrics> {
    Json(svc.metrics())
}

#[derive(Serialize)]
struct VersionBody {
    version: u64,
}

async fn retrain(State(svc): State<Arc<Service>>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let params: TrainParams = if body.iter().all(u8::is_ascii_whitespace) {
        TrainParams::default()
    } else {
        parse_body(&body)?
    };
    let version = blocking(move || svc.retrain(&params)).await?;
    Ok((StatusCode::CREATED, Json(VersionBody { version })))
}

async fn activate(State(svc): State<Arc<Service>>, Path(version): Path<String>) -> ApiResult<VersionBody> {
    let version = parse_id(&version)?;
    let version = blocking(move || svc.activate(version)).await?;
    Ok(Json(VersionBody { version }))
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/actions", post(post_action))
        .route("/records", get(list_records))
        .route("/records/:id", get(get_record))
        .route("/records/:id/feedback", post(post_feedback))
        .route("/metrics", get(metrics))
        .route("/admin/retrain", post(retrain))
        .route("/admin/activate/:version", post(activate))
        .with_state(svc)
}
