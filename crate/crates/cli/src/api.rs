//! HTTP+JSON front for [`TrialService`].

use std::sync::Arc;

use affectloop::trial::{Rating, TrialReport, TrialService, TrialSession, TrialTurn, Variant};
use affectloop::{Error, UserGoal};
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

#[derive(Debug, Clone, Default)]
pub struct ApiOptions {
    /// Checkpoint used when a create request names none.
    pub default_checkpoint: Option<String>,
    /// Allowed browser origin; `None` allows any.
    pub ui_origin: Option<String>,
    /// Shared trial token expected as `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

#[derive(Clone)]
struct AppState {
    svc: Arc<TrialService>,
    default_checkpoint: String,
    token: Option<String>,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) | Error::Precondition(_) => StatusCode::CONFLICT,
            Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Runs a blocking store call off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> affectloop::Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Conflict(format!("request aborted: {e}"))))?
        .map_err(ApiError)
}

#[derive(Debug, Deserialize)]
struct CreateRequest {
    variant: Variant,
    checkpoint: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub id: String,
    pub variant: Variant,
    pub checkpoint: String,
    pub goal: UserGoal,
    pub goal_text: String,
}

#[derive(Debug, Deserialize)]
struct MessageRequest {
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MessageReply {
    pub turn_index: usize,
    pub system_text: String,
    pub closed: bool,
    pub turn: TrialTurn,
}

#[derive(Debug, Deserialize)]
struct RatingRequest {
    success: bool,
    sentiment: u8,
}

async fn create(State(st): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult<(StatusCode, Json<CreatedSession>)> {
    let checkpoint = req.checkpoint.unwrap_or(st.default_checkpoint);
    let s = blocking(move || st.svc.create_session(req.variant, &checkpoint, req.seed)).await?;
    let body = CreatedSession { id: s.id, variant: s.variant, checkpoint: s.checkpoint, goal: s.goal, goal_text: s.goal_text };
    Ok((StatusCode::CREATED, Json(body)))
}

async fn message(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<MessageRequest>) -> ApiResult<Json<MessageReply>> {
    let (turn, closed) = blocking(move || {
        let turn = st.svc.post_message(&id, &req.text)?;
        Ok((turn, st.svc.session(&id)?.closed))
    })
    .await?;
    Ok(Json(MessageReply { turn_index: turn.index, system_text: turn.system_text.clone(), closed, turn }))
}

async fn rating(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<RatingRequest>) -> ApiResult<Json<Rating>> {
    Ok(Json(blocking(move || st.svc.submit_rating(&id, req.success, req.sentiment)).await?))
}

async fn session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<TrialSession>> {
    Ok(Json(blocking(move || st.svc.session(&id)).await?))
}

async fn report(State(st): State<AppState>) -> ApiResult<Json<TrialReport>> {
    Ok(Json(blocking(move || Ok(st.svc.report())).await?))
}

async fn checkpoints(State(st): State<AppState>) -> Json<Vec<String>> {
    Json(st.svc.checkpoints())
}

async fn require_token(State(st): State<AppState>, req: Request, next: Next) -> Response {
    let Some(token) = &st.token else { return next.run(req).await };
    if req.method() == Method::OPTIONS {
        return next.run(req).await;
    }
    let given = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(token.as_str()) {
        next.run(req).await
    } else {
        (StatusCode::UNAUTHORIZED, Json(serde_json::json!({ "error": "missing or wrong trial token" }))).into_response()
    }
}

pub fn router(svc: Arc<TrialService>, opts: ApiOptions) -> anyhow::Result<Router> {
    let default_checkpoint = opts.default_checkpoint.unwrap_or_else(|| affectloop::trial::EXPERT_CHECKPOINT.to_owned());
    let origin = match &opts.ui_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o)?),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]);
    let state = AppState { svc, default_checkpoint, token: opts.token };
    Ok(Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/messages", post(message))
        .route("/sessions/{id}/rating", post(rating))
        .route("/report", get(report))
        .route("/checkpoints", get(checkpoints))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(cors)
        .with_state(state))
}
