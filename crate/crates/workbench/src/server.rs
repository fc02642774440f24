//! HTTP/JSON front end. Every handler parses its input, calls into
//! [`crate::api`] and serializes the result; nothing else happens here.

use std::net::SocketAddr;
use std::path::PathBuf;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::api::{self, AnalysisParams, ApiError, Context};

type Pairs = Query<Vec<(String, String)>>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        (status, Json(self.to_json())).into_response()
    }
}

fn ok(body: impl Serialize) -> Response {
    match serde_json::to_value(body) {
        Ok(v) => Json(v).into_response(),
        Err(e) => ApiError::Internal(e.to_string()).into_response(),
    }
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
}

fn pairs(q: &[(String, String)]) -> impl Iterator<Item = (&str, &str)> {
    q.iter().map(|(k, v)| (k.as_str(), v.as_str()))
}

async fn list_architectures(State(ctx): State<Context>) -> Response {
    match blocking(move || api::list_architectures(&ctx)).await {
        Ok(list) => ok(list),
        Err(e) => e.into_response(),
    }
}

async fn save_architecture(State(ctx): State<Context>, body: Bytes) -> Response {
    let result = blocking(move || {
        let doc: Value = api::parse_body(&body)?;
        api::save_architecture(&ctx, doc)
    })
    .await;
    match result {
        Ok(saved) => {
            let status = if saved.changed {
                StatusCode::CREATED
            } else {
                StatusCode::OK
            };
            (status, Json(saved)).into_response()
        }
        Err(e) => e.into_response(),
    }
}

async fn architecture(State(ctx): State<Context>, Path(name): Path<String>) -> Response {
    match blocking(move || api::architecture_document(&ctx, &name)).await {
        Ok(doc) => ok(doc),
        Err(e) => e.into_response(),
    }
}

async fn analysis(
    State(ctx): State<Context>,
    Path(name): Path<String>,
    Query(q): Pairs,
) -> Response {
    let result = blocking(move || {
        let params = AnalysisParams::from_pairs(pairs(&q))?;
        let entry = ctx.entry(&name)?;
        api::analysis(&entry, &params)
    })
    .await;
    match result {
        Ok(r) => ok(r),
        Err(e) => e.into_response(),
    }
}

async fn diff(State(ctx): State<Context>, body: Bytes) -> Response {
    match blocking(move || api::diff(&ctx, &api::parse_body(&body)?)).await {
        Ok(r) => ok(r),
        Err(e) => e.into_response(),
    }
}

async fn sweep(State(ctx): State<Context>, body: Bytes) -> Response {
    match blocking(move || api::run_sweep(&ctx, &api::parse_body(&body)?)).await {
        Ok(r) => ok(r),
        Err(e) => e.into_response(),
    }
}

async fn scale(State(ctx): State<Context>, body: Bytes) -> Response {
    match blocking(move || api::scale(&ctx, &api::parse_body(&body)?)).await {
        Ok(r) => ok(r),
        Err(e) => e.into_response(),
    }
}

async fn count_space(Query(q): Pairs) -> Response {
    match api::count_params(pairs(&q)) {
        Ok((slots, options)) => ok(api::count_space(slots, options)),
        Err(e) => e.into_response(),
    }
}

async fn workspace_entries(State(ctx): State<Context>) -> Response {
    let result = blocking(move || match &ctx.workspace {
        Some(ws) => Ok(ws.list(None)?),
        None => Ok(Vec::new()),
    })
    .await;
    match result {
        Ok(entries) => ok(serde_json::json!({ "entries": entries })),
        Err(e) => e.into_response(),
    }
}

async fn api_not_found() -> Response {
    ApiError::NotFound("no such endpoint".into()).into_response()
}

pub fn router(ctx: Context) -> Router {
    Router::new()
        .route(
            "/api/architectures",
            get(list_architectures).post(save_architecture),
        )
        .route("/api/architectures/:name", get(architecture))
        .route("/api/architectures/:name/analysis", get(analysis))
        .route("/api/diff", post(diff))
        .route("/api/sweep", post(sweep))
        .route("/api/scale", post(scale))
        .route("/api/count-space", get(count_space))
        .route("/api/workspace", get(workspace_entries))
        .route("/api/*rest", get(api_not_found).post(api_not_found))
        .with_state(ctx)
}

/// Serves the API, plus static files from `ui_dir` at `/` when given.
pub async fn serve(addr: SocketAddr, ctx: Context, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let mut app = router(ctx);
    if let Some(dir) = ui_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
