//! Read-only HTTP API over a data directory of corpora and evaluation runs.
//!
//! ```text
//! GET /corpora
//! GET /search?corpus=biosample-lung&condition=cedar&q=tissue:lung&limit=50&offset=0
//! GET /records/{corpus}/{id}?conditions=baseline,cedar
//! GET /reports/latest
//! ```

mod state;
mod views;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use fairmeta_core::record::{Condition, RecordId};
use fairmeta_core::search::parse_query;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;
use tower_http::set_header::SetResponseHeaderLayer;

pub use state::{AppState, LoadError};
pub use views::{paired_view, FieldDiff, PairedRecordView, RecordVersion};

pub const CORPUS_HASH_HEADER: &str = "x-corpus-hash";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type Shared = Arc<AppState>;

#[derive(Serialize)]
struct CorpusListing<'a> {
    name: &'a str,
    source: fairmeta_core::record::Source,
    cohort: fairmeta_core::record::Cohort,
    conditions: Vec<Condition>,
    record_count: usize,
}

async fn list_corpora(State(state): State<Shared>) -> Response {
    let listing: Vec<CorpusListing> = state
        .corpora
        .values()
        .map(|g| CorpusListing {
            name: &g.name,
            source: g.source,
            cohort: g.cohort,
            conditions: g.versions.keys().copied().collect(),
            record_count: g.versions.values().map(|v| v.corpus.len()).max().unwrap_or(0),
        })
        .collect();
    Json(listing).into_response()
}

fn parse_condition(text: &str) -> Result<Condition, ApiError> {
    text.parse()
        .map_err(|_| ApiError::bad_request(format!("unknown condition `{text}`")))
}

#[derive(Deserialize)]
struct SearchParams {
    corpus: String,
    #[serde(default)]
    condition: Option<String>,
    q: String,
    #[serde(default)]
    limit: Option<usize>,
    #[serde(default)]
    offset: Option<usize>,
}

#[derive(Serialize)]
struct Hit<'a> {
    id: &'a RecordId,
    tissue: Option<&'a str>,
    gold_label: fairmeta_core::labeler::TissueLabel,
}

#[derive(Serialize)]
struct SearchResponse<'a> {
    query: &'a fairmeta_core::search::SearchQuery,
    corpus: &'a str,
    condition: Condition,
    total: usize,
    offset: usize,
    limit: usize,
    retrieved_ids: &'a [RecordId],
    hits: Vec<Hit<'a>>,
}

const DEFAULT_LIMIT: usize = 100;

async fn search(State(state): State<Shared>, Query(params): Query<SearchParams>) -> Result<Response, ApiError> {
    let query = parse_query(&params.q).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let condition = match &params.condition {
        Some(c) => parse_condition(c)?,
        None => Condition::Baseline,
    };
    let group = state
        .corpora
        .get(&params.corpus)
        .ok_or_else(|| ApiError::not_found(format!("unknown corpus `{}`", params.corpus)))?;
    let version = group.versions.get(&condition).ok_or_else(|| {
        ApiError::not_found(format!("corpus `{}` has no {condition} version", params.corpus))
    })?;
    let result = version.index.execute(&query);
    let offset = params.offset.unwrap_or(0);
    let limit = params.limit.unwrap_or(DEFAULT_LIMIT);
    let hits = result
        .retrieved_ids
        .iter()
        .skip(offset)
        .take(limit)
        .map(|id| Hit {
            id,
            tissue: version
                .corpus
                .get(id)
                .and_then(|r| r.lookup("tissue"))
                .and_then(|v| v.text()),
            gold_label: group.gold_label(&version.corpus, id),
        })
        .collect();
    let body = SearchResponse {
        query: &query,
        corpus: &group.name,
        condition,
        total: result.retrieved_ids.len(),
        offset,
        limit,
        retrieved_ids: &result.retrieved_ids,
        hits,
    };
    Ok(with_hash(Json(body).into_response(), &version.content_hash))
}

fn with_hash(mut response: Response, hash: &str) -> Response {
    if let Ok(value) = HeaderValue::from_str(hash) {
        response
            .headers_mut()
            .insert(HeaderName::from_static(CORPUS_HASH_HEADER), value);
    }
    response
}

#[derive(Deserialize)]
struct RecordParams {
    #[serde(default)]
    conditions: Option<String>,
}

async fn record_view(
    State(state): State<Shared>,
    UrlPath((corpus, id)): UrlPath<(String, String)>,
    Query(params): Query<RecordParams>,
) -> Result<Response, ApiError> {
    let group = state
        .corpora
        .get(&corpus)
        .ok_or_else(|| ApiError::not_found(format!("unknown corpus `{corpus}`")))?;
    let conditions: Vec<Condition> = match params.conditions.as_deref().map(str::trim) {
        None | Some("") => group.versions.keys().copied().collect(),
        Some(list) => list
            .split(',')
            .map(|c| parse_condition(c.trim()))
            .collect::<Result<_, _>>()?,
    };
    let id = RecordId::new(id);
    let mut versions = Vec::with_capacity(conditions.len());
    let mut hashes = Vec::with_capacity(conditions.len());
    for condition in &conditions {
        let version = group.versions.get(condition).ok_or_else(|| {
            ApiError::not_found(format!("corpus `{corpus}` has no {condition} version"))
        })?;
        let record = version.corpus.get(&id).ok_or_else(|| {
            ApiError::not_found(format!("record `{}` not in {condition} version of `{corpus}`", id.as_str()))
        })?;
        versions.push((*condition, record));
        hashes.push(format!("{condition}={}", version.content_hash));
    }
    let view = paired_view(&id, group.source, &versions);
    Ok(with_hash(Json(view).into_response(), &hashes.join(",")))
}

async fn latest_report(State(state): State<Shared>) -> Result<Response, ApiError> {
    let report = state
        .latest_report
        .as_ref()
        .ok_or_else(|| ApiError::not_found("no evaluation runs stored"))?;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        report.body.clone(),
    )
        .into_response())
}

/// Routes over already-loaded state. `ui_dir`, when given, is served under `/ui`.
pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let mut app = Router::new()
        .route("/corpora", get(list_corpora))
        .route("/search", get(search))
        .route("/records/{corpus}/{id}", get(record_view))
        .route("/reports/latest", get(latest_report))
        .with_state(Arc::new(state));
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.layer(SetResponseHeaderLayer::overriding(
        header::CACHE_CONTROL,
        HeaderValue::from_static("no-store"),
    ))
    .layer(CorsLayer::permissive())
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub data_dir: PathBuf,
    pub listen: SocketAddr,
    pub ui_dir: Option<PathBuf>,
}

/// Loads the data directory and serves until interrupted.
pub async fn serve(options: ServeOptions) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = AppState::load(&options.data_dir)?;
    tracing::info!(corpora = state.corpora.len(), report = state.latest_report.is_some(), "data loaded");
    let app = router(state, options.ui_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(options.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
