//! Review and metrics API over a prepared workspace snapshot.
//!
//! Label submission is the only mutation: it appends to the label log under
//! the write lock, so readers never see a half-applied label.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query as QueryParams, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::error::{Error, Result};
use crate::metrics::{
    self, Category, CoverageReport, Label, PrecisionEstimate, UtilityBreakdown, DEFAULT_Z,
};
use crate::querygen::Query;
use crate::types::QueryKind;
use crate::workspace::{ReviewItem, Workspace, FORMAT_VERSION};

pub const PAGE_SIZE: usize = 50;

struct Snapshot {
    items: Vec<ReviewItem>,
    sampled: BTreeSet<String>,
    labels: Vec<Label>,
    queries: Vec<Query>,
    coverage: CoverageReport,
    gaps_count: usize,
}

pub struct AppState {
    ws: Workspace,
    snap: RwLock<Snapshot>,
}

/// Loads the sample, labels, queries and answers. Coverage and gaps are
/// fixed for the lifetime of the service.
pub fn load_state(ws: Workspace, theta: f64) -> Result<Arc<AppState>> {
    let items = ws.review_items()?;
    let queries = ws.queries()?;
    let answers = ws.answers()?;
    let snap = Snapshot {
        sampled: items.iter().map(|i| i.query_id.clone()).collect(),
        items,
        labels: ws.labels()?,
        coverage: metrics::coverage(&queries, &answers, theta),
        gaps_count: metrics::gap_report(&queries, &answers, theta).len(),
        queries,
    };
    Ok(Arc::new(AppState {
        ws,
        snap: RwLock::new(snap),
    }))
}

#[derive(Serialize)]
struct Versioned<T: Serialize> {
    version: u32,
    #[serde(flatten)]
    body: T,
}

fn ok<T: Serialize>(body: T) -> Response {
    Json(Versioned {
        version: FORMAT_VERSION,
        body,
    })
    .into_response()
}

fn fail(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(json!({"version": FORMAT_VERSION, "error": message.into()})),
    )
        .into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/review/next", get(next_item))
        .route("/api/review/label", post(submit_label))
        .route("/api/metrics", get(get_metrics))
        .route("/api/queries", get(list_queries))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, port: u16) -> Result<()> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(std::path::Path::new(&addr.to_string()), e))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::io(std::path::Path::new(&addr.to_string()), e))
}

#[derive(Deserialize)]
struct NextParams {
    reviewer: Option<String>,
}

/// First sampled item the reviewer has not labeled yet. The same item is
/// returned until a label for it is submitted.
async fn next_item(State(st): State<Arc<AppState>>, QueryParams(p): QueryParams<NextParams>) -> Response {
    let Some(reviewer) = p.reviewer.filter(|r| !r.trim().is_empty()) else {
        return fail(StatusCode::BAD_REQUEST, "reviewer is required");
    };
    let snap = st.snap.read().await;
    let done: BTreeSet<&str> = snap
        .labels
        .iter()
        .filter(|l| l.reviewer == reviewer)
        .map(|l| l.query_id.as_str())
        .collect();
    let position = snap.items.iter().position(|i| !done.contains(i.query_id.as_str()));
    match position {
        Some(pos) => ok(json!({
            "position": pos,
            "sample_size": snap.items.len(),
            "item": snap.items[pos],
        })),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

#[derive(Deserialize)]
struct LabelRequest {
    query_id: String,
    category: String,
    #[serde(default)]
    answer_correct: Option<bool>,
    reviewer: String,
}

#[derive(Serialize)]
struct Summary {
    precision: Option<PrecisionEstimate>,
    utility_breakdown: UtilityBreakdown,
    disagreements: usize,
}

fn summarize(snap: &Snapshot) -> Summary {
    Summary {
        precision: metrics::precision_with_interval(&snap.labels, DEFAULT_Z).ok(),
        utility_breakdown: metrics::utility_breakdown(&snap.labels),
        disagreements: metrics::rule_disagreements(&snap.labels, &snap.queries),
    }
}

async fn submit_label(State(st): State<Arc<AppState>>, body: axum::body::Bytes) -> Response {
    let req: LabelRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return fail(StatusCode::BAD_REQUEST, format!("malformed label: {e}")),
    };
    let category: Category = match req.category.parse() {
        Ok(c) => c,
        Err(e) => return fail(StatusCode::BAD_REQUEST, e),
    };
    if req.reviewer.trim().is_empty() {
        return fail(StatusCode::BAD_REQUEST, "reviewer is required");
    }
    let mut snap = st.snap.write().await;
    if !snap.sampled.contains(&req.query_id) {
        return fail(
            StatusCode::NOT_FOUND,
            Error::UnknownQuery(req.query_id).to_string(),
        );
    }
    let label = Label {
        query_id: req.query_id,
        category,
        answer_correct: req.answer_correct,
        reviewer: req.reviewer,
        ts: snap.labels.iter().map(|l| l.ts).max().map_or(1, |t| t + 1),
    };
    if let Err(e) = st.ws.append_label(&label) {
        return fail(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    snap.labels.push(label.clone());
    let summary = summarize(&snap);
    ok(json!({
        "label": label,
        "precision": summary.precision,
        "utility_breakdown": summary.utility_breakdown,
        "disagreements": summary.disagreements,
    }))
}

async fn get_metrics(State(st): State<Arc<AppState>>) -> Response {
    let snap = st.snap.read().await;
    let summary = summarize(&snap);
    ok(json!({
        "coverage": snap.coverage,
        "precision": summary.precision,
        "utility_breakdown": summary.utility_breakdown,
        "gaps_count": snap.gaps_count,
        "disagreements": summary.disagreements,
        "labels": metrics::live_labels(&snap.labels).len(),
    }))
}

#[derive(Deserialize)]
struct ListParams {
    state: Option<String>,
    kind: Option<String>,
    page: Option<usize>,
}

async fn list_queries(State(st): State<Arc<AppState>>, QueryParams(p): QueryParams<ListParams>) -> Response {
    let kind: Option<QueryKind> = match p.kind.as_deref().filter(|s| !s.is_empty()).map(str::parse) {
        None => None,
        Some(Ok(k)) => Some(k),
        Some(Err(e)) => return fail(StatusCode::BAD_REQUEST, e),
    };
    let state = p.state.filter(|s| !s.is_empty()).map(|s| s.to_lowercase());
    if let Some(s) = &state {
        if !["generated", "pruned", "answered", "nonsense"].contains(&s.as_str()) {
            return fail(StatusCode::BAD_REQUEST, format!("unknown state `{s}`"));
        }
    }
    let page = p.page.unwrap_or(1).max(1);
    let snap = st.snap.read().await;
    let matching: Vec<&Query> = snap
        .queries
        .iter()
        .filter(|q| kind.is_none_or(|k| q.kind == k))
        .filter(|q| state.as_deref().is_none_or(|s| q.state.name() == s))
        .collect();
    let total = matching.len();
    let rows: Vec<Value> = matching
        .into_iter()
        .skip((page - 1) * PAGE_SIZE)
        .take(PAGE_SIZE)
        .map(|q| json!(q))
        .collect();
    ok(json!({
        "page": page,
        "page_size": PAGE_SIZE,
        "total": total,
        "queries": rows,
    }))
}
