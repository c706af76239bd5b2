//! `/api` handlers. Every response is derived from the shared snapshot, so
//! repeated requests return identical bodies.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use txgraph_core::bench::ExperimentReport;
use txgraph_core::graph::TxId;
use txgraph_core::label::Label;

use crate::snapshot::{label_counts, label_name, transfer_matrix, Snapshot};
use crate::LayoutMode;

pub const SEARCH_LIMIT: usize = 100;

type Shared = State<Arc<Snapshot>>;

pub fn api_router(snapshot: Arc<Snapshot>) -> Router {
    Router::new()
        .route("/api/timesteps", get(timesteps))
        .route("/api/slice/{t}", get(slice))
        .route("/api/tx/{tx_id}", get(tx))
        .route("/api/search", get(search))
        .route("/api/stats/{t}", get(stats))
        .route("/api/experiments", get(experiments))
        .route("/api/{*rest}", get(unknown_endpoint))
        .with_state(snapshot)
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn not_found(code: &'static str, message: String) -> Self {
        Self { status: StatusCode::NOT_FOUND, code, message }
    }

    fn bad_request(code: &'static str, message: String) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code, message }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "status": self.status.as_u16(), "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

async fn unknown_endpoint(Path(rest): Path<String>) -> ApiError {
    ApiError::not_found("unknown_endpoint", format!("no endpoint /api/{rest}"))
}

fn parse_step(s: &Snapshot, raw: &str) -> Result<u32, ApiError> {
    let max = s.graph.max_step();
    match raw.parse::<u32>() {
        Ok(t) if (1..=max).contains(&t) => Ok(t),
        _ => Err(ApiError::not_found("unknown_time_step", format!("time step `{raw}` is not in 1..={max}"))),
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Timesteps {
    pub count: u32,
    pub min: u32,
    pub max: u32,
    /// Index `t - 1` holds the node count of step `t`.
    pub node_counts: Vec<usize>,
}

async fn timesteps(State(s): Shared) -> Json<Timesteps> {
    let max = s.graph.max_step();
    Json(Timesteps {
        count: max,
        min: 1,
        max,
        node_counts: (1..=max).map(|t| s.graph.step_nodes(t).len()).collect(),
    })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct NodeView {
    pub tx_id: u64,
    pub x: f64,
    pub y: f64,
    pub label: Label,
    pub predicted: Option<Label>,
    /// Distinct in- and out-neighbours.
    pub degree: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EdgeView {
    pub source: u64,
    pub target: u64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassCounts {
    pub illicit: usize,
    pub licit: usize,
    pub unknown: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct StepStats {
    pub time_step: u32,
    pub nodes: usize,
    pub edges: usize,
    pub counts: ClassCounts,
    /// Predicted illicit and licit counts when a model is active.
    pub predicted: Option<ClassCounts>,
    /// Rows are source classes and columns target classes, both in
    /// `transfer_order`.
    pub transfer: [[usize; 3]; 3],
    pub transfer_order: [String; 3],
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SliceView {
    pub time_step: u32,
    pub layout: LayoutMode,
    pub nodes: Vec<NodeView>,
    pub edges: Vec<EdgeView>,
    pub stats: StepStats,
}

fn neighbour_count(s: &Snapshot, i: usize) -> usize {
    let mut all: Vec<usize> = s.graph.in_neighbors(i).iter().chain(s.graph.out_neighbors(i)).copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len()
}

fn step_stats(s: &Snapshot, t: u32) -> StepStats {
    let nodes = s.graph.step_nodes(t);
    let edges: Vec<(usize, usize)> =
        nodes.iter().flat_map(|&u| s.graph.out_neighbors(u).iter().map(move |&v| (u, v))).collect();
    let [illicit, licit, unknown] = label_counts(&s.graph, nodes);
    let predicted = s.active_model.as_ref().map(|_| {
        let mut c = ClassCounts { illicit: 0, licit: 0, unknown: 0 };
        for &i in nodes {
            match s.predictions[i].map(|p| p.label()) {
                Some(Label::Illicit) => c.illicit += 1,
                Some(_) => c.licit += 1,
                None => c.unknown += 1,
            }
        }
        c
    });
    StepStats {
        time_step: t,
        nodes: nodes.len(),
        edges: edges.len(),
        counts: ClassCounts { illicit, licit, unknown },
        predicted,
        transfer: transfer_matrix(&s.graph, &edges),
        transfer_order: Label::ALL.map(label_name),
    }
}

#[derive(Debug, Deserialize)]
struct SliceQuery {
    layout: Option<String>,
}

async fn slice(State(s): Shared, Path(raw): Path<String>, Query(q): Query<SliceQuery>) -> Result<Json<SliceView>, ApiError> {
    let t = parse_step(&s, &raw)?;
    let mode = match q.layout.as_deref() {
        None => s.default_layout(),
        Some(m) => m.parse::<LayoutMode>().map_err(|e| ApiError::bad_request("unknown_layout", e))?,
    };
    let layout = s
        .layouts
        .get(&mode)
        .ok_or_else(|| ApiError::not_found("layout_unavailable", format!("the {mode} layout was not loaded")))?;
    let g = &s.graph;
    let nodes = g
        .step_nodes(t)
        .iter()
        .map(|&i| NodeView {
            tx_id: g.tx_id(i).0,
            x: layout.coords[i][0],
            y: layout.coords[i][1],
            label: g.label(i),
            predicted: s.predictions[i].map(|c| c.label()),
            degree: neighbour_count(&s, i),
        })
        .collect();
    let edges = g
        .step_nodes(t)
        .iter()
        .flat_map(|&u| g.out_neighbors(u).iter().map(move |&v| EdgeView { source: g.tx_id(u).0, target: g.tx_id(v).0 }))
        .collect();
    Ok(Json(SliceView { time_step: t, layout: mode, nodes, edges, stats: step_stats(&s, t) }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Neighbour {
    pub tx_id: u64,
    pub direction: Direction,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TxDetail {
    pub tx_id: u64,
    pub time_step: u32,
    pub label: Label,
    pub predicted: Option<Label>,
    pub coords: BTreeMap<LayoutMode, [f64; 2]>,
    pub in_degree: usize,
    pub out_degree: usize,
    /// Incoming first, then outgoing, each by ascending id. A node on both
    /// sides appears twice.
    pub neighbors: Vec<Neighbour>,
    pub features: Vec<f64>,
}

async fn tx(State(s): Shared, Path(raw): Path<String>) -> Result<Json<TxDetail>, ApiError> {
    let g = &s.graph;
    let i = raw
        .parse::<u64>()
        .ok()
        .and_then(|id| g.index_of(TxId(id)))
        .ok_or_else(|| ApiError::not_found("unknown_tx", format!("no transaction with id `{raw}`")))?;
    let tagged = |list: &[usize], direction: fn() -> Direction| {
        let mut ids: Vec<u64> = list.iter().map(|&j| g.tx_id(j).0).collect();
        ids.sort_unstable();
        ids.into_iter().map(move |tx_id| Neighbour { tx_id, direction: direction() })
    };
    let neighbors =
        tagged(g.in_neighbors(i), || Direction::In).chain(tagged(g.out_neighbors(i), || Direction::Out)).collect();
    Ok(Json(TxDetail {
        tx_id: g.tx_id(i).0,
        time_step: g.time_step(i),
        label: g.label(i),
        predicted: s.predictions[i].map(|c| c.label()),
        coords: s.layouts.iter().map(|(m, l)| (*m, l.coords[i])).collect(),
        in_degree: g.in_neighbors(i).len(),
        out_degree: g.out_neighbors(i).len(),
        neighbors,
        features: g.features().row(i).to_vec(),
    }))
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    q: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SearchResult {
    pub query: String,
    /// Matching ids in ascending order, at most the first hundred.
    pub matches: Vec<u64>,
    pub total: usize,
    pub truncated: bool,
}

async fn search(State(s): Shared, Query(q): Query<SearchQuery>) -> Json<SearchResult> {
    let query = q.q.unwrap_or_default().trim().to_string();
    let mut all: Vec<u64> = s
        .graph
        .nodes()
        .ids()
        .iter()
        .map(|id| id.0)
        .filter(|id| id.to_string().contains(&query))
        .collect();
    all.sort_unstable();
    let total = all.len();
    all.truncate(SEARCH_LIMIT);
    Json(SearchResult { query, matches: all, total, truncated: total > SEARCH_LIMIT })
}

async fn stats(State(s): Shared, Path(raw): Path<String>) -> Result<Json<StepStats>, ApiError> {
    let t = parse_step(&s, &raw)?;
    Ok(Json(step_stats(&s, t)))
}

async fn experiments(State(s): Shared) -> Json<Vec<ExperimentReport>> {
    Json(s.experiments.clone())
}
