//! Resource-oriented JSON API over a [`Service`].

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use indexmap::IndexMap;
use serde::Deserialize;
use serde_json::{json, Value};

use tradeoff_core::definition::{DefinitionError, MetricDef, ObjectiveDef, SliceDef};
use tradeoff_core::service::{Committed, Mutation, Rejection, Service, ServiceError, WorkspaceError};

pub const ACTOR_HEADER: &str = "x-actor";
pub const DEFAULT_ACTOR: &str = "anonymous";

type Shared = Arc<Service>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/workspace", get(workspace))
        .route("/events", get(events))
        .route("/objectives", get(list_objectives))
        .route("/objectives/{name}", get(get_objective).put(put_objective).delete(delete_objective))
        .route("/models", get(list_models))
        .route("/models/{name}", get(get_model).put(put_model))
        .route("/models/{name}/terms/{objective}", put(put_term).delete(delete_term))
        .route("/metrics", get(list_metrics))
        .route("/metrics/{name}", get(get_metric).put(put_metric))
        .route("/slices", get(list_slices))
        .route("/slices/top-moved", get(top_moved))
        .route("/slices/{name}", get(get_slice).put(put_slice))
        .route("/table", get(table))
        .route("/compare", get(compare))
        .route("/snapshot", post(snapshot))
        .with_state(service)
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        ApiError(ServiceError::Workspace(e))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, body) = match &self.0 {
            ServiceError::Telemetry(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "telemetry", "message": message}))
            }
            ServiceError::Workspace(e) => match e {
                WorkspaceError::ValidationFailed(r) => {
                    let mut body = json!({"error": "validation_failed", "message": message});
                    match r {
                        Rejection::Definition(DefinitionError::Parse { error, .. }) => {
                            body["offset"] = json!(error.offset);
                            body["expected"] = json!(error.expected);
                            body["found"] = json!(error.found);
                        }
                        Rejection::Definition(DefinitionError::Invalid(report)) => {
                            body["report"] = json!(report);
                        }
                        Rejection::InUse { models, .. } => body["models"] = json!(models),
                        _ => {}
                    }
                    (StatusCode::UNPROCESSABLE_ENTITY, body)
                }
                WorkspaceError::UnknownEntity { kind, name } => (
                    StatusCode::NOT_FOUND,
                    json!({"error": "unknown_entity", "kind": kind, "name": name, "message": message}),
                ),
                WorkspaceError::UnknownQuery(q) => {
                    (StatusCode::NOT_FOUND, json!({"error": "unknown_query", "query": q, "message": message}))
                }
                WorkspaceError::SchemaMismatch(_) => {
                    (StatusCode::CONFLICT, json!({"error": "schema_mismatch", "message": message}))
                }
                WorkspaceError::DatasetHashMismatch { .. } => {
                    (StatusCode::CONFLICT, json!({"error": "dataset_hash_mismatch", "message": message}))
                }
                WorkspaceError::Metric(_) => {
                    (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "evaluation", "message": message}))
                }
            },
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn actor(headers: &HeaderMap) -> String {
    headers
        .get(ACTOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .unwrap_or(DEFAULT_ACTOR)
        .to_string()
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("API types serialize")
}

fn committed(c: &Committed) -> Value {
    json!({
        "revision": c.state.revision(),
        "events": to_json(&c.events),
        "table": to_json(&c.state.table),
        "warnings": {
            "division_by_zero": c.state.warnings.division_by_zero,
            "log_domain": c.state.warnings.log_domain,
        },
    })
}

/// Runs a mutation off the async executor; recompute is CPU-bound.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.expect("worker thread panicked").map_err(ApiError)
}

fn unknown(kind: &'static str, name: &str) -> ApiError {
    WorkspaceError::UnknownEntity { kind, name: name.to_string() }.into()
}

async fn workspace(State(svc): State<Shared>) -> ApiResult {
    let state = svc.state();
    let snapshot = state.workspace.export_snapshot();
    Ok(Json(json!({
        "revision": state.revision(),
        "baseline": snapshot.baseline,
        "active_model": svc.active_model(),
        "dataset_hash": snapshot.dataset_hash,
        "queries": state.workspace.dataset().groups().len(),
        "rows": state.workspace.dataset().row_count(),
        "objectives": snapshot.objectives,
        "models": snapshot.models,
        "metrics": snapshot.metrics,
        "slices": snapshot.slices,
    })))
}

async fn events(State(svc): State<Shared>) -> ApiResult {
    Ok(Json(to_json(&svc.events())))
}

async fn list_objectives(State(svc): State<Shared>) -> ApiResult {
    let snapshot = svc.export_snapshot();
    Ok(Json(json!({"revision": snapshot.revision, "objectives": snapshot.objectives})))
}

async fn get_objective(State(svc): State<Shared>, Path(name): Path<String>) -> ApiResult {
    let state = svc.state();
    let o = state.workspace.objectives().get(&name).ok_or_else(|| unknown("objective", &name))?;
    Ok(Json(to_json(&ObjectiveDef::from(o))))
}

#[derive(Deserialize)]
struct ObjectiveBody {
    expr: String,
    #[serde(default)]
    description: String,
}

async fn put_objective(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(name): Path<String>,
    Json(body): Json<ObjectiveBody>,
) -> ApiResult {
    let def = ObjectiveDef { name: name.clone(), expr: body.expr, description: body.description };
    let exists = svc.state().workspace.objectives().contains_key(&name);
    let m = if exists { Mutation::EditObjective(def) } else { Mutation::AddObjective(def) };
    let c = blocking(move || svc.mutate(&actor(&headers), m)).await?;
    Ok(Json(committed(&c)))
}

async fn delete_objective(State(svc): State<Shared>, headers: HeaderMap, Path(name): Path<String>) -> ApiResult {
    let c = blocking(move || svc.mutate(&actor(&headers), Mutation::RemoveObjective { name })).await?;
    Ok(Json(committed(&c)))
}

async fn list_models(State(svc): State<Shared>) -> ApiResult {
    let snapshot = svc.export_snapshot();
    Ok(Json(json!({"revision": snapshot.revision, "baseline": snapshot.baseline, "models": snapshot.models})))
}

async fn get_model(State(svc): State<Shared>, Path(name): Path<String>) -> ApiResult {
    let state = svc.state();
    let m = state.workspace.model(&name)?;
    Ok(Json(json!({
        "name": name,
        "terms": m.weights(),
        "tradeoff": state.workspace.tradeoff_key(&name),
        "revision": state.revision(),
    })))
}

#[derive(Deserialize)]
struct ModelBody {
    terms: IndexMap<String, f64>,
}

async fn put_model(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(name): Path<String>,
    Json(body): Json<ModelBody>,
) -> ApiResult {
    let c = blocking(move || svc.put_model(&actor(&headers), &name, &body.terms)).await?;
    Ok(Json(committed(&c)))
}

#[derive(Deserialize)]
struct TermBody {
    weight: f64,
}

async fn put_term(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path((model, objective)): Path<(String, String)>,
    Json(body): Json<TermBody>,
) -> ApiResult {
    let uses = svc.state().workspace.models().get(&model).is_some_and(|m| m.uses(&objective));
    let m = if uses {
        Mutation::SetWeight { model, objective, weight: body.weight }
    } else {
        Mutation::AddTerm { model, objective, weight: body.weight }
    };
    let c = blocking(move || svc.mutate(&actor(&headers), m)).await?;
    Ok(Json(committed(&c)))
}

async fn delete_term(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path((model, objective)): Path<(String, String)>,
) -> ApiResult {
    let c = blocking(move || svc.mutate(&actor(&headers), Mutation::RemoveTerm { model, objective })).await?;
    Ok(Json(committed(&c)))
}

async fn list_metrics(State(svc): State<Shared>) -> ApiResult {
    let snapshot = svc.export_snapshot();
    Ok(Json(json!({"revision": snapshot.revision, "metrics": snapshot.metrics})))
}

#[derive(Deserialize)]
struct SliceParam {
    slice: Option<String>,
}

async fn get_metric(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(name): Path<String>,
    Query(q): Query<SliceParam>,
) -> ApiResult {
    let view = svc.view_metric(&actor(&headers), &name, q.slice.as_deref())?;
    let def = svc.state().workspace.metrics().get(&name).map(MetricDef::from);
    let mut body = to_json(&view);
    body["definition"] = to_json(&def);
    Ok(Json(body))
}

/// Inserts the path name into a definition body before decoding it.
fn with_name<T: serde::de::DeserializeOwned>(name: &str, mut body: Value) -> Result<T, Response> {
    if let Value::Object(map) = &mut body {
        map.insert("name".into(), Value::String(name.to_string()));
    }
    serde_json::from_value(body).map_err(|e| {
        (StatusCode::BAD_REQUEST, Json(json!({"error": "bad_request", "message": e.to_string()}))).into_response()
    })
}

async fn put_metric(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(name): Path<String>,
    Json(body): Json<Value>,
) -> Response {
    let def: MetricDef = match with_name(&name, body) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match blocking(move || svc.mutate(&actor(&headers), Mutation::DefineMetric(def))).await {
        Ok(c) => Json(committed(&c)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn list_slices(State(svc): State<Shared>) -> ApiResult {
    let snapshot = svc.export_snapshot();
    Ok(Json(json!({"revision": snapshot.revision, "slices": snapshot.slices})))
}

async fn get_slice(State(svc): State<Shared>, headers: HeaderMap, Path(name): Path<String>) -> ApiResult {
    Ok(Json(to_json(&svc.view_slice(&actor(&headers), &name)?)))
}

async fn put_slice(
    State(svc): State<Shared>,
    headers: HeaderMap,
    Path(name): Path<String>,
    Json(body): Json<Value>,
) -> Response {
    let def: SliceDef = match with_name(&name, body) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match blocking(move || svc.mutate(&actor(&headers), Mutation::DefineSlice(def))).await {
        Ok(c) => Json(committed(&c)).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct TopMovedParams {
    metric: String,
    model: Option<String>,
    limit: Option<usize>,
}

async fn top_moved(State(svc): State<Shared>, Query(q): Query<TopMovedParams>) -> ApiResult {
    let slices = svc.top_moved(&q.metric, q.model.as_deref(), q.limit.unwrap_or(10))?;
    Ok(Json(json!({"revision": svc.state().revision(), "metric": q.metric, "slices": slices})))
}

async fn table(State(svc): State<Shared>, headers: HeaderMap, Query(q): Query<SliceParam>) -> ApiResult {
    let state = svc.view_table(&actor(&headers), q.slice.as_deref())?;
    let mut body = json!({"revision": state.revision(), "table": to_json(&state.table)});
    if let Some(slice) = q.slice {
        body["slice"] = json!(slice);
    }
    Ok(Json(body))
}

#[derive(Deserialize)]
struct CompareParams {
    query: String,
    a: String,
    b: String,
    /// Comma-separated feature columns; all item features when absent.
    columns: Option<String>,
}

async fn compare(State(svc): State<Shared>, headers: HeaderMap, Query(q): Query<CompareParams>) -> ApiResult {
    let columns: Vec<String> = q
        .columns
        .as_deref()
        .map(|c| c.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect())
        .unwrap_or_default();
    let view = blocking(move || svc.side_by_side(&actor(&headers), &q.query, &q.a, &q.b, &columns)).await?;
    Ok(Json(to_json(&view)))
}

async fn snapshot(State(svc): State<Shared>) -> ApiResult {
    Ok(Json(to_json(&svc.export_snapshot())))
}
