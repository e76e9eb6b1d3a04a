//! Session-oriented HTTP/JSON service over the hyperslice engine.
//!
//! Each session owns one ensemble and a chain of cached stages. Mutating
//! requests take the session's write lock, so they are applied in arrival
//! order; reads share the lock and never observe a half-applied mutation.
//! A read whose upstream stage is missing answers 409.

pub mod error;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower_http::cors::CorsLayer;

use hyperslice_core::clustering::{
    assign_colors, hierarchical_cluster, prune, prune_to_count, select_subtree, Linkage, Palette,
};
use hyperslice_core::embedding::{barycenters, parameter_embedding, similarity_embedding, temporal_evolution};
use hyperslice_core::ensemble::synthetic::generate_synthetic;
use hyperslice_core::ensemble::{encode_field, load_ensemble, normalize_fields, Ensemble};
use hyperslice_core::partition::{
    correlation_ranking, train_svm_on, FocusPoint, Partition, SvmConfig, DEFAULT_RESOLUTION,
};
use hyperslice_core::similarity::{compute_run_matrix, compute_timestep_matrix, ShiftOptions};

pub use error::{ApiError, ApiResult};
use session::{
    AssignmentStage, Cut, PartitionStage, RunParams, RunStage, SamplingParams, Session, Stage, TreeStage,
};

/// Source name that selects the built-in synthetic ensemble.
pub const SYNTHETIC: &str = "synthetic";

type SessionRef = Arc<RwLock<Session>>;

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, SessionRef>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;

pub fn router() -> Router {
    router_with_state(Arc::new(AppState::default()))
}

pub fn router_with_state(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/distances", post(post_distances))
        .route("/sessions/{id}/jobs/{job}", get(get_job))
        .route("/sessions/{id}/cluster", post(post_cluster))
        .route("/sessions/{id}/embeddings/{kind}", get(get_embedding))
        .route("/sessions/{id}/partition", post(post_partition))
        .route("/sessions/{id}/slice", get(get_slice))
        .route("/sessions/{id}/projection", post(post_projection))
        .route("/sessions/{id}/correlations", get(get_correlations))
        .route("/sessions/{id}/runs/{name}/fields/{t}", get(get_field))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let bytes: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

async fn session(state: &AppState, id: &str) -> ApiResult<SessionRef> {
    state
        .sessions
        .read()
        .await
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {id:?}")))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> ApiResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ApiError::BadRequest(format!("invalid {what} component {s:?}")))
        })
        .collect()
}

fn parse_interval(text: &str) -> ApiResult<(f64, f64)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| ApiError::BadRequest(format!("interval {text:?} must be T0:T1")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| ApiError::BadRequest(format!("invalid interval bound {s:?}")))
    };
    check_interval((parse(a)?, parse(b)?))
}

fn check_interval((t0, t1): (f64, f64)) -> ApiResult<(f64, f64)> {
    if t0.is_finite() && t1.is_finite() && t0 <= t1 {
        Ok((t0, t1))
    } else {
        Err(ApiError::BadRequest(format!("interval [{t0}, {t1}] is empty or not finite")))
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CreateSession {
    /// Manifest path, or `synthetic`.
    source: String,
    #[serde(default = "default_synthetic_seed")]
    synthetic_seed: u64,
}

fn default_synthetic_seed() -> u64 {
    1
}

fn ensemble_summary(e: &Ensemble) -> Value {
    let runs: Vec<Value> = e
        .runs()
        .iter()
        .map(|r| json!({ "name": r.name, "parameters": r.parameters, "times": r.times() }))
        .collect();
    json!({
        "runCount": e.runs().len(),
        "parameterNames": e.parameter_names(),
        "parameterRanges": e.parameter_ranges(),
        "fieldDims": e.field_dims(),
        "runs": runs,
    })
}

async fn create_session(State(state): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let req: CreateSession = body(&bytes)?;
    let ensemble = if req.source == SYNTHETIC {
        generate_synthetic(req.synthetic_seed).ensemble
    } else {
        let path = Path::new(&req.source);
        if !path.is_file() {
            return Err(ApiError::BadRequest(format!("manifest {:?} does not exist", req.source)));
        }
        load_ensemble(path)?
    };
    let ensemble = normalize_fields(ensemble);
    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::SeqCst) + 1);
    let mut summary = ensemble_summary(&ensemble);
    summary["id"] = json!(id);
    let s = Session::new(id.clone(), ensemble);
    state.sessions.write().await.insert(id, Arc::new(RwLock::new(s)));
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

fn state_json(s: &Session) -> Value {
    let mut v = ensemble_summary(&s.ensemble);
    v["id"] = json!(s.id);
    v["timestep"] = s
        .timestep
        .as_ref()
        .map_or(Value::Null, |t| json!({ "params": t.params, "rows": t.matrix.matrix().len() }));
    v["activeJob"] = s.active_job.map_or(Value::Null, |(j, _, _)| json!(j));
    v["runMatrix"] = s.run_matrix.as_ref().map_or(Value::Null, |r| json!({ "params": r.params }));
    v["tree"] = s.tree.as_ref().map_or(Value::Null, |t| json!({ "linkage": t.linkage }));
    v["assignment"] = s.assignment.as_ref().map_or(Value::Null, |a| {
        json!({ "cut": a.cut, "clusterCount": a.assignment.cluster_count, "pruningHeight": a.assignment.pruning_height })
    });
    v["partition"] = s.partition.as_ref().map_or(Value::Null, |p| {
        json!({
            "config": p.config,
            "parameterNames": p.partition.parameter_names,
            "resolution": p.partition.grid.shape.resolution(),
        })
    });
    v["expression"] = json!(s.expression);
    v
}

async fn get_state(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id).await?;
    let s = s.read().await;
    Ok(Json(state_json(&s)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ShiftRequest {
    tau_max: f64,
    tau_step: f64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DistancesRequest {
    #[serde(default = "default_seed_count")]
    seed_count: usize,
    #[serde(default)]
    rng_seed: u64,
    #[serde(default)]
    interval: Option<(f64, f64)>,
    #[serde(default)]
    shift: Option<ShiftRequest>,
}

fn default_seed_count() -> usize {
    1024
}

/// Recomputes the run matrix synchronously when the cached timestep matrix
/// matches; otherwise starts a background job for the timestep matrix.
async fn post_distances(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: DistancesRequest = body(&bytes)?;
    if req.seed_count == 0 {
        return Err(ApiError::BadRequest("seedCount must be positive".into()));
    }
    let sampling = SamplingParams {
        seed_count: req.seed_count,
        rng_seed: req.rng_seed,
    };
    let run = RunParams {
        interval: req.interval.map(check_interval).transpose()?,
        shift: req
            .shift
            .map(|s| ShiftOptions::new(s.tau_max, s.tau_step))
            .transpose()?,
    };
    let handle = session(&state, &id).await?;
    let mut s = handle.write().await;
    if let Some(ts) = s.timestep.as_ref().filter(|t| t.params == sampling) {
        let dt = ts.matrix.clone();
        let dr = compute_run_matrix(&dt, run.interval, run.shift.as_ref())?;
        s.invalidate(Stage::RunMatrix);
        s.run_matrix = Some(RunStage { params: run, matrix: dr });
        return Ok((StatusCode::OK, Json(json!({ "status": "done", "job": Value::Null }))).into_response());
    }
    let job = s.start_job(sampling, run);
    let ensemble = s.ensemble.clone();
    drop(s);
    let task_handle = handle.clone();
    tokio::spawn(async move {
        let result = tokio::task::spawn_blocking(move || {
            let dt = compute_timestep_matrix(&ensemble, sampling.seed_count, sampling.rng_seed)?;
            let dr = compute_run_matrix(&dt, run.interval, run.shift.as_ref())?;
            Ok::<_, hyperslice_core::Error>((dt, dr))
        })
        .await;
        let result = match result {
            Ok(Ok(v)) => Ok(v),
            Ok(Err(e)) => Err(e.to_string()),
            Err(e) => Err(format!("job panicked: {e}")),
        };
        task_handle.write().await.finish_job(job, result);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "status": "running", "job": job }))).into_response())
}

async fn get_job(
    State(state): State<Shared>,
    UrlPath((id, job)): UrlPath<(String, u64)>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id).await?;
    let s = s.read().await;
    let status = s
        .jobs
        .get(&job)
        .ok_or_else(|| ApiError::NotFound(format!("unknown job {job}")))?;
    let mut v = serde_json::to_value(status).expect("status serializes");
    v["job"] = json!(job);
    Ok(Json(v))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SubtreeRequest {
    node: usize,
    height: f64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ClusterRequest {
    linkage: String,
    #[serde(default)]
    pruning_height: Option<f64>,
    #[serde(default)]
    cluster_count: Option<usize>,
    #[serde(default)]
    subtree: Option<SubtreeRequest>,
    #[serde(default)]
    palette: Option<Palette>,
}

fn cluster_json(s: &Session) -> Value {
    let t = s.tree.as_ref().expect("tree present");
    let a = s.assignment.as_ref().expect("assignment present");
    let hex: Vec<&str> = (0..a.assignment.cluster_count as u32).map(|c| a.colors.hex(c)).collect();
    json!({
        "tree": t.tree,
        "cut": a.cut,
        "assignment": a.assignment,
        "colors": a.colors,
        "clusterColors": hex,
    })
}

async fn post_cluster(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> ApiResult<Json<Value>> {
    let req: ClusterRequest = body(&bytes)?;
    let linkage: Linkage = req
        .linkage
        .parse()
        .map_err(|_| ApiError::BadRequest(format!("unknown linkage {:?}", req.linkage)))?;
    let cut = match (req.pruning_height, req.cluster_count, req.subtree) {
        (Some(h), None, None) => Cut::Height { height: h },
        (None, Some(k), None) => Cut::Count { count: k },
        (None, None, Some(st)) => Cut::Subtree {
            node: st.node,
            height: st.height,
        },
        _ => {
            return Err(ApiError::BadRequest(
                "give exactly one of pruningHeight, clusterCount or subtree".into(),
            ))
        }
    };
    let palette = req.palette.unwrap_or_default();
    let handle = session(&state, &id).await?;
    let mut s = handle.write().await;
    let dr = &s.run_matrix.as_ref().ok_or_else(|| ApiError::stale("run matrix"))?.matrix;
    let tree = match s.tree.as_ref().filter(|t| t.linkage == linkage) {
        Some(t) => t.tree.clone(),
        None => hierarchical_cluster(dr, linkage)?,
    };
    let previous = s
        .assignment
        .as_ref()
        .filter(|_| s.tree.as_ref().is_some_and(|t| t.linkage == linkage))
        .map(|a| (a.assignment.clone(), a.colors.clone()));
    let prev = previous.as_ref().map(|(a, c)| (a, c));
    let (assignment, colors) = match cut {
        Cut::Height { height } => {
            let a = prune(&tree, height)?;
            let c = assign_colors(&tree, &a, palette, prev);
            (a, c)
        }
        Cut::Count { count } => {
            let a = prune_to_count(&tree, count)?;
            let c = assign_colors(&tree, &a, palette, prev);
            (a, c)
        }
        Cut::Subtree { node, height } => select_subtree(&tree, node, height, palette, prev)?,
    };
    if s.tree.as_ref().is_none_or(|t| t.linkage != linkage) {
        s.invalidate(Stage::Tree);
        s.tree = Some(TreeStage { linkage, tree });
    } else {
        s.invalidate(Stage::Assignment);
    }
    s.assignment = Some(AssignmentStage {
        cut,
        assignment,
        colors,
    });
    Ok(Json(cluster_json(&s)))
}

async fn get_embedding(
    State(state): State<Shared>,
    UrlPath((id, kind)): UrlPath<(String, String)>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let dim = q
        .get("dim")
        .map(|d| d.parse::<usize>().map_err(|_| ApiError::BadRequest(format!("invalid dim {d:?}"))))
        .transpose()?;
    let s = session(&state, &id).await?;
    let s = s.read().await;
    let with_barycenters = |emb: hyperslice_core::embedding::Embedding| -> ApiResult<Value> {
        let b = match &s.assignment {
            Some(a) => json!(barycenters(&emb, &a.assignment)?),
            None => Value::Null,
        };
        Ok(json!({ "embedding": emb, "barycenters": b }))
    };
    let v = match kind.as_str() {
        "similarity" => {
            if dim.is_some_and(|d| d != 2) {
                return Err(ApiError::BadRequest("the similarity embedding is 2D".into()));
            }
            let dr = &s.run_matrix.as_ref().ok_or_else(|| ApiError::stale("run matrix"))?.matrix;
            with_barycenters(similarity_embedding(dr)?)?
        }
        "parameters" => {
            if dim.is_some_and(|d| d != 2) {
                return Err(ApiError::BadRequest("the parameter embedding is 2D".into()));
            }
            with_barycenters(parameter_embedding(&s.ensemble)?)?
        }
        "temporal" => {
            let interval = q.get("interval").map(|t| parse_interval(t)).transpose()?;
            let dt = &s.timestep.as_ref().ok_or_else(|| ApiError::stale("timestep matrix"))?.matrix;
            json!(temporal_evolution(dt, dim.unwrap_or(1), interval)?)
        }
        other => return Err(ApiError::NotFound(format!("unknown embedding {other:?}"))),
    };
    Ok(Json(v))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PartitionRequest {
    #[serde(default, rename = "C")]
    c: Option<f64>,
    #[serde(default)]
    gamma: Option<f64>,
    #[serde(default)]
    resolution: Option<Resolution>,
    #[serde(default)]
    selected_parameters: Option<Vec<String>>,
}

fn partition_json(p: &PartitionStage) -> Value {
    json!({
        "config": p.config,
        "parameterNames": p.partition.parameter_names,
        "ranges": p.partition.ranges,
        "resolution": p.partition.grid.shape.resolution(),
        "classes": p.model.classes,
        "classColors": p.partition.class_colors,
        "trainingMisclassifications": p.model.training_misclassifications,
        "focus": p.partition.center_focus(),
    })
}

async fn post_partition(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> ApiResult<Json<Value>> {
    let req: PartitionRequest = body(&bytes)?;
    let handle = session(&state, &id).await?;
    let mut s = handle.write().await;
    let a = s.assignment.as_ref().ok_or_else(|| ApiError::stale("cluster assignment"))?;
    let names = s.ensemble.parameter_names();
    let axes: Vec<usize> = match &req.selected_parameters {
        None => (0..names.len()).collect(),
        Some(sel) => sel
            .iter()
            .map(|n| {
                s.ensemble
                    .parameter_index(n)
                    .ok_or_else(|| ApiError::BadRequest(format!("unknown parameter {n:?}")))
            })
            .collect::<ApiResult<_>>()?,
    };
    let defaults = SvmConfig::default_for(axes.len());
    let config = SvmConfig {
        c: req.c.unwrap_or(defaults.c),
        gamma: req.gamma.unwrap_or(defaults.gamma),
    };
    let resolution = match req.resolution {
        None => vec![DEFAULT_RESOLUTION; axes.len()],
        Some(Resolution::Uniform(r)) => vec![r; axes.len()],
        Some(Resolution::PerAxis(r)) => r,
    };
    if resolution.len() != axes.len() {
        return Err(ApiError::BadRequest(format!(
            "resolution has {} entries for {} parameters",
            resolution.len(),
            axes.len()
        )));
    }
    let model = train_svm_on(&s.ensemble, &a.assignment, config, &axes)?;
    let partition = Partition::build(&s.ensemble, &a.assignment, Some(&a.colors), &model, &resolution)?;
    s.invalidate(Stage::Partition);
    let stage = PartitionStage {
        config,
        model,
        partition,
    };
    let v = partition_json(&stage);
    s.partition = Some(stage);
    Ok(Json(v))
}

/// Axis given by index or by parameter name.
fn resolve_axis(p: &Partition, token: &str) -> ApiResult<usize> {
    let token = token.trim();
    if let Ok(i) = token.parse::<usize>() {
        return if i < p.dim() {
            Ok(i)
        } else {
            Err(ApiError::BadRequest(format!("axis {i} out of range")))
        };
    }
    p.axis_index(token)
        .ok_or_else(|| ApiError::BadRequest(format!("unknown axis {token:?}")))
}

fn resolve_axes(p: &Partition, tokens: &[String]) -> ApiResult<(usize, usize)> {
    match tokens {
        [a, b] => Ok((resolve_axis(p, a)?, resolve_axis(p, b)?)),
        _ => Err(ApiError::BadRequest("axes must name exactly two parameters".into())),
    }
}

fn resolve_focus(p: &Partition, focus: Option<Vec<f64>>) -> FocusPoint {
    focus.map_or_else(|| p.center_focus(), FocusPoint)
}

async fn get_slice(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<BTreeMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id).await?;
    let s = s.read().await;
    let p = &s.partition.as_ref().ok_or_else(|| ApiError::stale("partition"))?.partition;
    let axes_tokens: Vec<String> = q.get("axes").map_or_else(|| vec!["0".into(), "1".into()], |a| {
        a.split(',').map(str::to_string).collect()
    });
    let axes = resolve_axes(p, &axes_tokens)?;
    let focus = q.get("focus").map(|f| parse_list::<f64>(f, "focus")).transpose()?;
    let epsilon = q
        .get("epsilon")
        .map(|e| e.parse::<f64>().map_err(|_| ApiError::BadRequest(format!("invalid epsilon {e:?}"))))
        .transpose()?;
    let slice = p.slice(&resolve_focus(p, focus), axes, epsilon)?;
    Ok(Json(json!(slice)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AxisToken {
    Index(usize),
    Name(String),
}

impl AxisToken {
    fn text(&self) -> String {
        match self {
            AxisToken::Index(i) => i.to_string(),
            AxisToken::Name(n) => n.clone(),
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ProjectionRequest {
    segment: u32,
    expression: String,
    #[serde(default)]
    axes: Option<Vec<AxisToken>>,
    #[serde(default)]
    focus: Option<Vec<f64>>,
}

async fn post_projection(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> ApiResult<Json<Value>> {
    let req: ProjectionRequest = body(&bytes)?;
    let handle = session(&state, &id).await?;
    let mut s = handle.write().await;
    let p = &s.partition.as_ref().ok_or_else(|| ApiError::stale("partition"))?.partition;
    let tokens: Vec<String> = req
        .axes
        .map_or_else(|| vec!["0".into(), "1".into()], |a| a.iter().map(AxisToken::text).collect());
    let axes = resolve_axes(p, &tokens)?;
    let mask = p.projection(req.segment, &req.expression, &resolve_focus(p, req.focus), axes)?;
    s.expression = Some(req.expression.clone());
    Ok(Json(json!({ "segment": req.segment, "expression": req.expression, "axes": axes, "mask": mask })))
}

async fn get_correlations(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id).await?;
    let s = s.read().await;
    let dr = &s.run_matrix.as_ref().ok_or_else(|| ApiError::stale("run matrix"))?.matrix;
    let emb = similarity_embedding(dr)?;
    Ok(Json(json!(correlation_ranking(&s.ensemble, &emb)?)))
}

/// `EFLD` payload of a run's normalized field at timestep index `t`.
async fn get_field(
    State(state): State<Shared>,
    UrlPath((id, name, t)): UrlPath<(String, String, String)>,
) -> ApiResult<Response> {
    let s = session(&state, &id).await?;
    let s = s.read().await;
    let run = s
        .ensemble
        .run_index(&name)
        .map(|i| &s.ensemble.runs()[i])
        .ok_or_else(|| ApiError::NotFound(format!("unknown run {name:?}")))?;
    let k: usize = t
        .parse()
        .map_err(|_| ApiError::BadRequest(format!("timestep index {t:?} is not an integer")))?;
    let step = run
        .timesteps
        .get(k)
        .ok_or_else(|| ApiError::NotFound(format!("run {name:?} has no timestep {k}")))?;
    Ok((
        [(header::CONTENT_TYPE, "application/octet-stream")],
        encode_field(&step.field),
    )
        .into_response())
}
