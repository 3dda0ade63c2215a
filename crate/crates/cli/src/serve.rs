//! Interactive label server speaking the `cac/1` HTTP+JSON protocol.
//!
//! The active loop runs on its own thread. Each query publishes a snapshot
//! (under a write lock) and then blocks on a single-consumer channel until a
//! client posts the label for exactly the pending point. HTTP handlers only
//! read snapshots and enqueue answers; they never touch the loop's state.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Query as QueryParams, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cac_core::active::{ActiveState, LabelOracle, LevelRecord, Progress, Query, QueryContext, RunReport, RunStatus};
use cac_core::data::{pca_fit_transform, Label};
use cac_core::{CacError, PointSet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::watch;

use crate::commands::{execute, report_json, write_outputs, CurveRecorder};
use crate::config::{OracleMode, Prepared, RunConfig};
use crate::error::{CliError, Result};

pub const PROTOCOL_VERSION: &str = "cac/1";

const DEFAULT_PAGE: usize = 1000;
const MAX_PAGE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Computing,
    AwaitingLabel,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub n: f64,
    pub theta: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub point_id: usize,
    pub coords: Vec<f64>,
    pub projection_2d: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub point_id: usize,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug)]
struct Snapshot {
    phase: Phase,
    level: Option<LevelInfo>,
    confident_count: usize,
    pending: Option<PendingQuery>,
    predicted: Vec<Option<Label>>,
    confident: Vec<bool>,
    component: Vec<Option<usize>>,
    levels: Vec<LevelRecord>,
    queries: Vec<Query>,
    report: Option<RunReport>,
    error: Option<String>,
}

struct Shared {
    snapshot: RwLock<Snapshot>,
    answers: Mutex<Option<Sender<(usize, Label)>>>,
    coords: PointSet,
    projection: PointSet,
    report_head: Value,
}

impl Shared {
    fn read(&self) -> std::sync::RwLockReadGuard<'_, Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, Snapshot> {
        self.snapshot.write().unwrap_or_else(|e| e.into_inner())
    }
}

/// Oracle that publishes each query and waits for the matching answer.
struct InteractiveOracle {
    shared: Arc<Shared>,
    answers: Receiver<(usize, Label)>,
}

impl LabelOracle for InteractiveOracle {
    fn label(&mut self, index: usize, ctx: &QueryContext<'_>) -> cac_core::Result<Label> {
        {
            let mut s = self.shared.write();
            s.phase = Phase::AwaitingLabel;
            s.level = Some(LevelInfo {
                n: ctx.n,
                theta: ctx.theta,
                eta: ctx.eta,
            });
            s.confident_count = ctx.confident.len();
            s.predicted = ctx.predicted.to_vec();
            s.confident.iter_mut().for_each(|c| *c = false);
            for &i in ctx.confident {
                s.confident[i] = true;
            }
            s.component = ctx.component_of.to_vec();
            let p = self.shared.projection.row(index);
            s.pending = Some(PendingQuery {
                point_id: index,
                coords: self.shared.coords.row(index).to_vec(),
                projection_2d: [p[0], p[1]],
            });
        }
        // handlers only forward answers for the pending point
        let (i, label) = self.answers.recv().map_err(|_| CacError::OracleDisconnected)?;
        debug_assert_eq!(i, index);
        let mut s = self.shared.write();
        s.queries.push(Query { index, label });
        s.predicted[index] = Some(label);
        Ok(label)
    }
}

struct SnapshotProgress(Arc<Shared>);

impl Progress for SnapshotProgress {
    fn level_started(&mut self, n: f64, state: &ActiveState) {
        let mut s = self.0.write();
        s.phase = Phase::Computing;
        s.level = Some(LevelInfo {
            n,
            theta: state.theta,
            eta: state.eta,
        });
    }

    fn level_finished(&mut self, record: &LevelRecord, state: &ActiveState) {
        let mut s = self.0.write();
        s.level = Some(LevelInfo {
            n: record.n,
            theta: record.theta_final,
            eta: record.eta,
        });
        s.levels.push(record.clone());
        s.predicted = state.predicted.clone();
        s.confident = state.confident_mask();
        s.confident_count = state.confident.len();
        s.component = state.component_of();
    }
}

/// Projection used by front ends: the coordinates themselves for `q <= 2`
/// (padded with zeros), else the two leading principal axes of the data.
fn projection_2d(points: &PointSet) -> Result<PointSet> {
    if points.dim() > 2 {
        let (_, p) = pca_fit_transform(points, 2).map_err(|e| CliError::Data(e.to_string()))?;
        return Ok(p);
    }
    let coords = points
        .rows()
        .flat_map(|r| [r[0], r.get(1).copied().unwrap_or(0.0)])
        .collect();
    Ok(PointSet::new(2, coords)?)
}

fn state_json(shared: &Shared) -> Value {
    let s = shared.read();
    json!({
        "version": PROTOCOL_VERSION,
        "phase": s.phase,
        "level": s.level,
        "counts": {
            "points": shared.coords.len(),
            "confident": s.confident_count,
            "queried": s.queries.len(),
        },
        "pending_query": s.pending,
        "error": s.error,
    })
}

async fn get_state(State(shared): State<Arc<Shared>>) -> Json<Value> {
    Json(state_json(&shared))
}

#[derive(Debug, Deserialize)]
struct PointsParams {
    fields: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn get_points(State(shared): State<Arc<Shared>>, QueryParams(params): QueryParams<PointsParams>) -> Response {
    const KNOWN: [&str; 5] = ["coords", "projection_2d", "pred", "confident", "component"];
    let fields: Vec<String> = match &params.fields {
        Some(f) => f.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => KNOWN.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = fields.iter().find(|f| !KNOWN.contains(&f.as_str())) {
        return (
            StatusCode::BAD_REQUEST,
            Json(json!({"version": PROTOCOL_VERSION, "error": format!("unknown field `{bad}`")})),
        )
            .into_response();
    }
    let has = |name: &str| fields.iter().any(|f| f == name);
    let total = shared.coords.len();
    let offset = params.offset.unwrap_or(0).min(total);
    let limit = params.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let end = offset.saturating_add(limit).min(total);
    let s = shared.read();
    let points: Vec<Value> = (offset..end)
        .map(|i| {
            let mut rec = serde_json::Map::new();
            rec.insert("id".into(), json!(i));
            if has("coords") {
                rec.insert("coords".into(), json!(shared.coords.row(i)));
            }
            if has("projection_2d") {
                rec.insert("projection_2d".into(), json!(shared.projection.row(i)));
            }
            if has("pred") {
                rec.insert("pred".into(), json!(s.predicted[i]));
            }
            if has("confident") {
                rec.insert("confident".into(), json!(s.confident[i]));
            }
            if has("component") {
                rec.insert("component".into(), json!(s.component[i]));
            }
            Value::Object(rec)
        })
        .collect();
    Json(json!({
        "version": PROTOCOL_VERSION,
        "total": total,
        "offset": offset,
        "limit": limit,
        "points": points,
    }))
    .into_response()
}

fn reject(status: StatusCode, reason: String) -> Response {
    (
        status,
        Json(LabelResponse {
            accepted: false,
            reason: Some(reason),
        }),
    )
        .into_response()
}

async fn post_label(
    State(shared): State<Arc<Shared>>,
    body: std::result::Result<Json<LabelRequest>, JsonRejection>,
) -> Response {
    let req = match body {
        Ok(Json(req)) => req,
        Err(e) => return reject(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let mut s = shared.write();
    let pending = match &s.pending {
        Some(p) => p.point_id,
        None => return reject(StatusCode::CONFLICT, "no label is pending".into()),
    };
    if req.point_id != pending {
        return reject(
            StatusCode::CONFLICT,
            format!("point {} is not pending; waiting for point {pending}", req.point_id),
        );
    }
    let sent = shared
        .answers
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .as_ref()
        .is_some_and(|tx| tx.send((req.point_id, req.label)).is_ok());
    if !sent {
        return reject(StatusCode::SERVICE_UNAVAILABLE, "the clustering loop has stopped".into());
    }
    s.pending = None;
    s.phase = Phase::Computing;
    Json(LabelResponse {
        accepted: true,
        reason: None,
    })
    .into_response()
}

async fn get_report(State(shared): State<Arc<Shared>>) -> Response {
    let s = shared.read();
    if let Some(r) = &s.report {
        let body = report_json(r);
        return ([(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response();
    }
    let mut head = shared.report_head.clone();
    let points: Vec<Value> = (0..shared.coords.len())
        .map(|i| {
            json!({
                "index": i,
                "predicted": s.predicted[i],
                "confident": s.confident[i],
                "queried": s.queries.iter().any(|q| q.index == i),
            })
        })
        .collect();
    let obj = head.as_object_mut().expect("object");
    obj.insert("status".into(), json!("running"));
    obj.insert("levels".into(), json!(s.levels));
    obj.insert("queries".into(), json!(s.queries));
    obj.insert("points".into(), json!(points));
    Json(head).into_response()
}

fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/api/state", get(get_state))
        .route("/api/points", get(get_points))
        .route("/api/label", post(post_label))
        .route("/api/report", get(get_report))
        .with_state(shared)
}

/// Handle to a running server.
pub struct Server {
    pub addr: SocketAddr,
    done: watch::Receiver<bool>,
    shared: Arc<Shared>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
    loop_thread: std::thread::JoinHandle<Result<RunReport>>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    go: Option<Sender<()>>,
}

impl Server {
    /// Lets a server created by [`start_held`] begin clustering.
    pub fn release(&mut self) {
        if let Some(go) = self.go.take() {
            let _ = go.send(());
        }
    }

    /// Resolves once the loop has finished (successfully or not).
    pub async fn wait_done(&mut self) {
        let _ = self.done.wait_for(|d| *d).await;
    }

    /// Stops the HTTP server, disconnects a still-waiting loop and returns
    /// the loop's outcome.
    pub async fn stop(mut self) -> Result<RunReport> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.go.take();
        let served = self.task.await;
        self.shared.answers.lock().unwrap_or_else(|e| e.into_inner()).take();
        let outcome = tokio::task::spawn_blocking(move || self.loop_thread.join())
            .await
            .map_err(|e| CliError::Protocol(format!("loop task failed: {e}")))?
            .map_err(|_| CliError::Protocol("clustering loop panicked".into()))?;
        match served {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(CliError::Protocol(format!("server error: {e}"))),
            Err(e) => return Err(CliError::Protocol(format!("server task failed: {e}"))),
        }
        outcome
    }
}

/// Starts the loop and the HTTP server on `listener`.
pub async fn start(config: &RunConfig, listener: TcpListener) -> Result<Server> {
    let mut server = start_held(config, listener).await?;
    server.release();
    Ok(server)
}

/// Like [`start`], but the loop waits for [`Server::release`] so clients can
/// observe the state before any work is done.
pub async fn start_held(config: &RunConfig, listener: TcpListener) -> Result<Server> {
    let prepared = config.prepare()?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::Protocol(format!("listener has no address: {e}")))?;
    let (tx, rx) = channel();
    let m = prepared.points.len();
    let shared = Arc::new(Shared {
        snapshot: RwLock::new(Snapshot {
            phase: Phase::Computing,
            level: None,
            confident_count: 0,
            pending: None,
            predicted: vec![None; m],
            confident: vec![false; m],
            component: vec![None; m],
            levels: Vec::new(),
            queries: Vec::new(),
            report: None,
            error: None,
        }),
        answers: Mutex::new(Some(tx)),
        projection: projection_2d(&prepared.dataset.points)?,
        coords: prepared.dataset.points.clone(),
        report_head: json!({
            "kernel": prepared.kernel,
            "schedule": config.schedule,
            "eta_constant": null,
        }),
    });

    let (done_tx, done_rx) = watch::channel(false);
    let (go_tx, go_rx) = channel::<()>();
    let loop_thread = {
        let shared = Arc::clone(&shared);
        let config = config.clone();
        std::thread::spawn(move || {
            let out = match go_rx.recv() {
                Ok(()) => run_interactive(&config, &prepared, Arc::clone(&shared), rx),
                Err(_) => Err(CacError::OracleDisconnected.into()),
            };
            let mut s = shared.write();
            s.phase = Phase::Done;
            s.pending = None;
            match &out {
                Ok(r) => s.report = Some(r.clone()),
                Err(e) => s.error = Some(e.to_string()),
            }
            drop(s);
            let _ = done_tx.send(true);
            out
        })
    };

    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(Arc::clone(&shared));
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await
    });
    Ok(Server {
        addr,
        done: done_rx,
        shared,
        task,
        loop_thread,
        shutdown: Some(stop_tx),
        go: Some(go_tx),
    })
}

fn run_interactive(
    config: &RunConfig,
    prepared: &Prepared,
    shared: Arc<Shared>,
    answers: Receiver<(usize, Label)>,
) -> Result<RunReport> {
    let mut oracle = InteractiveOracle {
        shared: Arc::clone(&shared),
        answers,
    };
    let mut curve = CurveRecorder::new(prepared.dataset.labels.clone());
    let report = execute(config, prepared, &mut oracle, &mut SnapshotProgress(shared), &mut curve)?;
    write_outputs(&config.output, prepared, &report, &curve.rows)?;
    if report.status == RunStatus::BudgetExhausted {
        return Err(CliError::Budget {
            queries: report.query_count(),
            output: config.output.clone(),
        });
    }
    Ok(report)
}

/// Serves until `shutdown` resolves, or until the loop finishes when
/// `exit_when_done` is set.
pub async fn cmd_serve(
    config: &RunConfig,
    exit_when_done: bool,
    shutdown: impl Future<Output = ()> + Send,
) -> Result<RunReport> {
    let port = match config.oracle {
        OracleMode::Interactive { port } => port,
        ref other => return Err(CliError::Config(format!("serve needs the interactive oracle, got {other}"))),
    };
    let listener = TcpListener::bind(("127.0.0.1", port))
        .await
        .map_err(|e| CliError::Protocol(format!("cannot listen on port {port}: {e}")))?;
    let mut server = start(config, listener).await?;
    eprintln!("cac: serving {PROTOCOL_VERSION} on http://{}", server.addr);
    if exit_when_done {
        tokio::select! {
            _ = server.wait_done() => {}
            _ = shutdown => {}
        }
    } else {
        shutdown.await;
    }
    server.stop().await
}
