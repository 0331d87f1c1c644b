//! Read-only HTTP search service.
//!
//! `POST /search` takes
//!
//! ```json
//! {"query_id": "q1", "query_text": "quick fox", "query_vector": [1.0, 0.0, 0.2],
//!  "query_weights": {"fox": 1.2}, "overrides": {"stage": "both", "use_prf": true}}
//! ```
//!
//! where everything except `query_text` is optional and `overrides` is a
//! partial pipeline configuration merged over the server's. The response
//! lists `(rank, id, score)` hits and echoes the effective configuration.
//! `GET /healthz` answers 503 until the indexes are loaded, then 200.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, OnceLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fuseprf_core::io::Query;
use fuseprf_core::pipeline::{QueryWeightSource, SparseBackend};
use fuseprf_core::{run_query, DenseVector, Error, Indexes, PipelineConfig, QueryInput};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::DataPaths;
use crate::engine::{load_indexes, Needs};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default = "default_query_id")]
    pub query_id: String,
    pub query_text: String,
    #[serde(default)]
    pub query_vector: Option<Vec<f32>>,
    #[serde(default)]
    pub query_weights: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub overrides: Option<Value>,
}

fn default_query_id() -> String {
    "query".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub rank: usize,
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query_id: String,
    pub tag: String,
    pub config: PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_weight_source: Option<QueryWeightSource>,
    pub results: Vec<Hit>,
}

#[derive(Debug, Serialize)]
struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

impl ApiError {
    fn bad(field: impl Into<Option<&'static str>>, error: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            error: error.into(),
            field: field.into().map(str::to_string),
        }
    }

    fn unavailable() -> Self {
        Self {
            status: StatusCode::SERVICE_UNAVAILABLE,
            error: "indexes are still loading".into(),
            field: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

/// Shared state: the base configuration and, once loaded, the indexes.
#[derive(Debug)]
pub struct ServeState {
    base: PipelineConfig,
    indexes: OnceLock<Indexes>,
}

impl ServeState {
    pub fn new(base: PipelineConfig) -> Arc<Self> {
        Arc::new(Self {
            base,
            indexes: OnceLock::new(),
        })
    }

    /// Makes the service ready. Later calls are ignored.
    pub fn install(&self, indexes: Indexes) {
        let _ = self.indexes.set(indexes);
    }

    pub fn is_ready(&self) -> bool {
        self.indexes.get().is_some()
    }
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/search", post(search))
        .with_state(state)
}

async fn healthz(State(state): State<Arc<ServeState>>) -> Response {
    if state.is_ready() {
        (StatusCode::OK, "ok\n").into_response()
    } else {
        ApiError::unavailable().into_response()
    }
}

fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                merge(t.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (t, p) => *t = p.clone(),
    }
}

fn effective_config(
    base: &PipelineConfig,
    overrides: Option<&Value>,
) -> Result<PipelineConfig, ApiError> {
    let Some(patch) = overrides else {
        return Ok(*base);
    };
    if !patch.is_object() {
        return Err(ApiError::bad("overrides", "must be an object"));
    }
    let mut merged = serde_json::to_value(base).expect("config serializes");
    merge(&mut merged, patch);
    serde_json::from_value(merged).map_err(|e| ApiError::bad("overrides", e.to_string()))
}

fn check_config(cfg: &PipelineConfig) -> Result<(), ApiError> {
    if !(0.0..=1.0).contains(&cfg.fusion.lambda) {
        return Err(ApiError::bad(
            "overrides.fusion.lambda",
            format!("lambda must lie in [0, 1], got {}", cfg.fusion.lambda),
        ));
    }
    if cfg.fusion.output_depth == 0 {
        return Err(ApiError::bad(
            "overrides.fusion.output_depth",
            "must be at least 1",
        ));
    }
    if !cfg.prf.alpha.is_finite() {
        return Err(ApiError::bad("overrides.prf.alpha", "must be finite"));
    }
    if !cfg.prf.beta.is_finite() {
        return Err(ApiError::bad("overrides.prf.beta", "must be finite"));
    }
    if cfg.prf.depth_k == 0 {
        return Err(ApiError::bad("overrides.prf.depth_k", "must be at least 1"));
    }
    if cfg.retrieval_depth == 0 {
        return Err(ApiError::bad(
            "overrides.retrieval_depth",
            "must be at least 1",
        ));
    }
    if let Err(e) = cfg.bm25.validate() {
        return Err(ApiError::bad("overrides.bm25", e.to_string()));
    }
    cfg.validate()
        .map_err(|e| ApiError::bad("overrides", e.to_string()))
}

fn check_request(
    req: &SearchRequest,
    cfg: &PipelineConfig,
    indexes: &Indexes,
) -> Result<(), ApiError> {
    let needs = Needs::for_config(cfg);
    if needs.bm25 && indexes.bm25.is_none() {
        return Err(ApiError::bad(
            "overrides.sparse_backend",
            "no BM25 index is loaded",
        ));
    }
    if needs.impact && indexes.impact.is_none() {
        return Err(ApiError::bad(
            "overrides.sparse_backend",
            "no impact index is loaded",
        ));
    }
    if needs.dense {
        let Some(store) = &indexes.dense else {
            return Err(ApiError::bad(
                "overrides.dense_enabled",
                "no dense store is loaded",
            ));
        };
        match &req.query_vector {
            None => {
                return Err(ApiError::bad(
                    "query_vector",
                    format!("required by stage `{}`", cfg.stage),
                ))
            }
            Some(v) if v.len() != store.dim() => {
                return Err(ApiError::bad(
                    "query_vector",
                    format!("expected dimension {}, got {}", store.dim(), v.len()),
                ))
            }
            Some(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(ApiError::bad("query_vector", "entries must be finite"))
            }
            _ => {}
        }
    }
    if let Some(w) = &req.query_weights {
        if cfg.sparse_backend == SparseBackend::Impact
            && w.values().any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(ApiError::bad(
                "query_weights",
                "weights must be finite and non-negative",
            ));
        }
    }
    Ok(())
}

/// Validates and answers one request against loaded indexes.
pub fn answer(
    base: &PipelineConfig,
    indexes: &Indexes,
    req: SearchRequest,
) -> Result<SearchResponse, (u16, String)> {
    handle(base, indexes, req).map_err(|e| (e.status.as_u16(), e.error))
}

fn handle(
    base: &PipelineConfig,
    indexes: &Indexes,
    req: SearchRequest,
) -> Result<SearchResponse, ApiError> {
    if req.query_id.is_empty() {
        return Err(ApiError::bad("query_id", "must not be empty"));
    }
    let cfg = effective_config(base, req.overrides.as_ref())?;
    check_config(&cfg)?;
    check_request(&req, &cfg, indexes)?;
    let input = QueryInput {
        query: Query::new(req.query_id.clone(), req.query_text),
        vector: req.query_vector.map(DenseVector::new),
        impact_weights: req.query_weights,
    };
    let result = run_query(&input, &cfg, indexes).map_err(|e| match e {
        Error::Config(_)
        | Error::DimensionMismatch { .. }
        | Error::MissingIndex(_)
        | Error::MissingQueryVector(_) => ApiError::bad(None, e.to_string()),
        other => ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            error: other.to_string(),
            field: None,
        },
    })?;
    let results = result
        .final_list
        .iter()
        .enumerate()
        .map(|(i, e)| Hit {
            rank: i + 1,
            id: e.id.clone(),
            score: e.score,
        })
        .collect();
    Ok(SearchResponse {
        query_id: req.query_id,
        tag: cfg.digest(),
        config: cfg,
        query_weight_source: result.query_weight_source,
        results,
    })
}

async fn search(
    State(state): State<Arc<ServeState>>,
    body: Result<Json<SearchRequest>, JsonRejection>,
) -> Result<Json<SearchResponse>, ApiError> {
    if !state.is_ready() {
        return Err(ApiError::unavailable());
    }
    let Json(req) = body.map_err(|e| ApiError::bad(None, e.body_text()))?;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let indexes = worker.indexes.get().expect("checked ready");
        handle(&worker.base, indexes, req)
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        error: e.to_string(),
        field: None,
    })?
    .map(Json)
}

async fn shutdown_signal(load_failed: tokio::sync::oneshot::Receiver<()>) {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    let failed = async {
        if load_failed.await.is_err() {
            std::future::pending::<()>().await;
        }
    };
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
        _ = failed => {},
    }
}

/// Binds, starts answering (503 until loaded), loads every index whose
/// source exists, and serves until SIGINT/SIGTERM. In-flight requests are
/// drained before returning.
pub async fn run_server(
    host: &str,
    port: u16,
    base: PipelineConfig,
    paths: DataPaths,
) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    println!("listening on http://{addr}");
    let state = ServeState::new(base);

    let (fail_tx, fail_rx) = tokio::sync::oneshot::channel();
    let loader_state = state.clone();
    let loader = tokio::task::spawn_blocking(move || -> fuseprf_core::Result<()> {
        let indexes = load_indexes(&paths, Needs::available(&paths))?;
        loader_state.install(indexes);
        Ok(())
    });
    let watcher = tokio::spawn(async move {
        match loader.await {
            Ok(Ok(())) => {
                eprintln!("indexes loaded; ready");
                Ok(())
            }
            Ok(Err(e)) => {
                let _ = fail_tx.send(());
                Err(anyhow::Error::from(e).context("loading indexes"))
            }
            Err(e) => {
                let _ = fail_tx.send(());
                Err(anyhow::Error::from(e))
            }
        }
    });

    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal(fail_rx))
        .await?;
    if watcher.is_finished() {
        watcher.await??;
    }
    Ok(())
}
