//! HTTP sessions over the audit engine.
//!
//! ```text
//! POST /sessions                      multipart: predictions, attributes, schema
//! GET  /sessions                      list of session ids
//! GET  /sessions/{id}                 manifest and rank accuracy
//! GET  /sessions/{id}/metrics         ?policy=&theta=&top_k=
//! GET  /sessions/{id}/risk            ?impact_fmr=&impact_fnmr=&policy=&theta=&top_k=
//! POST /sessions/{id}/infer           {query, evidence, alpha, min_support, policy, theta, top_k}
//! GET  /sessions/{id}/sweep           ?thetas=&impacts=&policy=&top_k=
//! ```
//!
//! Report bodies are produced by `biaslens::report`, so they are byte-identical
//! to the command-line JSON output for the same inputs.

mod store;

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use biaslens::beliefnet::{query_posterior, Evidence, NetworkParams};
use biaslens::metrics::{group_metrics, rank_accuracy, DecisionPolicy, PolicyKind, TopK};
use biaslens::report::{metrics_json, posterior_json, risk_json, sweep_json, Num, Posterior};
use biaslens::risk::{
    parse_impact_grid, parse_theta_grid, risk_report, whatif_sweep, ImpactProfile,
};
use serde::{Deserialize, Serialize};

pub use store::{Manifest, Session, SessionStore};

/// Upload cap for `POST /sessions` unless configured otherwise.
pub const DEFAULT_MAX_UPLOAD: usize = 64 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub category: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    category: &'a str,
    message: &'a str,
}

impl ApiError {
    fn new(status: StatusCode, category: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            category,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no session `{id}`"),
        )
    }

    fn param(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "param", message)
    }
}

impl From<biaslens::Error> for ApiError {
    fn from(e: biaslens::Error) -> Self {
        let status = match e.category() {
            "input" => StatusCode::BAD_REQUEST,
            "evidence" => StatusCode::CONFLICT,
            "io" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.category(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string_pretty(&ErrorBody {
            error: ErrorDetail {
                category: self.category,
                message: &self.message,
            },
        })
        .expect("error body serializes");
        (
            self.status,
            [(header::CONTENT_TYPE, "application/json")],
            body + "\n",
        )
            .into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn session(store: &SessionStore, id: &str) -> Result<Arc<Session>, ApiError> {
    store.get(id).ok_or_else(|| ApiError::not_found(id))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

type Params = HashMap<String, String>;

fn real(q: &Params, name: &str, default: f64) -> Result<f64, ApiError> {
    match q.get(name) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map_err(|_| ApiError::param(format!("{name} `{v}` is not a number"))),
    }
}

/// Policy from `policy`, `theta` and `top_k`; defaults are rank_threshold, 0, all.
fn policy(q: &Params) -> Result<DecisionPolicy, ApiError> {
    let kind = match q.get("policy") {
        Some(p) => p.parse::<PolicyKind>()?,
        None => PolicyKind::RankThreshold,
    };
    let top_k = match q.get("top_k") {
        Some(k) => k.parse::<TopK>()?,
        None => TopK::All,
    };
    Ok(DecisionPolicy::new(kind, real(q, "theta", 0.0)?, top_k)?)
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    mut multipart: Multipart,
) -> ApiResult {
    let mut parts: HashMap<String, Bytes> = HashMap::new();
    let upload_error = |e: axum::extract::multipart::MultipartError| {
        let status = e.status();
        let category = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "too_large"
        } else {
            "input"
        };
        ApiError::new(status, category, e.body_text())
    };
    while let Some(field) = multipart.next_field().await.map_err(upload_error)? {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(upload_error)?;
        parts.insert(name, data);
    }
    let mut take = |name: &str| {
        parts.remove(name).ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "input",
                format!("missing multipart field `{name}`"),
            )
        })
    };
    let (p, a, s) = (take("predictions")?, take("attributes")?, take("schema")?);
    let session = blocking(move || Ok(store.create(&p, &a, &s)?)).await?;
    let body = serde_json::to_string_pretty(&session.manifest).expect("manifest serializes") + "\n";
    Ok(json_response(StatusCode::CREATED, body))
}

async fn list_sessions(State(store): State<Arc<SessionStore>>) -> ApiResult {
    let body = serde_json::to_string_pretty(&serde_json::json!({ "sessions": store.ids() }))
        .expect("list serializes")
        + "\n";
    Ok(json_response(StatusCode::OK, body))
}

#[derive(Serialize)]
struct SessionSummary<'a> {
    #[serde(flatten)]
    manifest: &'a Manifest,
    rank_accuracy: Vec<RankAccuracy>,
}

#[derive(Serialize)]
struct RankAccuracy {
    k: usize,
    hits: usize,
    accuracy: Num,
}

async fn get_session(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult {
    let s = session(&store, &id)?;
    let n = s.dataset.len();
    let mut ranks = Vec::new();
    for k in 1..=5 {
        if n == 0 {
            break;
        }
        let acc = rank_accuracy(&s.dataset, k)?;
        let hits = s
            .dataset
            .records()
            .iter()
            .filter(|r| r.true_rank().is_some_and(|rank| rank <= k))
            .count();
        ranks.push(RankAccuracy {
            k,
            hits,
            accuracy: Num::new(acc),
        });
    }
    let body = serde_json::to_string_pretty(&SessionSummary {
        manifest: &s.manifest,
        rank_accuracy: ranks,
    })
    .expect("summary serializes")
        + "\n";
    Ok(json_response(StatusCode::OK, body))
}

async fn get_metrics(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(q): Query<Params>,
) -> ApiResult {
    let s = session(&store, &id)?;
    let policy = policy(&q)?;
    let body = blocking(move || Ok(metrics_json(&group_metrics(&s.dataset, &policy)))).await?;
    Ok(json_response(StatusCode::OK, body))
}

async fn get_risk(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(q): Query<Params>,
) -> ApiResult {
    let s = session(&store, &id)?;
    let policy = policy(&q)?;
    let profile = ImpactProfile::new(real(&q, "impact_fmr", 1.0)?, real(&q, "impact_fnmr", 1.0)?)?;
    let body =
        blocking(move || Ok(risk_json(&risk_report(&s.dataset, &policy, &profile)?))).await?;
    Ok(json_response(StatusCode::OK, body))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InferRequest {
    query: String,
    #[serde(default)]
    evidence: Evidence,
    alpha: Option<f64>,
    min_support: Option<u64>,
    policy: Option<PolicyKind>,
    theta: Option<f64>,
    top_k: Option<TopK>,
}

async fn post_infer(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let s = session(&store, &id)?;
    let req: InferRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::param(format!("invalid request body: {e}")))?;
    let defaults = NetworkParams::default();
    let params = NetworkParams {
        policy: DecisionPolicy::new(
            req.policy.unwrap_or(defaults.policy.kind),
            req.theta.unwrap_or(defaults.policy.theta),
            req.top_k.unwrap_or(defaults.policy.top_k),
        )?,
        alpha: req.alpha.unwrap_or(defaults.alpha),
        min_support: req.min_support.unwrap_or(defaults.min_support),
    };
    let body = blocking(move || {
        let net = s.network(&params)?;
        let (distribution, rates) = query_posterior(&net, &req.query, &req.evidence)?;
        Ok(posterior_json(&Posterior {
            params: &params,
            query: &req.query,
            evidence: &req.evidence,
            distribution: &distribution,
            rates: rates.as_ref(),
        }))
    })
    .await?;
    Ok(json_response(StatusCode::OK, body))
}

async fn get_sweep(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(q): Query<Params>,
) -> ApiResult {
    let s = session(&store, &id)?;
    let base = policy(&q)?;
    let thetas = parse_theta_grid(q.get("thetas").map(String::as_str).unwrap_or(""))?;
    let profiles = parse_impact_grid(q.get("impacts").map(String::as_str).unwrap_or("1:1"))?;
    let body = blocking(move || {
        let points = whatif_sweep(&s.dataset, &base, &profiles, &thetas)?;
        Ok(sweep_json(&base, &profiles, &thetas, &points))
    })
    .await?;
    Ok(json_response(StatusCode::OK, body))
}

pub fn router(store: Arc<SessionStore>, max_upload: usize) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/risk", get(get_risk))
        .route("/sessions/{id}/infer", post(post_infer))
        .route("/sessions/{id}/sweep", get(get_sweep))
        .layer(DefaultBodyLimit::max(max_upload))
        .with_state(store)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<SessionStore>,
    max_upload: usize,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store, max_upload))
        .with_graceful_shutdown(shutdown)
        .await
}
