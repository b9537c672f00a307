//! HTTP what-if API over a single loaded instance.
//!
//! Endpoints:
//!
//! * `POST /scenario` evaluates a [`ScenarioRequest`] and returns a
//!   [`ScenarioResponse`].
//! * `GET /instance/summary` returns an [`InstanceSummary`].
//! * `GET /healthz` returns `ok`.
//!
//! Errors are JSON objects `{"error": "..."}` with status 400 for malformed
//! requests, unknown ids or overlapping sets, 422 when forced choices cost
//! more than the budget and 409 when no instance is loaded.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use lockdown_core::datagen::{summarize, GenSummary};
use lockdown_core::harness::CurvePoint;
use lockdown_core::heuristic::{Planner, RestrictionError, Restrictions, SweepOptions};
use lockdown_core::risk::{facility_risks, total_risk, RiskReport};
use lockdown_core::{FacilityId, Instance, PersonId, Solution};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ScenarioRequest {
    /// Replaces the instance budget when set.
    pub budget: Option<f64>,
    /// Evaluate this split instead of the best one.
    pub split_percent: Option<f64>,
    pub forced_closures: BTreeSet<FacilityId>,
    pub forced_isolations: BTreeSet<PersonId>,
    pub excluded_facilities: BTreeSet<FacilityId>,
    pub excluded_people: BTreeSet<PersonId>,
}

impl ScenarioRequest {
    fn restrictions(&self) -> Restrictions {
        Restrictions {
            budget: self.budget,
            forced_closures: self.forced_closures.clone(),
            forced_isolations: self.forced_isolations.clone(),
            excluded_facilities: self.excluded_facilities.clone(),
            excluded_people: self.excluded_people.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioResponse {
    pub budget: f64,
    /// Split the returned solution was computed at.
    pub split_percent: f64,
    pub best_split: f64,
    pub spent_isolation: f64,
    pub spent_closure: f64,
    pub solution: Solution,
    pub risk_report: RiskReport,
    pub split_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FacilityRow {
    pub id: FacilityId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub size: usize,
    pub closure_cost: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceSummary {
    #[serde(flatten)]
    pub summary: GenSummary,
    pub baseline_risk: f64,
    /// Facilities in id order with their baseline risk.
    pub facilities: Vec<FacilityRow>,
}

struct Loaded {
    instance: Instance,
    summary: Bytes,
}

#[derive(Clone, Default)]
pub struct AppState {
    loaded: Option<Arc<Loaded>>,
}

impl AppState {
    pub fn new(instance: Option<Instance>) -> Self {
        AppState {
            loaded: instance.map(|instance| {
                let summary =
                    Bytes::from(serde_json::to_vec(&instance_summary(&instance)).expect("summary serializes"));
                Arc::new(Loaded { instance, summary })
            }),
        }
    }
}

pub fn instance_summary(instance: &Instance) -> InstanceSummary {
    let risks = facility_risks(instance, &Solution::empty()).expect("empty solution is valid");
    let names = instance.labels().map(|l| &l.facilities);
    InstanceSummary {
        summary: summarize(instance),
        baseline_risk: lockdown_core::risk::baseline_risk(instance),
        facilities: (0..instance.n_facilities())
            .map(|v| FacilityRow {
                id: FacilityId(v as u32),
                name: names.and_then(|n| n.get(v)).cloned(),
                size: instance.people_of(v).len(),
                closure_cost: instance.closure_cost()[v],
                risk: risks[v],
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn no_instance() -> Self {
        ApiError::new(StatusCode::CONFLICT, "no instance loaded")
    }
}

impl From<RestrictionError> for ApiError {
    fn from(e: RestrictionError) -> Self {
        let status = match e {
            RestrictionError::ForcedOverBudget { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.message }).to_string();
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

/// Evaluates a scenario. Identical inputs give identical outputs.
pub fn evaluate(instance: &Instance, request: &ScenarioRequest) -> Result<ScenarioResponse, ApiError> {
    if let Some(s) = request.split_percent {
        if !(0.0..=100.0).contains(&s) {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("splitPercent {s} outside [0, 100]")));
        }
    }
    let planner = Planner::with_restrictions(instance, &request.restrictions())?;
    let sweep = planner.sweep(&SweepOptions::default());
    let chosen = match request.split_percent {
        Some(s) => planner.solve_at_split(s),
        None => sweep.best().clone(),
    };
    let risk_report = total_risk(instance, &chosen.solution).expect("planner ids are in range");
    Ok(ScenarioResponse {
        budget: planner.budget(),
        split_percent: chosen.split_percent,
        best_split: sweep.best().split_percent,
        spent_isolation: chosen.spent_isolation,
        spent_closure: chosen.spent_closure,
        solution: chosen.solution,
        risk_report,
        split_curve: sweep.curve().into_iter().map(|(split, ratio)| CurvePoint { split, ratio }).collect(),
    })
}

fn json_response(body: impl Into<axum::body::Body>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body.into()).into_response()
}

async fn scenario(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let loaded = state.loaded.ok_or_else(ApiError::no_instance)?;
    let request: ScenarioRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ScenarioRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?
    };
    let response = tokio::task::spawn_blocking(move || evaluate(&loaded.instance, &request))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let bytes =
        serde_json::to_vec(&response).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(json_response(bytes))
}

async fn summary(State(state): State<AppState>) -> Result<Response, ApiError> {
    let loaded = state.loaded.ok_or_else(ApiError::no_instance)?;
    Ok(json_response(loaded.summary.clone()))
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenario", post(scenario))
        .route("/instance/summary", get(summary))
        .route("/healthz", get(healthz))
        .with_state(state)
}

pub async fn serve(instance: Option<Instance>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(instance))).await
}
