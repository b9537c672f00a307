use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use lockdown_core::datagen::{generate, GenConfig};
use lockdown_core::heuristic::sweep;
use lockdown_core::{Edge, FacilityId, Instance, InstanceData, PersonId};
use lockdown_service::{evaluate, router, AppState, ScenarioRequest};

fn f1() -> Instance {
    Instance::new(InstanceData {
        n_people: 2,
        n_facilities: 1,
        budget: 4.0,
        infection_prob: vec![0.5, 0.25],
        isolation_cost: vec![4.0, 4.0],
        closure_cost: vec![10.0],
        edges: vec![Edge::new(0, 0, 0.5), Edge::new(1, 0, 1.0)],
        labels: None,
    })
    .unwrap()
}

async fn call(state: AppState, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router(state).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn scenario(state: AppState, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = call(state, "POST", "/scenario", &body.to_string()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn loaded() -> AppState {
    AppState::new(Some(f1()))
}

#[tokio::test]
async fn healthz() {
    let (status, body) = call(AppState::new(None), "GET", "/healthz", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"ok");
}

#[tokio::test]
async fn no_instance_is_conflict() {
    let (status, _) = call(AppState::new(None), "POST", "/scenario", "{}").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = call(AppState::new(None), "GET", "/instance/summary", "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["error"], "no instance loaded");
}

#[tokio::test]
async fn empty_request_matches_solve() {
    let expected = sweep(&f1());
    for body in ["{}", ""] {
        let (status, bytes) = call(loaded(), "POST", "/scenario", body).await;
        assert_eq!(status, StatusCode::OK);
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["solution"], serde_json::to_value(&expected.best().solution).unwrap());
        assert_eq!(v["riskReport"]["totalRisk"], json!(expected.best().total_risk));
        assert_eq!(v["bestSplit"], json!(expected.best().split_percent));
        assert_eq!(v["splitCurve"].as_array().unwrap().len(), 101);
    }
}

#[tokio::test]
async fn forcing_the_dominant_facility_zeroes_risk() {
    let (status, v) = scenario(loaded(), json!({"budget": 10.0, "forcedClosures": [0]})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["riskReport"]["ratio"], json!(0.0));
    assert_eq!(v["solution"]["closedFacilities"], json!([0]));
}

#[tokio::test]
async fn excluding_everything_leaves_baseline() {
    let (status, v) =
        scenario(loaded(), json!({"excludedFacilities": [0], "excludedPeople": [0, 1], "budget": 100.0})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["riskReport"]["ratio"], json!(1.0));
    assert_eq!(v["riskReport"]["totalRisk"], v["riskReport"]["baselineRisk"]);
    assert_eq!(v["solution"]["closedFacilities"], json!([]));
    assert_eq!(v["solution"]["isolatedPeople"], json!([]));
}

#[tokio::test]
async fn zero_budget_gives_ratio_one() {
    let (status, v) = scenario(loaded(), json!({"budget": 0.0})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["riskReport"]["ratio"], json!(1.0));
    assert!(v["splitCurve"].as_array().unwrap().iter().all(|p| p["ratio"] == json!(1.0)));
}

#[tokio::test]
async fn explicit_split() {
    let (status, v) = scenario(loaded(), json!({"splitPercent": 100})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["splitPercent"], json!(100.0));
    assert_eq!(v["solution"]["isolatedPeople"], json!([0]));
    assert_eq!(v["spentIsolation"], json!(4.0));
}

#[tokio::test]
async fn client_errors() {
    let cases = [
        (json!({"forcedClosures": [1]}), StatusCode::BAD_REQUEST),
        (json!({"excludedPeople": [2]}), StatusCode::BAD_REQUEST),
        (json!({"forcedClosures": [0], "excludedFacilities": [0], "budget": 20}), StatusCode::BAD_REQUEST),
        (json!({"forcedIsolations": [1], "excludedPeople": [1]}), StatusCode::BAD_REQUEST),
        (json!({"budget": -1}), StatusCode::BAD_REQUEST),
        (json!({"splitPercent": 101}), StatusCode::BAD_REQUEST),
        (json!({"forcedClosures": [-1]}), StatusCode::BAD_REQUEST),
        (json!({"unknownField": true}), StatusCode::BAD_REQUEST),
        (json!({"forcedClosures": [0]}), StatusCode::UNPROCESSABLE_ENTITY),
        (json!({"forcedIsolations": [0, 1]}), StatusCode::UNPROCESSABLE_ENTITY),
    ];
    for (body, expected) in cases {
        let (status, v) = scenario(loaded(), body.clone()).await;
        assert_eq!(status, expected, "{body}");
        assert!(v["error"].is_string(), "{body}");
    }
    let (status, _) = call(loaded(), "POST", "/scenario", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let body = json!({"budget": 8.0, "forcedIsolations": [1]}).to_string();
    let (_, a) = call(loaded(), "POST", "/scenario", &body).await;
    let (_, b) = call(loaded(), "POST", "/scenario", &body).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn summary_of_f1() {
    let (status, bytes) = call(loaded(), "GET", "/instance/summary", "").await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["nPeople"], 2);
    assert_eq!(v["nFacilities"], 1);
    assert_eq!(v["budget"], json!(4.0));
    assert_eq!(v["baselineRisk"], json!(0.75));
    assert_eq!(v["facilities"][0]["size"], 2);
    assert_eq!(v["facilities"][0]["risk"], json!(0.5));
}

fn small_generated() -> Instance {
    generate(&GenConfig {
        seed: 9,
        n_facilities: 60,
        max_facility_size: 80,
        budget_fraction: 0.05,
        isolation_population_fraction: Some(0.05),
        ..GenConfig::default()
    })
    .unwrap()
}

#[tokio::test]
async fn summary_of_generated_instance_is_consistent() {
    let inst = small_generated();
    let edges = inst.edges().len();
    let (_, bytes) = call(AppState::new(Some(inst)), "GET", "/instance/summary", "").await;
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    let sizes: u64 = v["facilities"].as_array().unwrap().iter().map(|f| f["size"].as_u64().unwrap()).sum();
    assert_eq!(sizes, edges as u64);
    assert_eq!(v["totalMemberships"], json!(edges));
    let hist: u64 =
        v["facilitySizes"]["buckets"].as_array().unwrap().iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(hist, 60);
}

#[test]
fn forced_and_excluded_sets_are_honored() {
    let inst = small_generated();
    let budget = inst.budget() * 3.0;
    let mut checked = 0;
    for k in 0..20u32 {
        let req = ScenarioRequest {
            budget: Some(budget),
            split_percent: if k % 2 == 0 { None } else { Some((k * 7 % 101) as f64) },
            forced_closures: [FacilityId(k), FacilityId(k + 20)].into(),
            forced_isolations: [PersonId(3 * k)].into(),
            excluded_facilities: [FacilityId(k + 1), FacilityId(k + 30)].into(),
            excluded_people: (0..50).map(|u| PersonId(3 * k + 1 + u)).collect(),
        };
        let Ok(resp) = evaluate(&inst, &req) else {
            continue;
        };
        let sol = &resp.solution;
        assert!(sol.is_within_budget(budget));
        assert!(req.forced_closures.is_subset(sol.closed_facilities()));
        assert!(req.forced_isolations.is_subset(sol.isolated_people()));
        assert!(req.excluded_facilities.is_disjoint(sol.closed_facilities()));
        assert!(req.excluded_people.is_disjoint(sol.isolated_people()));
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} scenarios were feasible");
}
