use std::collections::BTreeSet;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use ftcp_core::bundle::{bundle_to_string, InstanceBundle, Provenance};
use ftcp_core::synthetic::{synthetic_club, synthetic_value_model};
use ftcp_core::{Formation, Instance, Lock, Money, Player, Role};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into())) };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn send(app: &Router, method: Method, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, method, uri, Some(body.to_string())).await
}

fn player(id: &str, owned: bool, value: i64, rating: f64) -> Player {
    Player {
        id: id.into(),
        name: format!("Player {id}"),
        age: 25.0,
        roles: BTreeSet::from([Role::CM]),
        owned,
        current_value: Money(value),
        purchase_price: Money::ZERO,
        sale_price: if owned { Money(800) } else { Money::ZERO },
        loan_in_fee: Money::ZERO,
        loan_out_fee: Money::ZERO,
        rating,
        locks: BTreeSet::new(),
    }
}

/// Four owned midfielders, two targets, a squad of four and a budget of 1000.
fn ledger_town() -> String {
    let mut players = vec![
        player("o1", true, 2000, 0.05),
        player("o2", true, 1800, 0.06),
        player("o3", true, 1500, 0.04),
        player("o4", true, 1200, 0.03),
        player("t1", false, 2500, 0.09),
        player("t2", false, 1600, 0.07),
    ];
    players[4].purchase_price = Money(1500);
    players[4].loan_in_fee = Money(400);
    players[5].purchase_price = Money(1200);
    players[5].locks.insert(Lock::NoLoanIn);
    let instance = Instance {
        club: "Ledger Town".into(),
        players,
        budget: Money(1000),
        squad_size: 4,
        formation: Formation::free(),
        value_threshold: Money(6000),
        alpha: 0.5,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    };
    bundle_text(instance)
}

fn bundle_text(instance: Instance) -> String {
    bundle_to_string(&InstanceBundle {
        instance,
        value_model: Some(synthetic_value_model(3)),
        ratings: None,
        provenance: Provenance::default(),
    })
}

async fn open(app: &Router, bundle: String) -> String {
    let (status, v) = call(app, Method::POST, "/sessions?seed=4&scenarios=30", Some(bundle)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn solve(app: &Router, id: &str, body: Value) -> (StatusCode, Value) {
    send(app, Method::POST, &format!("/sessions/{id}/solves?wait=true"), body).await
}

fn in_squad(entry: &Value, player: &str) -> bool {
    entry["solution"]["decisions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["player"] == player && d["keep"] == true)
}

#[tokio::test]
async fn create_get_list_and_delete() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let (status, v) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["revision"], 0);
    assert_eq!(v["seed"], 4);
    assert_eq!(v["scenarios"], 30);
    assert_eq!(v["instance"]["club"], "Ledger Town");
    assert_eq!(get(&app, "/sessions").await.1, json!([id]));
    let (status, text) = get(&app, &format!("/sessions/{id}/bundle")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text["instance"]["club"], "Ledger Town");
    assert_eq!(call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_sessions_players_and_solves_are_not_found() {
    let app = ftcp_service::router();
    for uri in ["/sessions/nope", "/sessions/nope/history", "/sessions/nope/audit", "/sessions/nope/fixings", "/sessions/nope/solves/1"] {
        let (status, v) = get(&app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(v["error"].as_str().unwrap().contains("nope"));
    }
    assert_eq!(solve(&app, "nope", json!({})).await.0, StatusCode::NOT_FOUND);
    let id = open(&app, ledger_town()).await;
    let (status, v) = send(&app, Method::PATCH, &format!("/sessions/{id}/players/zz"), json!({"purchase_price": 1})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown player `zz`");
    let (status, _) = send(&app, Method::POST, &format!("/sessions/{id}/fixings"), json!({"player": "zz", "decision": "buy", "value": true})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, &format!("/sessions/{id}/solves/9")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, &format!("/sessions/{id}/compare?a=1&b=2")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bundles_are_rejected() {
    let app = ftcp_service::router();
    let (status, v) = call(&app, Method::POST, "/sessions", Some("{\"version\": 1}".into())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].is_string());
    let mut no_model: Value = serde_json::from_str(&ledger_town()).unwrap();
    no_model.as_object_mut().unwrap().remove("value_model");
    let (status, v) = call(&app, Method::POST, "/sessions", Some(no_model.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "the bundle has no value model");
    assert_eq!(get(&app, "/sessions").await.1, json!([]));
}

#[tokio::test]
async fn repeated_solves_agree_and_diff_empty() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let before = get(&app, &format!("/sessions/{id}")).await.1;
    let (s1, a) = solve(&app, &id, json!({"gap": 0.0})).await;
    let (s2, b) = solve(&app, &id, json!({"gap": 0.0})).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a["state"], "optimal");
    assert_eq!(a["solution"], b["solution"]);
    assert_eq!(a["objective"], b["objective"]);
    assert_eq!(a["oos_probability"], b["oos_probability"]);
    assert!(!a["log"].as_array().unwrap().is_empty());
    let (status, diff) = get(&app, &format!("/sessions/{id}/compare?a=1&b=2")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(diff["changes"], json!([]));
    // Solving leaves the working instance and its revision alone.
    let after = get(&app, &format!("/sessions/{id}")).await.1;
    assert_eq!(before["instance"], after["instance"]);
    assert_eq!(before["revision"], after["revision"]);
    assert_eq!(after["history"], 2);
    let history = get(&app, &format!("/sessions/{id}/history")).await.1;
    let solves: Vec<u64> = history.as_array().unwrap().iter().map(|h| h["solve"].as_u64().unwrap()).collect();
    assert_eq!(solves, [1, 2]);
}

#[tokio::test]
async fn a_fixed_purchase_is_in_the_squad() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let (_, free) = solve(&app, &id, json!({"gap": 0.0, "oos": 0})).await;
    let (status, v) = send(&app, Method::POST, &format!("/sessions/{id}/fixings"), json!({"player": "t2", "decision": "buy", "value": true})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["revision"], 1);
    let (status, fixed) = solve(&app, &id, json!({"gap": 0.0, "oos": 0})).await;
    assert_eq!(status, StatusCode::OK);
    assert!(in_squad(&fixed, "t2"));
    assert_eq!(fixed["fixings"].as_array().unwrap().len(), 1);
    let (_, diff) = get(&app, &format!("/sessions/{id}/compare?a=1&b=2")).await;
    let changed: Vec<&str> = diff["changes"].as_array().unwrap().iter().map(|c| c["player"].as_str().unwrap()).collect();
    assert_eq!(changed.contains(&"t2"), !in_squad(&free, "t2"));
    assert_eq!(changed.is_empty(), free["solution"] == fixed["solution"]);
    let (_, v) = call(&app, Method::DELETE, &format!("/sessions/{id}/fixings"), None).await;
    assert_eq!(v["fixings"], json!([]));
}

#[tokio::test]
async fn contradictory_fixings_name_the_conflict() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let (status, v) = send(&app, Method::POST, &format!("/sessions/{id}/fixings"), json!({"player": "t2", "decision": "loan_in", "value": true})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["player"], "t2");
    assert_eq!(v["decision"], "loan_in");
    assert_eq!(v["constraint"], "the lock on xb_t2");

    let uri = format!("/sessions/{id}/fixings");
    assert_eq!(send(&app, Method::POST, &uri, json!({"player": "t1", "decision": "buy", "value": true})).await.0, StatusCode::OK);
    let (status, v) = send(&app, Method::POST, &uri, json!({"player": "t1", "decision": "buy", "value": false})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["constraint"], "an earlier fixing of yb_t1");

    // A lock that contradicts a standing fixing is refused and nothing changes.
    let (status, v) = send(&app, Method::PATCH, &format!("/sessions/{id}/players/t1"), json!({"locks": ["no_buy"]})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["constraint"], "the lock on yb_t1");
    let session = get(&app, &format!("/sessions/{id}")).await.1;
    assert_eq!(session["revision"], 1);
    assert_eq!(session["instance"]["players"][4]["locks"], json!([]));
    assert_eq!(get(&app, &uri).await.1.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn an_unaffordable_fixed_purchase_blames_the_budget() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let (status, _) = send(&app, Method::POST, &format!("/sessions/{id}/fixings"), json!({"player": "t1", "decision": "buy", "value": true})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, v) = send(&app, Method::PATCH, &format!("/sessions/{id}/players/t1"), json!({"purchase_price": 2500})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["instance"]["players"][4]["purchase_price"], 2500);
    assert_eq!(v["revision"], 2);
    let (status, entry) = solve(&app, &id, json!({"alpha": 0.1})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(entry["state"], "infeasible");
    assert_eq!(entry["solution"], Value::Null);
    let groups: Vec<&str> = entry["conflict_groups"].as_array().unwrap().iter().map(|g| g.as_str().unwrap()).collect();
    assert!(groups.contains(&"budget"), "{groups:?}");

    // With the old price the same fixing is affordable again.
    send(&app, Method::PATCH, &format!("/sessions/{id}/players/t1"), json!({"purchase_price": 1500})).await;
    let (_, entry) = solve(&app, &id, json!({"alpha": 0.1})).await;
    assert_eq!(entry["state"], "optimal");
    assert!(in_squad(&entry, "t1"));
}

#[tokio::test]
async fn raising_alpha_never_raises_the_objective() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let mut last = f64::INFINITY;
    for alpha in [0.2, 0.4, 0.6, 0.8, 0.95] {
        let (_, e) = solve(&app, &id, json!({"alpha": alpha, "gap": 0.0, "oos": 0})).await;
        assert_eq!(e["config"]["alpha"], alpha);
        let objective = e["objective"].as_f64().unwrap_or(f64::NEG_INFINITY);
        assert!(objective <= last + 1e-9, "alpha {alpha}: {objective} after {last}");
        last = objective;
    }
}

#[tokio::test]
async fn invalid_updates_and_settings_are_unprocessable() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let (status, _) = send(&app, Method::PATCH, &format!("/sessions/{id}/players/o1"), json!({"rating": 3.0})).await;
    assert!(status.is_client_error());
    let (status, v) = send(&app, Method::PATCH, &format!("/sessions/{id}/players/o1"), json!({"sale_price": -5})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().starts_with("invalid instance"));
    let (status, v) = solve(&app, &id, json!({"formation": "451"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "unknown formation `451`");
    let (status, _) = solve(&app, &id, json!({"alpha": 1.5})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = solve(&app, &id, json!({"gap": -1.0})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.1["revision"], 0);
}

#[tokio::test]
async fn resampling_is_logged_and_changes_the_pinned_sample() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let (status, v) = send(&app, Method::POST, &format!("/sessions/{id}/resample"), json!({"seed": 11, "scenarios": 40})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((v["seed"].as_u64(), v["scenarios"].as_u64(), v["revision"].as_u64()), (Some(11), Some(40), Some(1)));
    let (_, v) = send(&app, Method::POST, &format!("/sessions/{id}/resample"), json!({})).await;
    assert_eq!(v["seed"], 12);
    let (_, e) = solve(&app, &id, json!({"oos": 0})).await;
    assert_eq!((e["seed"].as_u64(), e["scenarios"].as_u64()), (Some(12), Some(40)));
    let audit = get(&app, &format!("/sessions/{id}/audit")).await.1;
    let actions: Vec<&str> = audit.as_array().unwrap().iter().map(|a| a["action"].as_str().unwrap()).collect();
    assert_eq!(actions, ["create", "resample", "resample", "solve_started", "solve_finished"]);
    assert_eq!(audit[1]["detail"]["previous_seed"], 4);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_updates_are_serialized() {
    let app = ftcp_service::router();
    let id = open(&app, ledger_town()).await;
    let mut tasks = Vec::new();
    for k in 0..16 {
        let (app, uri) = (app.clone(), format!("/sessions/{id}/players/t1"));
        tasks.push(tokio::spawn(async move { send(&app, Method::PATCH, &uri, json!({"purchase_price": 1500 + k})).await.0 }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.1["revision"], 16);
    let audit = get(&app, &format!("/sessions/{id}/audit")).await.1;
    let revisions: Vec<u64> = audit.as_array().unwrap().iter().map(|a| a["revision"].as_u64().unwrap()).collect();
    assert_eq!(revisions, (0..=16).collect::<Vec<_>>());
}

fn club_bundle() -> String {
    bundle_text(synthetic_club(2, 1))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn one_solve_at_a_time_with_polling() {
    let app = ftcp_service::router();
    let id = open(&app, club_bundle()).await;
    let body = json!({"gap": 0.0, "time_limit_secs": 1.0, "oos": 0});
    let (status, v) = send(&app, Method::POST, &format!("/sessions/{id}/solves"), body.clone()).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(v["state"], "running");
    let poll = v["poll"].as_str().unwrap().to_string();
    let (status, v) = send(&app, Method::POST, &format!("/sessions/{id}/solves"), body).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "solve 1 is still running");
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.1["active_solve"], 1);
    let entry = loop {
        let (status, v) = get(&app, &poll).await;
        if v["state"] != "running" {
            assert!(status == StatusCode::OK || status == StatusCode::ACCEPTED);
            break v;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    };
    assert_eq!(entry["solve"], 1);
    assert!(["optimal", "time_limit"].contains(&entry["state"].as_str().unwrap()));
    assert_eq!(get(&app, &format!("/sessions/{id}")).await.1["active_solve"], Value::Null);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn a_timed_out_solve_returns_its_partial_incumbent() {
    let app = ftcp_service::router();
    // Hard clubs under growing limits, until one stops with a squad in hand.
    let mut found = None;
    for (index, limit) in [4, 6, 7, 12, 18].into_iter().flat_map(|i| [0.1, 0.2, 0.4, 0.8].map(|l| (i, l))) {
        let id = open(&app, bundle_text(synthetic_club(index, 1))).await;
        let (status, e) = solve(&app, &id, json!({"gap": 0.0, "time_limit_secs": limit, "oos": 0})).await;
        if e["state"] == "time_limit" && !e["objective"].is_null() {
            assert_eq!(status, StatusCode::ACCEPTED);
            found = Some((id, e));
            break;
        }
        assert!(status == StatusCode::OK || status == StatusCode::ACCEPTED);
    }
    let (id, e) = found.expect("some club stops on the time limit with an incumbent");
    let objective = e["objective"].as_f64().unwrap();
    let bound = e["best_bound"].as_f64().unwrap();
    assert!(bound >= objective - 1e-9);
    assert!(e["gap"].as_f64().unwrap() > 0.0);
    assert!(e["solution"]["decisions"].is_array());
    assert_eq!(get(&app, &format!("/sessions/{id}/solves/1")).await.0, StatusCode::ACCEPTED);
}
