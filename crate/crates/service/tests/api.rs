use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use nsp_core::generator::{generate, priorities_for, GeneratorConfig};
use nsp_core::model::{CellShift, Kind, Side, StaffBound};
use nsp_core::search::{solve_collect, CellDirectives, SearchConfig, Strategy, TimeModel};
use nsp_core::Instance;
use nsp_service::{router, AppState, ServiceConfig};

const TOY3: &str = include_str!("../../core/testdata/toy3.json");
const TOKEN: &str = "test-token";

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(config).unwrap())
}

fn app() -> Router {
    app_with(ServiceConfig { token: Some(TOKEN.into()), ..ServiceConfig::default() })
}

fn toy3() -> Value {
    serde_json::from_str(TOY3).unwrap()
}

fn contradictory() -> Value {
    let mut doc = Instance::from_json(TOY3).unwrap().document().clone();
    doc.pos_requests.push(CellShift::new("n1", 0, "D"));
    doc.bounds.staff.push(StaffBound {
        kind: Kind::Hard,
        group: "senior".into(),
        shift_group: "WORK".into(),
        day: 0,
        side: Side::Upper,
        limit: 0,
    });
    doc.priorities = priorities_for(&doc);
    serde_json::to_value(&doc).unwrap()
}

/// Wall-clock LNPS session config.
fn wall_config(limit: f64, soften: bool) -> Value {
    json!({
        "strategy": "lnps",
        "restart_interval_seconds": 10.0,
        "time_limit_seconds": limit,
        "random_seed": 3,
        "soften_hard": soften,
    })
}

fn virtual_config(seed: u64) -> SearchConfig {
    let mut cfg = SearchConfig::new(Strategy::Lnps { restart_interval_seconds: 0.2 }, 1.0, seed);
    cfg.time_model = TimeModel::Iterations { per_second: 50_000 };
    cfg
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri).header("authorization", format!("Bearer {TOKEN}"));
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, instance: Value, config: Value) -> String {
    let (status, body) = call(app, Method::POST, "/sessions", Some(json!({ "instance": instance, "config": config }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

async fn command(app: &Router, id: &str, cmd: Value) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/sessions/{id}/control"), Some(cmd)).await
}

async fn solution(app: &Router, id: &str) -> Value {
    let (status, body) = call(app, Method::GET, &format!("/sessions/{id}/solution"), None).await;
    assert_eq!(status, StatusCode::OK);
    body
}

async fn wait_for(app: &Router, id: &str, what: &str, pred: impl Fn(&Value) -> bool) -> Value {
    for _ in 0..600 {
        let s = solution(app, id).await;
        if pred(&s) {
            return s;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("timed out waiting for {what}");
}

/// Reads server-sent events until `end` or until `limit` events arrived.
async fn read_events(app: &Router, uri: &str, limit: usize) -> Vec<(String, Value)> {
    let req = Request::builder()
        .uri(uri)
        .header("authorization", format!("Bearer {TOKEN}"))
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();
    let mut buf = String::new();
    let mut out = Vec::new();
    loop {
        while let Some(pos) = buf.find("\n\n") {
            let block: String = buf.drain(..pos + 2).collect();
            let mut name = String::from("message");
            let mut data = String::new();
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event:") {
                    name = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if data.is_empty() {
                continue;
            }
            let end = name == "end";
            out.push((name, serde_json::from_str(&data).unwrap()));
            if end || out.len() >= limit {
                return out;
            }
        }
        let frame = tokio::time::timeout(Duration::from_secs(30), body.frame())
            .await
            .expect("event stream stalled");
        match frame {
            Some(f) => {
                if let Ok(bytes) = f.unwrap().into_data() {
                    buf.push_str(std::str::from_utf8(&bytes).unwrap());
                }
            }
            None => return out,
        }
    }
}

fn cell<'a>(incumbent: &'a Value, nurse: &str, day: i64) -> &'a str {
    incumbent["roster"]["cells"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["nurse"] == nurse && c["day"] == day)
        .unwrap()["shift"]
        .as_str()
        .unwrap()
}

#[tokio::test]
async fn healthz_is_open_and_sessions_need_the_token() {
    let app = app();
    let req = Request::builder().uri("/healthz").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);

    let req = Request::builder().uri("/sessions").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNAUTHORIZED);
    let body: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(body["code"], "unauthorized");

    let req = Request::builder()
        .uri("/sessions")
        .header("authorization", "Bearer wrong")
        .body(Body::empty())
        .unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::UNAUTHORIZED);

    let (status, body) = call(&app, Method::GET, "/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
}

#[tokio::test]
async fn create_returns_distinct_ids_in_created_state() {
    let app = app();
    let a = create(&app, toy3(), wall_config(5.0, false)).await;
    let b = create(&app, toy3(), wall_config(5.0, false)).await;
    assert_ne!(a, b);
    let (status, view) = call(&app, Method::GET, &format!("/sessions/{a}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["state"], "created");
    assert_eq!(view["incumbents"], 0);
}

#[tokio::test]
async fn malformed_documents_are_rejected_with_a_report() {
    let app = app();
    let mut bad = toy3();
    bad["nurse_groups"]["senior"] = json!(["nobody"]);
    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({ "instance": bad, "config": wall_config(5.0, false) }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_instance");
    assert!(!body["details"]["errors"].as_array().unwrap().is_empty());
    assert!(body["message"].as_str().unwrap().contains("nobody"), "{body}");

    let mut typo = toy3();
    typo["shifts"][0]["klass"] = json!("sleep");
    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({ "instance": typo, "config": wall_config(5.0, false) }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_instance");
    assert!(body["details"]["errors"][0]["path"].as_str().unwrap().contains("shifts"), "{body}");

    let (status, body) = call(&app, Method::POST, "/sessions", Some(json!({ "instance": toy3() }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_request");

    let config = json!({ "strategy": "lnps", "restart_interval_seconds": 10.0, "time_limit_seconds": -1.0 });
    let (status, body) = call(&app, Method::POST, "/sessions", Some(json!({ "instance": toy3(), "config": config }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_config");
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let app = app();
    for (method, uri, body) in [
        (Method::GET, "/sessions/nope", None),
        (Method::GET, "/sessions/nope/solution", None),
        (Method::GET, "/sessions/nope/events", None),
        (Method::POST, "/sessions/nope/control", Some(json!({ "command": "start" }))),
        (Method::PATCH, "/sessions/nope/directives", Some(json!({}))),
    ] {
        let (status, body) = call(&app, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(body["code"], "not_found");
        assert_eq!(body["details"]["session_id"], "nope");
    }
}

#[tokio::test]
async fn lifecycle_follows_the_state_machine() {
    let app = app();
    let id = create(&app, toy3(), wall_config(30.0, false)).await;

    for cmd in ["pause", "resume", "stop"] {
        let (status, body) = command(&app, &id, json!({ "command": cmd })).await;
        assert_eq!(status, StatusCode::CONFLICT, "{cmd} on created");
        assert_eq!(body["code"], "conflict");
        assert_eq!(body["details"]["state"], "created");
    }
    let (status, body) = command(&app, &id, json!({ "command": "start" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["state"], "running");
    assert_eq!(command(&app, &id, json!({ "command": "start" })).await.0, StatusCode::CONFLICT);

    assert_eq!(command(&app, &id, json!({ "command": "pause" })).await.1["state"], "paused");
    let (status, body) = command(&app, &id, json!({ "command": "pause" })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["details"]["state"], "paused");

    assert_eq!(command(&app, &id, json!({ "command": "resume" })).await.1["state"], "running");
    assert_eq!(command(&app, &id, json!({ "command": "stop" })).await.1["state"], "stopped");
    for cmd in ["start", "pause", "resume", "stop"] {
        assert_eq!(command(&app, &id, json!({ "command": cmd })).await.0, StatusCode::CONFLICT, "{cmd} on stopped");
    }
    let (status, body) = command(&app, &id, json!({ "command": "dance" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_command");
}

#[tokio::test]
async fn soften_on_an_unsatisfiable_instance_yields_hard_penalties() {
    let app = app();
    let id = create(&app, contradictory(), wall_config(30.0, false)).await;
    command(&app, &id, json!({ "command": "start" })).await;
    tokio::time::sleep(Duration::from_millis(300)).await;
    assert!(solution(&app, &id).await["incumbent"].is_null());

    let (status, body) = command(&app, &id, json!({ "command": "soften", "flag": true })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["state"], "running");
    let s = wait_for(&app, &id, "a softened incumbent", |s| !s["incumbent"].is_null()).await;
    let inc = &s["incumbent"];
    assert!(inc["hard_weight"].as_u64().unwrap() > 0);
    assert_eq!(inc["soften_hard"], true);
    assert_eq!(inc["report"]["feasible"], true);
    assert!(inc["report"]["violations"].as_array().unwrap().iter().any(|v| v["kind"] == "hard"));
    let (_, view) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(view["config"]["soften_hard"], true);
    command(&app, &id, json!({ "command": "stop" })).await;
}

#[tokio::test]
async fn directive_patches_require_a_pause_and_apply_on_resume() {
    let app = app();
    let id = create(&app, toy3(), wall_config(60.0, true)).await;
    let uri = format!("/sessions/{id}/directives");
    command(&app, &id, json!({ "command": "start" })).await;
    wait_for(&app, &id, "a first incumbent", |s| !s["incumbent"].is_null()).await;

    let fix = json!({ "fix": [{ "nurse": "n1", "day": 1, "shift": "D" }] });
    let (status, body) = call(&app, Method::PATCH, &uri, Some(fix.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["details"]["state"], "running");

    command(&app, &id, json!({ "command": "pause" })).await;
    let bad = json!({ "fix": [{ "nurse": "n1", "day": 2, "shift": "D" }, { "nurse": "n9", "day": 0, "shift": "D" }] });
    let (status, body) = call(&app, Method::PATCH, &uri, Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["code"], "invalid_directives");
    let (_, unchanged) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(unchanged["fixed"], json!([]), "a rejected patch changes nothing");

    let patch = json!({
        "fix": [{ "nurse": "n1", "day": 1, "shift": "D" }],
        "set_request": [{ "nurse": "n2", "day": 4, "shift": "N", "polarity": "neg" }],
    });
    let (status, body) = call(&app, Method::PATCH, &uri, Some(patch)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 1);
    let before = solution(&app, &id).await["incumbent"]["sequence"].as_u64().unwrap();

    command(&app, &id, json!({ "command": "resume" })).await;
    let after = wait_for(&app, &id, "an incumbent after the restart", |s| {
        s["incumbent"]["sequence"].as_u64().unwrap() > before
    })
    .await;
    command(&app, &id, json!({ "command": "pause" })).await;
    let last = after["incumbent"]["sequence"].as_u64().unwrap();
    let uri = format!("/sessions/{id}/events?from_sequence={}", before + 1);
    let events = read_events(&app, &uri, (last - before) as usize).await;
    assert_eq!(events.len() as u64, last - before);
    for (_, inc) in &events {
        assert_eq!(cell(inc, "n1", 1), "D");
        let neg_broken = inc["report"]["violations"].as_array().unwrap().iter().any(|v| v["reason"] == "neg_request");
        assert!(cell(inc, "n2", 4) != "N" || neg_broken);
    }
    command(&app, &id, json!({ "command": "stop" })).await;
}

#[tokio::test]
async fn clearing_a_range_drops_its_prioritization() {
    let app = app();
    let mut prioritized = Vec::new();
    for n in ["n1", "n2", "n3"] {
        for d in 0..7 {
            prioritized.push(json!({ "nurse": n, "day": d, "shift": if d < 5 { "WR" } else { "PH" } }));
        }
    }
    let body = json!({
        "instance": toy3(),
        "config": { "strategy": "mp", "mp_priority": "lowest", "time_limit_seconds": 30.0, "soften_hard": true },
        "directives": { "prioritized": prioritized },
    });
    let (status, created) = call(&app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["id"].as_str().unwrap();
    let clear: Vec<Value> = ["n1", "n2", "n3"]
        .iter()
        .flat_map(|n| (4..7).map(move |d| json!({ "nurse": n, "day": d })))
        .collect();
    let (status, body) = call(&app, Method::PATCH, &format!("/sessions/{id}/directives"), Some(json!({ "clear": clear }))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let dirs = &body["directives"];
    assert_eq!(dirs["cleared"].as_array().unwrap().len(), 9);
    assert_eq!(dirs["prioritized"].as_array().unwrap().len(), 12);
    assert!(dirs["prioritized"].as_array().unwrap().iter().all(|c| c["day"].as_i64().unwrap() < 4));

    command(&app, id, json!({ "command": "start" })).await;
    let s = wait_for(&app, id, "an incumbent", |s| !s["incumbent"].is_null()).await;
    assert_eq!(s["incumbent"]["prioritized_count"], 12);
    command(&app, id, json!({ "command": "stop" })).await;
}

#[tokio::test]
async fn stopped_sessions_replay_then_end() {
    let app = app();
    let mut cfg = virtual_config(5);
    cfg.soften_hard = true;
    let inst = generate(&GeneratorConfig::tiny(8, 7, 42)).unwrap();
    let id = create(&app, serde_json::from_str(&inst.to_json()).unwrap(), serde_json::to_value(cfg).unwrap()).await;
    command(&app, &id, json!({ "command": "start" })).await;
    wait_for(&app, &id, "the session to finish", |s| s["state"] == "stopped").await;

    let events = read_events(&app, &format!("/sessions/{id}/events?from_sequence=0"), usize::MAX).await;
    let (last, incumbents) = events.split_last().unwrap();
    assert_eq!(last.0, "end");
    assert!(incumbents.len() >= 3, "only {} incumbents", incumbents.len());
    assert!(incumbents.iter().all(|(name, _)| name == "incumbent"));
    let seqs: Vec<u64> = incumbents.iter().map(|(_, e)| e["sequence"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>());

    let tail = read_events(&app, &format!("/sessions/{id}/events?from_sequence={}", seqs.len() - 1), usize::MAX).await;
    assert_eq!(tail.len(), 3);
    assert_eq!(tail[0].1["sequence"], seqs.len() as u64 - 1);
    assert_eq!(tail[2].0, "end");
}

#[tokio::test]
async fn live_stream_replays_then_follows() {
    let app = app();
    let id = create(&app, toy3(), wall_config(30.0, true)).await;
    command(&app, &id, json!({ "command": "start" })).await;
    wait_for(&app, &id, "a first incumbent", |s| !s["incumbent"].is_null()).await;
    command(&app, &id, json!({ "command": "pause" })).await;
    let have = solution(&app, &id).await["incumbent"]["sequence"].as_u64().unwrap();

    let reader = {
        let app = app.clone();
        let uri = format!("/sessions/{id}/events?from_sequence=0");
        tokio::spawn(async move { read_events(&app, &uri, usize::MAX).await })
    };
    tokio::time::sleep(Duration::from_millis(200)).await;
    command(&app, &id, json!({ "command": "stop" })).await;
    let events = reader.await.unwrap();
    assert_eq!(events.last().unwrap().0, "end");
    assert_eq!(events.len() as u64, have + 1);
}

/// Interleaved sessions on the virtual clock reproduce the standalone
/// search exactly.
#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn interleaved_sessions_are_isolated() {
    let app = app();
    let inst = Instance::from_json(TOY3).unwrap();
    let seeds = [11u64, 12, 13];
    let mut ids = Vec::new();
    for &s in &seeds {
        let mut cfg = virtual_config(s);
        cfg.time_limit_seconds = 10.0;
        ids.push(create(&app, toy3(), serde_json::to_value(cfg).unwrap()).await);
    }
    for id in &ids {
        command(&app, id, json!({ "command": "start" })).await;
    }
    for _ in 0..3 {
        for id in &ids {
            if command(&app, id, json!({ "command": "pause" })).await.0 == StatusCode::OK {
                command(&app, id, json!({ "command": "resume" })).await;
            }
        }
    }
    for (id, &seed) in ids.iter().zip(&seeds) {
        wait_for(&app, id, "the session to finish", |s| s["state"] == "stopped").await;
        let mut cfg = virtual_config(seed);
        cfg.time_limit_seconds = 10.0;
        let (expected, _) = solve_collect(&inst, &cfg, &CellDirectives::default()).unwrap();
        let events = read_events(&app, &format!("/sessions/{id}/events"), usize::MAX).await;
        let got: Vec<&Value> = events.iter().filter(|(n, _)| n == "incumbent").map(|(_, e)| e).collect();
        assert_eq!(got.len(), expected.len(), "session {id}");
        for (g, e) in got.iter().zip(&expected) {
            assert_eq!(g["record"]["penalty_vector"], serde_json::to_value(&e.penalties).unwrap());
            assert_eq!(g["roster"], serde_json::to_value(e.roster.to_document(&inst)).unwrap());
        }
    }
}

#[tokio::test]
async fn sessions_recover_paused_with_their_latest_incumbent() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { store_dir: Some(dir.path().join("live")), ..ServiceConfig::default() };
    let state = AppState::new(config).unwrap();
    let app = router(state.clone());
    let run = create(&app, toy3(), wall_config(60.0, true)).await;
    let idle = create(&app, toy3(), wall_config(60.0, false)).await;
    command(&app, &run, json!({ "command": "start" })).await;
    wait_for(&app, &run, "incumbents", |s| s["incumbent"]["sequence"].as_u64().is_some_and(|q| q >= 2)).await;
    command(&app, &run, json!({ "command": "pause" })).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let before = solution(&app, &run).await;

    // A copy of the store stands in for the state a crashed process left.
    let copy = dir.path().join("copy");
    copy_dir(&dir.path().join("live"), &copy);
    let recovered = router(AppState::new(ServiceConfig { store_dir: Some(copy), ..ServiceConfig::default() }).unwrap());
    let r = solution(&recovered, &run).await;
    assert_eq!(r["state"], "paused");
    assert_eq!(r["incumbent"], before["incumbent"]);
    assert_eq!(solution(&recovered, &idle).await["state"], "created");

    let (status, body) = command(&recovered, &run, json!({ "command": "resume" })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let seq = before["incumbent"]["sequence"].as_u64().unwrap();
    let s = wait_for(&recovered, &run, "an incumbent after recovery", |s| {
        s["incumbent"]["sequence"].as_u64().unwrap() > seq
    })
    .await;
    assert!(s["incumbent"]["epoch"].as_u64().unwrap() > before["incumbent"]["epoch"].as_u64().unwrap());
    command(&recovered, &run, json!({ "command": "stop" })).await;
    command(&app, &run, json!({ "command": "stop" })).await;
    drop(state);
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            std::fs::copy(e.path(), target).unwrap();
        }
    }
}

#[test]
fn event_log_marks_gaps_then_resumes_from_the_snapshot() {
    use futures::StreamExt;
    use nsp_core::constraints::{evaluate, Report};
    use nsp_service::{EventLog, IncumbentEvent, StreamItem};

    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    rt.block_on(async {
        let inst = Instance::from_json(TOY3).unwrap();
        let (incs, _) = solve_collect(&inst, &virtual_config(1), &CellDirectives::default()).unwrap();
        let inc = &incs[0];
        let template = IncumbentEvent {
            sequence: 0,
            epoch: 0,
            record: inc.record("#roster"),
            hard_weight: inc.hard_weight,
            prioritized_count: 0,
            modification_rate: None,
            soften_hard: false,
            roster: inc.roster.to_document(&inst),
            report: Report::new(&evaluate(&inc.roster, &inst, false), &inst),
        };

        let log = Arc::new(EventLog::new(2, Vec::new(), false));
        let push = |log: &EventLog| {
            log.push(|sequence| {
                let mut e = template.clone();
                e.sequence = sequence;
                e
            })
            .unwrap()
        };
        push(&log);
        let mut stream = Box::pin(log.stream(0));
        for _ in 0..6 {
            push(&log);
        }
        let seq = |item: Option<StreamItem>| match item {
            Some(StreamItem::Incumbent(e)) => e.sequence,
            other => panic!("expected an incumbent, got {other:?}"),
        };
        assert_eq!(seq(stream.next().await), 1);
        assert_eq!(stream.next().await, Some(StreamItem::Gap { missed: 4, last_seen: 1 }));
        assert_eq!(seq(stream.next().await), 7);
        push(&log);
        assert_eq!(seq(stream.next().await), 8);
        log.close();
        assert_eq!(stream.next().await, Some(StreamItem::End));
        assert_eq!(stream.next().await, None);
        assert!(log.push(|_| template.clone()).is_none());
    });
}
