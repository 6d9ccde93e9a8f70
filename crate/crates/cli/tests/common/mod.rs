//! Shared helpers for the CLI and HTTP tests: fixture paths, an in-process
//! command runner, a request helper over the router, and the endpoint
//! sequence fuzzer.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cascade_opt::{router, SessionStore};
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

pub fn fixture_json(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> CliOutput {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cascade-opt").chain(args.iter().copied());
    let code = cascade_opt::run(argv, &mut out, &mut err);
    CliOutput { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn app() -> Router {
    router(Arc::new(SessionStore::default()))
}

/// Sends one request; `body` is sent verbatim when it is a string.
pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let payload = match body {
        None => Body::empty(),
        Some(Value::String(raw)) => Body::from(raw),
        Some(v) => Body::from(v.to_string()),
    };
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(payload).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap()
}

// ---------------------------------------------------------------------------
// Endpoint sequence fuzzing.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Get,
    Sorting,
    Solve,
    Slacks,
    Delete,
    Unknown,
}

fn phase_of(view: &Value) -> &str {
    view["phase"].as_str().unwrap_or("?")
}

fn legal(op: Op, phase: &str) -> bool {
    matches!((op, phase), (Op::Sorting, "AwaitSortingSet") | (Op::Solve, "AwaitSolve") | (Op::Slacks, "AwaitSlacks"))
}

const SLACK_VALUES: [&str; 7] = ["0", "-1/2", "1/4", "1/2", "1", "3", "abc"];

fn random_slacks(rng: &mut ChaCha8Rng, owned: usize) -> Value {
    let side = |rng: &mut ChaCha8Rng| {
        let len = if rng.gen_bool(0.1) { owned + 1 } else { owned };
        Value::Array((0..len).map(|_| json!(SLACK_VALUES.choose(rng).unwrap())).collect())
    };
    if rng.gen_bool(0.03) {
        return Value::String("{\"l\": [".into());
    }
    json!({ "l": side(rng), "r": side(rng) })
}

fn random_init(rng: &mut ChaCha8Rng, view: &Value) -> Option<Value> {
    let vertices: Vec<&Value> = view["vertices"].as_array().unwrap().iter().map(|v| &v["x"]).collect();
    let n = vertices[0].as_array().unwrap().len();
    match rng.gen_range(0..6) {
        0 => None,
        1 => Some(json!({})),
        2 => Some(json!({ "init": vertices.choose(rng).unwrap() })),
        3 => {
            // Midpoint of two vertices: always in S, maybe outside the box.
            let (a, b) = (vertices.choose(rng).unwrap(), vertices.choose(rng).unwrap());
            let mid: Vec<String> = (0..n)
                .map(|j| {
                    let p = cascade_core::parse_scalar::<cascade_core::Rational>(a[j].as_str().unwrap()).unwrap();
                    let q = cascade_core::parse_scalar::<cascade_core::Rational>(b[j].as_str().unwrap()).unwrap();
                    ((p + q) / cascade_core::Rational::from_integer(2.into())).to_string()
                })
                .collect();
            Some(json!({ "init": mid }))
        }
        4 => Some(json!({ "init": vec!["1"; n + 1] })),
        _ => Some(json!({ "init": (0..n).map(|_| rng.gen_range(-2..9).to_string()).collect::<Vec<_>>() })),
    }
}

fn is_le(a: &Value, b: &Value) -> bool {
    let parse = |v: &Value| -> Vec<cascade_core::Rational> {
        v.as_array().unwrap().iter().map(|s| cascade_core::parse_scalar(s.as_str().unwrap()).unwrap()).collect()
    };
    let (a, b) = (parse(a), parse(b));
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x <= y)
}

/// Checks one successful transition against the legal chain.
fn check_success(op: Op, before: &Value, after: &Value) -> Result<(), String> {
    let (pb, pa) = (phase_of(before), phase_of(after));
    let levels = before["num_levels"].as_u64().unwrap();
    let (lb, la) = (before["current_level"].as_u64().unwrap(), after["current_level"].as_u64().unwrap());
    let (cb, ca) = (before["compromises"].as_array().unwrap().len(), after["compromises"].as_array().unwrap().len());
    let (tb, ta) = (before["trace"].as_array().unwrap().len(), after["trace"].as_array().unwrap().len());
    let ok = match op {
        Op::Sorting => pa == "AwaitSolve" && la == 1 && ca == 0 && ta == tb + 1 && after["bounds"] == after["initial_bounds"],
        Op::Solve => {
            let next = if lb == levels { "Done" } else { "AwaitSlacks" };
            pa == next && la == lb && ca == cb + 1 && ta == tb + 1
        }
        Op::Slacks => pa == "AwaitSolve" && la == lb + 1 && ca == cb && ta == tb + 1,
        _ => before == after,
    };
    if !ok {
        return Err(format!("{op:?} moved {pb} (level {lb}) to {pa} (level {la})"));
    }
    if let (Some(init), Some(cur)) = (after["initial_bounds"].as_object(), after["bounds"].as_object()) {
        if !(is_le(&init["l"], &cur["l"]) && is_le(&cur["l"], &cur["u"]) && is_le(&cur["u"], &init["u"])) {
            return Err(format!("bounds {} escape the initial box {}", after["bounds"], after["initial_bounds"]));
        }
    }
    if op == Op::Solve {
        let x = after["compromises"].as_array().unwrap().last().unwrap();
        let b = &before["bounds"];
        if !(is_le(&b["l"], x) && is_le(x, &b["u"])) {
            return Err(format!("compromise {x} outside the level box {b}"));
        }
    }
    if (pa == "Done") != after["final"].is_object() {
        return Err(format!("final compromise present in phase {pa}"));
    }
    Ok(())
}

/// Runs `sequences` random call sequences against a fresh router and checks
/// that every session only moves along the legal chain and that every failed
/// call leaves it unchanged.
pub async fn fuzz_endpoints(sequences: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let app = app();
    let problems = [fixture_json("two-level.json"), fixture_json("three-level.json")];
    let (mut calls, mut rejected, mut finished) = (0usize, 0usize, 0usize);
    for seq in 0..sequences {
        let (status, mut view) = call(&app, Method::POST, "/sessions", Some(problems.choose(&mut rng).unwrap().clone())).await;
        if status != StatusCode::CREATED || phase_of(&view) != "AwaitSortingSet" {
            return Err(format!("sequence {seq}: create gave {status} {view}"));
        }
        let id = view["id"].as_str().unwrap().to_string();
        let mut alive = true;
        for step in 0..rng.gen_range(1..16) {
            let op = *[Op::Get, Op::Sorting, Op::Sorting, Op::Solve, Op::Solve, Op::Solve, Op::Slacks, Op::Slacks, Op::Slacks, Op::Unknown]
                .choose(&mut rng)
                .unwrap();
            let op = if rng.gen_bool(0.01) { Op::Delete } else { op };
            let base = format!("/sessions/{id}");
            let (status, body) = match op {
                Op::Get => call(&app, Method::GET, &base, None).await,
                Op::Unknown => call(&app, Method::GET, "/sessions/not-a-session", None).await,
                Op::Delete => call(&app, Method::DELETE, &base, None).await,
                Op::Sorting => {
                    let faces = view["sorting_candidates"].as_array().unwrap().len();
                    let index = rng.gen_range(0..=faces + 1);
                    call(&app, Method::POST, &format!("{base}/sorting-set"), Some(json!({ "index": index }))).await
                }
                Op::Solve => {
                    let body = random_init(&mut rng, &view);
                    call(&app, Method::POST, &format!("{base}/solve"), body).await
                }
                Op::Slacks => {
                    let level = view["current_level"].as_u64().unwrap() as usize;
                    let owned = view["num_vars"][level.saturating_sub(1)].as_u64().unwrap_or(1) as usize;
                    let body = random_slacks(&mut rng, owned);
                    call(&app, Method::POST, &format!("{base}/slacks"), Some(body)).await
                }
            };
            calls += 1;
            let at = |msg: String| format!("sequence {seq} step {step} {op:?}: {msg}");
            if !alive {
                // Bodies are parsed before the id is looked up.
                if op != Op::Unknown && status != StatusCode::NOT_FOUND && status != StatusCode::BAD_REQUEST {
                    return Err(at(format!("deleted session answered {status}")));
                }
                continue;
            }
            match op {
                Op::Unknown => {
                    if status != StatusCode::NOT_FOUND {
                        return Err(at(format!("unknown id gave {status}")));
                    }
                    continue;
                }
                Op::Delete => {
                    if status != StatusCode::NO_CONTENT {
                        return Err(at(format!("delete gave {status}")));
                    }
                    alive = false;
                    continue;
                }
                _ => {}
            }
            let (gs, current) = call(&app, Method::GET, &base, None).await;
            if gs != StatusCode::OK {
                return Err(at(format!("get after call gave {gs}")));
            }
            if status.is_success() {
                check_success(op, &view, &current).map_err(at)?;
                let returned = if op == Op::Solve { &body["session"] } else { &body };
                if *returned != current {
                    return Err(at("response view differs from the stored session".into()));
                }
            } else {
                rejected += 1;
                if current != view {
                    return Err(at(format!("failed call ({status}, {}) changed the session", body["error"])));
                }
                let expect_conflict = !legal(op, phase_of(&view));
                let code = status.as_u16();
                if expect_conflict && code != 409 && code != 400 {
                    return Err(at(format!("out-of-phase call gave {status}")));
                }
                if !expect_conflict && !matches!(code, 400 | 422) {
                    return Err(at(format!("in-phase failure gave {status}")));
                }
                if body["error"].as_str().is_none_or(str::is_empty) {
                    return Err(at(format!("error body without a kind: {body}")));
                }
            }
            view = current;
        }
        if phase_of(&view) == "Done" {
            finished += 1;
        }
        if alive {
            let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
            if status != StatusCode::NO_CONTENT {
                return Err(format!("sequence {seq}: cleanup delete gave {status}"));
            }
        }
    }
    Ok(format!("{sequences} sequences, {calls} calls, {rejected} rejected, {finished} sessions reached Done"))
}
