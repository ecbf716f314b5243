use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use xfam_cli::server::{router, AppState, Upstream, COMPLETIONS_PATH, COMPRESS_PATH};
use xfam_core::bench::ProviderSource;
use xfam_core::config::{ConfigOverrides, Profiles};
use xfam_core::corpus::text_corpus;
use xfam_core::tokenizer::load_tokenizer;

fn state(max_input_bytes: usize, upstream: Option<String>) -> Arc<AppState> {
    Arc::new(AppState {
        profiles: Profiles::default(),
        overrides: ConfigOverrides::default(),
        source: ProviderSource::Synthetic { seed: 3 },
        draft: load_tokenizer("whitespace").unwrap(),
        target: load_tokenizer("bytes:3").unwrap(),
        max_input_bytes,
        upstream: upstream.map(Upstream::new),
    })
}

async fn spawn(app: Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

async fn post_json(url: String, body: &Value) -> (u16, Value) {
    let resp = reqwest::Client::new().post(url).json(body).send().await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap())
}

#[tokio::test]
async fn full_keep_round_trips_text() {
    let addr = spawn(router(state(1 << 20, None))).await;
    let text = "Some text,  with spacing\nand lines. ".repeat(40);
    let (status, body) = post_json(format!("http://{addr}{COMPRESS_PATH}"), &json!({"text": text, "keep_rate": 1.0})).await;
    assert_eq!(status, 200);
    assert_eq!(body["text"], Value::String(text));
    assert_eq!(body["keep_rate"], 1.0);
}

const RATES: [f64; 3] = [0.2, 0.3, 0.5];

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_burst_is_deterministic() {
    let app_state = state(1 << 22, None);
    let addr = spawn(router(Arc::clone(&app_state))).await;
    let samples = text_corpus(32, 17, 400..1500);
    let url = format!("http://{addr}{COMPRESS_PATH}");
    let requests = samples.iter().enumerate().map(|(i, s)| {
        let rho = RATES[i % 3];
        let body = json!({"text": s.prompt, "keep_rate": rho});
        let url = url.clone();
        tokio::spawn(async move { post_json(url, &body).await })
    });
    let responses: Vec<(u16, Value)> = futures_join(requests.collect()).await;
    for (i, (status, body)) in responses.into_iter().enumerate() {
        assert_eq!(status, 200, "request {i}: {body}");
        let keep = xfam_cli::server::KeepSettings { keep_rate: Some(RATES[i % 3]), ..Default::default() };
        let state = Arc::clone(&app_state);
        let prompt = samples[i].prompt.clone();
        let alone = tokio::task::spawn_blocking(move || state.compress(prompt, &keep).unwrap()).await.unwrap();
        assert_eq!(body["text"], Value::String(alone.text), "request {i}");
    }
}

async fn futures_join<T>(handles: Vec<tokio::task::JoinHandle<T>>) -> Vec<T> {
    let mut out = Vec::with_capacity(handles.len());
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn bad_requests_get_typed_errors() {
    let addr = spawn(router(state(2048, None))).await;
    let url = format!("http://{addr}{COMPRESS_PATH}");
    let client = reqwest::Client::new();

    let resp = client.post(&url).body("{not json").send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["error"]["class"], "invalid-input");

    let (status, body) = post_json(url.clone(), &json!({"text": "a b", "keep_rate": 0.3, "target_length": 9})).await;
    assert_eq!(status, 400);
    assert_eq!(body["error"]["class"], "invalid-config");

    let resp = client.post(&url).json(&json!({"text": "x".repeat(4096)})).send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 413);
}

async fn echo_upstream(Json(body): Json<Value>) -> String {
    format!("completion for: {}", body["prompt"].as_str().unwrap_or_default())
}

#[tokio::test]
async fn passthrough_forwards_compressed_prompt() {
    let upstream = spawn(Router::new().route("/v1/completions", post(echo_upstream))).await;
    let addr = spawn(router(state(1 << 20, Some(format!("http://{upstream}/v1/completions"))))).await;
    let prompt = text_corpus(1, 4, 800..900).remove(0).prompt;
    let resp = reqwest::Client::new()
        .post(format!("http://{addr}{COMPLETIONS_PATH}"))
        .json(&json!({"model": "m", "prompt": prompt, "compression": {"keep_rate": 0.3}}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let rate: f64 = resp.headers()["x-xfam-keep-rate"].to_str().unwrap().parse().unwrap();
    assert!(rate < 0.5);
    let text = resp.text().await.unwrap();
    let forwarded = text.strip_prefix("completion for: ").unwrap();
    assert!(forwarded.contains("[...]"));
    assert!(forwarded.len() < prompt.len() / 2);
}

#[tokio::test]
async fn unreachable_upstream_is_bad_gateway() {
    let addr = spawn(router(state(1 << 20, Some("http://127.0.0.1:1/v1/completions".into())))).await;
    let (status, body) =
        post_json(format!("http://{addr}{COMPLETIONS_PATH}"), &json!({"prompt": "word ".repeat(100)})).await;
    assert_eq!(status, 502);
    assert_eq!(body["error"]["class"], "upstream");
}

#[tokio::test]
async fn unknown_request_fields_are_rejected() {
    let addr = spawn(router(state(1 << 20, None))).await;
    let (status, body) =
        post_json(format!("http://{addr}{COMPRESS_PATH}"), &json!({"text": "a b c", "keep_rat": 0.3})).await;
    assert_eq!(status, 400);
    assert!(body["error"]["message"].as_str().unwrap().contains("keep_rat"));
}
