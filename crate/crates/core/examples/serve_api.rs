//! Drive the HTTP API in-process: save a prompt, read it back, preview it.
//!
//!     cargo run --example serve_api
//!
//! `promptforge serve --prompts DIR --data-root DIR --port 8080` runs the
//! same router on a socket.

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use promptforge::server::{router, ServiceConfig};
use serde_json::json;
use tower::ServiceExt;

async fn send(app: &axum::Router, method: &str, uri: &str, body: serde_json::Value) -> serde_json::Value {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(if body.is_null() { Body::empty() } else { Body::from(body.to_string()) })
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    println!("{method} {uri} -> {status}\n{}\n", serde_json::to_string_pretty(&value).unwrap());
    value
}

#[tokio::main]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    std::fs::write(
        dir.path().join("data/snli.jsonl"),
        "{\"premise\": \"A man plays guitar.\", \"hypothesis\": \"A man makes music.\", \"label\": 0}\n",
    )
    .unwrap();
    let app = router(ServiceConfig {
        prompts_root: dir.path().join("prompts"),
        data_root: dir.path().join("data"),
        static_dir: None,
    });

    let id = "3f2a9c1e-5b7d-4e8f-a1b2-c3d4e5f60718";
    let uri = format!("/api/datasets/snli/prompts/{id}");
    let prompt = json!({
        "name": "is it true",
        "reference": "",
        "original_task": true,
        "choices_in_prompt": false,
        "metrics": ["Accuracy"],
        "languages": ["en"],
        "answer_choices": "yes ||| maybe ||| no",
        "template": "If {{premise}} is true, is it also true that {{hypothesis}}? ||| {{ answer_choices[label] }}",
    });
    send(&app, "PUT", &uri, prompt).await;
    send(&app, "GET", &uri, json!(null)).await;
    send(&app, "GET", "/api/datasets", json!(null)).await;
    send(&app, "GET", "/api/datasets/snli/examples?offset=0&limit=5", json!(null)).await;
    send(&app, "POST", "/api/render", json!({"template": "Say {{ choice(['hi', 'hello']) }} to {{who}} ||| ok", "example": {"who": "Ada"}, "strategy": "seeded:3"})).await;
    send(&app, "POST", "/api/render", json!({"template": "Broken {{ who"})).await;
}
