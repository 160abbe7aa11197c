mod common;

use axum::http::{Method, StatusCode};
use axum::Router;
use common::{call, call_raw, save, snli_prompt, write_jsonl, Rng, SNLI_TEMPLATE};
use promptforge::prompt::{ChoiceStrategy, Prompt};
use promptforge::server::{router, ServiceConfig};
use promptforge::store;
use promptforge::template::{Map, Value as TValue};
use serde_json::{json, Value};
use tempfile::TempDir;

struct Fixture {
    _dir: TempDir,
    prompts_root: std::path::PathBuf,
    app: Router,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let prompts_root = dir.path().join("prompts");
    let data_root = dir.path().join("data");
    write_jsonl(
        &data_root.join("snli.jsonl"),
        (0..3).map(|i| json!({"premise": format!("P{i}"), "hypothesis": format!("H{i}"), "entailed": "yes"})),
    );
    write_jsonl(&data_root.join("glue/mrpc.jsonl"), (0..2).map(|i| json!({"s1": i, "s2": i})));
    let mut rng = Rng(7);
    save(&prompts_root, "snli", vec![snli_prompt(&mut rng)]);
    let app = router(ServiceConfig { prompts_root: prompts_root.clone(), data_root, static_dir: None });
    Fixture { _dir: dir, prompts_root, app }
}

fn prompt_body(id: &str, name: &str, template: &str) -> Value {
    json!({
        "id": id,
        "name": name,
        "reference": "",
        "original_task": true,
        "choices_in_prompt": false,
        "metrics": ["Accuracy"],
        "languages": ["en"],
        "answer_choices": "yes ||| no",
        "template": template,
    })
}

#[tokio::test]
async fn put_then_get_round_trips() {
    let f = fixture();
    let id = Rng(1).uuid();
    let body = prompt_body(&id, "paraphrase", "Do {{s1}} and {{s2}} mean the same? ||| {{label}}");
    let (status, saved) = call(&f.app, Method::PUT, &format!("/api/datasets/glue%2Fmrpc/prompts/{id}"), Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{saved}");
    assert_eq!(saved["prompt"], body);
    let (status, got) = call(&f.app, Method::GET, &format!("/api/datasets/glue%2Fmrpc/prompts/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, body);
    let on_disk = store::load_collection(&f.prompts_root, &"glue/mrpc".parse().unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&on_disk.prompts[0]).unwrap(), body);
}

#[tokio::test]
async fn put_without_id_uses_path_id() {
    let f = fixture();
    let id = Rng(2).uuid();
    let mut body = prompt_body(&id, "x", "Question {{q}} ||| {{a}}");
    body.as_object_mut().unwrap().remove("id");
    let (status, saved) = call(&f.app, Method::PUT, &format!("/api/datasets/snli/prompts/{id}"), Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(saved["prompt"]["id"], id);
}

#[tokio::test]
async fn put_reports_lint_findings() {
    let f = fixture();
    let id = Rng(3).uuid();
    let body = prompt_body(&id, "chatty", "Is {{premise}} true? ||| The answer is {{entailed}}");
    let (status, saved) = call(&f.app, Method::PUT, &format!("/api/datasets/snli/prompts/{id}"), Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let rules: Vec<&str> = saved["findings"].as_array().unwrap().iter().map(|f| f["rule"].as_str().unwrap()).collect();
    assert_eq!(rules, ["L005"]);
    assert_eq!(saved["findings"][0]["severity"], "WARNING");
}

#[tokio::test]
async fn put_rejects_duplicate_name() {
    let f = fixture();
    let id = Rng(4).uuid();
    let body = prompt_body(&id, "is it true", "Other {{premise}} ||| {{entailed}}");
    let (status, err) = call(&f.app, Method::PUT, &format!("/api/datasets/snli/prompts/{id}"), Some(body)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "DuplicateName");
    assert_eq!(err["status"], 409);
}

#[tokio::test]
async fn put_rejects_syntax_error_with_offset() {
    let f = fixture();
    let id = Rng(5).uuid();
    let body = prompt_body(&id, "broken", "Hello {{name");
    let (status, err) = call(&f.app, Method::PUT, &format!("/api/datasets/snli/prompts/{id}"), Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "SyntaxError");
    assert_eq!(err["offset"], 6);
}

#[tokio::test]
async fn put_rejects_bad_bodies() {
    let f = fixture();
    let id = Rng(6).uuid();
    let uri = format!("/api/datasets/snli/prompts/{id}");
    let (status, err) = call_raw(&f.app, Method::PUT, &uri, "{not json").await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("MalformedBody")));
    let (status, err) = call(&f.app, Method::PUT, &uri, Some(json!({"name": 3}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("SchemaError")));
    let other = Rng(60).uuid();
    let (status, err) = call(&f.app, Method::PUT, &uri, Some(prompt_body(&other, "n", "a {{b}} ||| c"))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("IdMismatch")));
}

#[tokio::test]
async fn render_matches_library() {
    let f = fixture();
    let example = json!({"premise": "P", "hypothesis": "H", "entailed": "yes"});
    let (status, body) = call(&f.app, Method::POST, "/api/render", Some(json!({"template": SNLI_TEMPLATE, "example": example}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["input"], "If P is true, is it also true that H?");
    assert_eq!(body["target"], "yes");

    let fields: Map = TValue::map_from_json(example.as_object().unwrap());
    let library = Prompt::new("x", SNLI_TEMPLATE).apply(&fields, 0, &ChoiceStrategy::FirstChoice).unwrap();
    assert_eq!(body["input"].as_str().unwrap().as_bytes(), library.emitted[0].input.as_bytes());
    assert_eq!(body["target"].as_str().unwrap().as_bytes(), library.emitted[0].target.as_bytes());
}

#[tokio::test]
async fn render_answer_choices_and_seeded_choice() {
    let f = fixture();
    let (_, body) = call(
        &f.app,
        Method::POST,
        "/api/render",
        Some(json!({"template": "{{ choice(['A','B']) }} {{q}} ||| {{a}}", "answer_choices": "yes ||| no", "example": {"q": "q", "a": "a"}, "strategy": "seeded:0"})),
    )
    .await;
    assert_eq!(body["input"], "B q");
    assert_eq!(body["answer_choices"], json!(["yes", "no"]));
    let (_, body) = call(
        &f.app,
        Method::POST,
        "/api/render",
        Some(json!({"template": "{{ choice(['A','B']) }} ||| x"})),
    )
    .await;
    assert_eq!(body["input"], "A");
}

#[tokio::test]
async fn render_errors_carry_offsets() {
    let f = fixture();
    let (status, err) = call(&f.app, Method::POST, "/api/render", Some(json!({"template": "{{"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "SyntaxError");
    assert_eq!(err["offset"], 0);

    let (status, err) = call(&f.app, Method::POST, "/api/render", Some(json!({"template": "ab {{missing}}"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "MissingField");
    assert_eq!(err["offset"], 3);

    let (_, err) = call(&f.app, Method::POST, "/api/render", Some(json!({"template": "a ||| b ||| c"}))).await;
    assert_eq!(err["code"], "MultipleSeparators");

    let (status, err) = call(&f.app, Method::POST, "/api/render", Some(json!({"template": "a", "strategy": "cross"}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("BadStrategy")));
}

#[tokio::test]
async fn render_blank_input_is_skipped() {
    let f = fixture();
    let (status, body) = call(
        &f.app,
        Method::POST,
        "/api/render",
        Some(json!({"template": "{% if ok %}Q {{x}} ||| y{% endif %}", "example": {"ok": false, "x": 1}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"skipped": true}));
}

#[tokio::test]
async fn datasets_are_listed_with_counts() {
    let f = fixture();
    let (status, body) = call(&f.app, Method::GET, "/api/datasets", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        body,
        json!([
            {"key": "glue/mrpc", "prompt_count": 0, "original_task_count": 0, "example_count": 2},
            {"key": "snli", "prompt_count": 1, "original_task_count": 1, "example_count": 3},
        ])
    );
}

#[tokio::test]
async fn examples_are_paged() {
    let f = fixture();
    let ordinals = |body: &Value| -> Vec<u64> {
        body["examples"].as_array().unwrap().iter().map(|e| e["ordinal"].as_u64().unwrap()).collect()
    };
    let (status, body) = call(&f.app, Method::GET, "/api/datasets/snli/examples?offset=0&limit=2", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ordinals(&body), [0, 1]);
    assert_eq!(body["examples"][1]["fields"]["premise"], "P1");
    let (_, body) = call(&f.app, Method::GET, "/api/datasets/snli/examples?offset=2&limit=2", None).await;
    assert_eq!(ordinals(&body), [2]);
    let (_, body) = call(&f.app, Method::GET, "/api/datasets/snli/examples?offset=99", None).await;
    assert_eq!(ordinals(&body), Vec::<u64>::new());
    let (_, body) = call(&f.app, Method::GET, "/api/datasets/glue%2Fmrpc/examples", None).await;
    assert_eq!(ordinals(&body), [0, 1]);

    for bad in ["limit=0", "limit=101", "offset=-1", "limit=x"] {
        let (status, err) = call(&f.app, Method::GET, &format!("/api/datasets/snli/examples?{bad}"), None).await;
        assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("BadPaging")), "{bad}");
    }
    let (status, _) = call(&f.app, Method::GET, "/api/datasets/nope/examples", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn collection_and_stats_endpoints() {
    let f = fixture();
    let (status, body) = call(&f.app, Method::GET, "/api/datasets/snli/prompts", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["dataset"], "snli");
    assert_eq!(body["prompts"][0]["template"], SNLI_TEMPLATE);
    let (_, body) = call(&f.app, Method::GET, "/api/datasets/fresh/prompts", None).await;
    assert_eq!(body["prompts"], json!([]));
    let (status, body) = call(&f.app, Method::GET, "/api/stats", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["prompt_count"], 1);
    assert_eq!(body["prompts_per_subset_mean"], 1.0);
}

#[tokio::test]
async fn unknown_routes_and_methods_are_json_errors() {
    let f = fixture();
    let (status, err) = call(&f.app, Method::GET, "/api/nothing", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::NOT_FOUND, Some("NotFound")));
    let (status, err) = call(&f.app, Method::DELETE, "/api/render", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::METHOD_NOT_ALLOWED, Some("MethodNotAllowed")));
    let (status, _) = call(&f.app, Method::GET, &format!("/api/datasets/snli/prompts/{}", Rng(9).uuid()), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, err) = call(&f.app, Method::GET, "/api/datasets/a%2Fb%2Fc/prompts", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("InvalidKey")));
}

#[tokio::test]
async fn static_bundle_is_served() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = router(ServiceConfig {
        prompts_root: dir.path().join("p"),
        data_root: dir.path().join("d"),
        static_dir: Some(dir.path().to_owned()),
    });
    let request = axum::http::Request::builder().uri("/browse/snli").body(axum::body::Body::empty()).unwrap();
    let response = tower::ServiceExt::oneshot(app, request).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let bytes = http_body_util::BodyExt::collect(response.into_body()).await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>ui</html>");
}
