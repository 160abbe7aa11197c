//! JSON API for the authoring UI, plus static hosting of the UI bundle.
//!
//! Dataset keys with a subset travel percent-encoded in paths
//! (`super_glue%2Frte`).

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value as JsonValue};
use tower_http::services::{ServeDir, ServeFile};

use crate::lint::{self, LintFinding};
use crate::materialize::{open_jsonl, ExampleRecord, JsonlError};
use crate::prompt::{ApplyErrorKind, AnswerChoicesError, ChoiceStrategy, CompiledPrompt, Prompt, PromptError};
use crate::store::{self, DatasetKey, PromptCollection, StoreError};
use crate::template::{self, RenderErrorKind, Value};

pub const DEFAULT_PAGE_SIZE: usize = 10;
pub const MAX_PAGE_SIZE: usize = 100;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub prompts_root: PathBuf,
    /// Holds `<dataset>.jsonl` and `<dataset>/<subset>.jsonl` files.
    pub data_root: PathBuf,
    pub static_dir: Option<PathBuf>,
}

struct AppState {
    config: ServiceConfig,
    write_locks: Mutex<HashMap<DatasetKey, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    fn write_lock(&self, key: &DatasetKey) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.write_locks.lock().expect("lock map poisoned");
        locks.entry(key.clone()).or_default().clone()
    }
}

type Shared = Arc<AppState>;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(serialize_with = "serialize_status")]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

fn serialize_status<S: serde::Serializer>(status: &StatusCode, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u16(status.as_u16())
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.to_owned(), message: message.into(), offset: None }
    }

    fn with_offset(mut self, offset: Option<usize>) -> Self {
        self.offset = offset;
        self
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn unprocessable(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateName(_) => Self::new(StatusCode::CONFLICT, "DuplicateName", e.to_string()),
            StoreError::InvalidKey(_) => Self::bad_request("InvalidKey", e.to_string()),
            StoreError::NotFound(_) => Self::not_found(e.to_string()),
            StoreError::Schema { .. } | StoreError::Template { .. } => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "StoreCorrupt", e.to_string()),
            StoreError::Io { .. } => Self::internal(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

pub fn router(config: ServiceConfig) -> Router {
    let static_dir = config.static_dir.clone();
    let state: Shared = Arc::new(AppState { config, write_locks: Mutex::default() });
    let api = Router::new()
        .route("/datasets", get(list_datasets))
        .route("/datasets/{key}/examples", get(list_examples))
        .route("/datasets/{key}/prompts", get(get_collection))
        .route("/datasets/{key}/prompts/{id}", get(get_prompt).put(put_prompt))
        .route("/render", post(render_preview))
        .route("/stats", get(stats))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed")
        })
        .with_state(state);
    let app = Router::new().nest("/api", api);
    match static_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => app.fallback(|| async { ApiError::not_found("no UI bundle configured") }),
    }
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(config)).await
}

fn parse_key(raw: &str) -> ApiResult<DatasetKey> {
    raw.parse().map_err(|e: store::InvalidKey| ApiError::bad_request("InvalidKey", e.to_string()))
}

/// Keys with a `.jsonl` file under the data root.
fn data_keys(data_root: &FsPath) -> std::io::Result<BTreeSet<DatasetKey>> {
    let mut keys = BTreeSet::new();
    let Ok(entries) = std::fs::read_dir(data_root) else { return Ok(keys) };
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            let Some(dataset) = path.file_name().and_then(|n| n.to_str()).map(str::to_owned) else { continue };
            for sub in std::fs::read_dir(&path)? {
                let sub = sub?.path();
                if sub.extension().is_some_and(|e| e == "jsonl") {
                    if let Some(Ok(key)) = sub.file_stem().and_then(|s| s.to_str()).map(|s| DatasetKey::new(&dataset, Some(s))) {
                        keys.insert(key);
                    }
                }
            }
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            if let Some(Ok(key)) = path.file_stem().and_then(|s| s.to_str()).map(|s| DatasetKey::new(s, None)) {
                keys.insert(key);
            }
        }
    }
    Ok(keys)
}

fn count_examples(path: &FsPath) -> std::io::Result<u64> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
        Err(e) => return Err(e),
    };
    let mut count = 0;
    for line in std::io::BufReader::new(file).lines() {
        if !line?.trim().is_empty() {
            count += 1;
        }
    }
    Ok(count)
}

fn load_or_empty(root: &FsPath, key: &DatasetKey) -> Result<PromptCollection, StoreError> {
    match store::load_collection(root, key) {
        Err(StoreError::NotFound(_)) => Ok(PromptCollection::new(key.clone())),
        other => other,
    }
}

/// The first [`lint::SAMPLE_SIZE`] examples of a dataset, if it has data.
fn lint_samples(data_root: &FsPath, key: &DatasetKey) -> Result<Vec<ExampleRecord>, JsonlError> {
    let path = key.data_path(data_root);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    open_jsonl(&path)?.take(lint::SAMPLE_SIZE).collect()
}

#[derive(Debug, Serialize)]
struct DatasetEntry {
    key: DatasetKey,
    prompt_count: usize,
    original_task_count: usize,
    example_count: u64,
}

async fn list_datasets(State(state): State<Shared>) -> ApiResult<Json<Vec<DatasetEntry>>> {
    blocking(move || {
        let config = &state.config;
        let mut keys: BTreeSet<DatasetKey> = store::list_collections(&config.prompts_root)?.into_iter().collect();
        keys.extend(data_keys(&config.data_root).map_err(|e| ApiError::internal(e.to_string()))?);
        let mut entries = Vec::with_capacity(keys.len());
        for key in keys {
            let collection = load_or_empty(&config.prompts_root, &key)?;
            let example_count =
                count_examples(&key.data_path(&config.data_root)).map_err(|e| ApiError::internal(e.to_string()))?;
            entries.push(DatasetEntry {
                prompt_count: collection.len(),
                original_task_count: collection.original_task_count(),
                example_count,
                key,
            });
        }
        entries.sort_by_key(|e| e.key.to_string());
        Ok(Json(entries))
    })
    .await
}

fn paging_param(params: &HashMap<String, String>, name: &str, default: usize) -> ApiResult<usize> {
    match params.get(name) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| ApiError::bad_request("BadPaging", format!("`{name}` must be a non-negative integer, got `{raw}`"))),
    }
}

async fn list_examples(
    State(state): State<Shared>,
    Path(raw_key): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> ApiResult<Json<JsonValue>> {
    let key = parse_key(&raw_key)?;
    let offset = paging_param(&params, "offset", 0)?;
    let limit = paging_param(&params, "limit", DEFAULT_PAGE_SIZE)?;
    if limit == 0 || limit > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request("BadPaging", format!("`limit` must be between 1 and {MAX_PAGE_SIZE}")));
    }
    blocking(move || {
        let path = key.data_path(&state.config.data_root);
        if !path.is_file() {
            return Err(ApiError::not_found(format!("no examples registered for `{key}`")));
        }
        let reader = open_jsonl(&path).map_err(|e| ApiError::internal(e.to_string()))?;
        let examples = reader
            .skip(offset)
            .take(limit)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "DataError", e.to_string()))?;
        Ok(Json(json!({ "key": key, "offset": offset, "limit": limit, "examples": examples })))
    })
    .await
}

async fn get_collection(State(state): State<Shared>, Path(raw_key): Path<String>) -> ApiResult<Response> {
    let key = parse_key(&raw_key)?;
    blocking(move || {
        let collection = load_or_empty(&state.config.prompts_root, &key)?;
        let body = collection.to_canonical_json();
        Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response())
    })
    .await
}

async fn get_prompt(State(state): State<Shared>, Path((raw_key, id)): Path<(String, String)>) -> ApiResult<Json<Prompt>> {
    let key = parse_key(&raw_key)?;
    blocking(move || {
        let collection = store::load_collection(&state.config.prompts_root, &key)?;
        collection
            .by_id(&id)
            .cloned()
            .map(Json)
            .ok_or_else(|| ApiError::not_found(format!("no prompt `{id}` in `{key}`")))
    })
    .await
}

fn parse_json_body(body: &Bytes) -> ApiResult<JsonValue> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("MalformedBody", format!("request body is not valid JSON: {e}")))
}

fn prompt_error(e: PromptError) -> ApiError {
    let code = match e {
        PromptError::Template { .. } | PromptError::AnswerChoicesTemplate { .. } => "SyntaxError",
        _ => "InvalidPrompt",
    };
    let offset = e.offset();
    ApiError::unprocessable(code, e.to_string()).with_offset(offset)
}

#[derive(Serialize)]
struct SavedPrompt {
    prompt: Prompt,
    findings: Vec<LintFinding>,
}

async fn put_prompt(
    State(state): State<Shared>,
    Path((raw_key, id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<SavedPrompt>> {
    let key = parse_key(&raw_key)?;
    let mut value = parse_json_body(&body)?;
    if let Some(object) = value.as_object_mut() {
        object.entry("id").or_insert_with(|| JsonValue::String(id.clone()));
    }
    let prompt = store::prompt_from_json(&value, "").map_err(|e| ApiError::unprocessable("SchemaError", e.to_string()))?;
    if prompt.id != id {
        return Err(ApiError::unprocessable("IdMismatch", format!("body id `{}` does not match path id `{id}`", prompt.id)));
    }
    prompt.compile().map_err(prompt_error)?;

    let lock = state.write_lock(&key);
    let _guard = lock.lock().await;
    blocking(move || {
        let config = &state.config;
        let collection = load_or_empty(&config.prompts_root, &key)?;
        let collection = store::upsert_prompt(collection, prompt.clone())?;
        store::save_collection(&config.prompts_root, &collection)?;
        let samples = lint_samples(&config.data_root, &key).unwrap_or_default();
        let findings = lint::lint_prompt(&prompt, &samples);
        Ok(Json(SavedPrompt { prompt, findings }))
    })
    .await
}

fn render_error(kind: &ApplyErrorKind) -> ApiError {
    match kind {
        ApplyErrorKind::Render(e) | ApplyErrorKind::AnswerChoices(AnswerChoicesError::Render(e)) => {
            let code = match e.kind {
                RenderErrorKind::MissingField(_) => "MissingField",
                RenderErrorKind::TypeMismatch(_) => "TypeMismatch",
                RenderErrorKind::Choice(_) => "ChoiceError",
                RenderErrorKind::DivisionByZero => "DivisionByZero",
            };
            ApiError::unprocessable(code, kind.to_string()).with_offset(Some(e.offset))
        }
        ApplyErrorKind::AnswerChoices(AnswerChoicesError::EmptyChoices) => ApiError::unprocessable("EmptyChoices", kind.to_string()),
        ApplyErrorKind::MultipleSeparators(_) => ApiError::unprocessable("MultipleSeparators", kind.to_string()),
        ApplyErrorKind::TooManyVariants(_) => ApiError::unprocessable("TooManyVariants", kind.to_string()),
        ApplyErrorKind::Invalid(e) => prompt_error(e.clone()),
    }
}

/// Renders a draft template against one example. The default strategy takes
/// the first element of every `choice()` so previews stay stable while
/// editing.
async fn render_preview(body: Bytes) -> ApiResult<Json<JsonValue>> {
    let body = parse_json_body(&body)?;
    let Some(object) = body.as_object() else {
        return Err(ApiError::bad_request("MalformedBody", "request body must be a JSON object"));
    };
    let string_field = |name: &str| -> ApiResult<Option<&str>> {
        match object.get(name) {
            None | Some(JsonValue::Null) => Ok(None),
            Some(JsonValue::String(s)) => Ok(Some(s)),
            Some(_) => Err(ApiError::bad_request("MalformedBody", format!("`{name}` must be a string"))),
        }
    };
    let source = string_field("template")?.ok_or_else(|| ApiError::bad_request("MalformedBody", "`template` is required"))?;
    let answer_choices = string_field("answer_choices")?;
    let strategy = match string_field("strategy")? {
        None => ChoiceStrategy::FirstChoice,
        Some(s) => s.parse().map_err(|e: String| ApiError::bad_request("BadStrategy", e))?,
    };
    if strategy == ChoiceStrategy::CrossProduct {
        return Err(ApiError::bad_request("BadStrategy", "preview renders a single variant; use seeded, fixed or first"));
    }
    let example = match object.get("example") {
        None => Default::default(),
        Some(JsonValue::Object(fields)) => Value::map_from_json(fields),
        Some(_) => return Err(ApiError::bad_request("MalformedBody", "`example` must be an object")),
    };
    let ordinal = match object.get("example_ordinal") {
        None => 0,
        Some(v) => v.as_u64().ok_or_else(|| ApiError::bad_request("MalformedBody", "`example_ordinal` must be a non-negative integer"))?,
    };

    let template = template::parse(source)
        .map_err(|e| ApiError::unprocessable("SyntaxError", e.to_string()).with_offset(Some(e.offset())))?;
    let choices_ast = answer_choices
        .map(template::parse)
        .transpose()
        .map_err(|e| ApiError::unprocessable("SyntaxError", format!("answer choices: {e}")).with_offset(Some(e.offset())))?;
    let mut draft = Prompt::new("preview", source);
    draft.answer_choices = answer_choices.map(str::to_owned);
    let compiled = CompiledPrompt::from_parts(draft, template, choices_ast);
    let application = compiled.apply(&example, ordinal, &strategy).map_err(|e| render_error(&e.kind))?;
    Ok(Json(match application.emitted.into_iter().next() {
        Some(p) => json!({ "input": p.input, "target": p.target, "answer_choices": p.answer_choices }),
        None => json!({ "skipped": true }),
    }))
}

async fn stats(State(state): State<Shared>) -> ApiResult<Json<store::StoreStats>> {
    blocking(move || Ok(Json(store::compute_stats(&store::load_all(&state.config.prompts_root)?)))).await
}
