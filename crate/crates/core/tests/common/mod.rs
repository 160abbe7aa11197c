#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use promptforge::prompt::Prompt;
use promptforge::store::{self, DatasetKey, PromptCollection};
use serde_json::Value;
use tower::ServiceExt;

pub const SNLI_TEMPLATE: &str = "If {{premise}} is true, is it also true that {{hypothesis}}? ||| {{entailed}}";

/// Small deterministic generator for fixtures.
pub struct Rng(pub u64);

impl Rng {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn uuid(&mut self) -> String {
        let mut bytes = [0u8; 16];
        bytes[..8].copy_from_slice(&self.next().to_le_bytes());
        bytes[8..].copy_from_slice(&self.next().to_le_bytes());
        uuid::Builder::from_random_bytes(bytes).into_uuid().hyphenated().to_string()
    }
}

pub fn prompt(rng: &mut Rng, name: &str, template: &str) -> Prompt {
    let mut p = Prompt::new(name, template);
    p.id = rng.uuid();
    p.metadata.metrics = vec!["Accuracy".into()];
    p
}

pub fn snli_prompt(rng: &mut Rng) -> Prompt {
    let mut p = prompt(rng, "is it true", SNLI_TEMPLATE);
    p.metadata.original_task = true;
    p
}

pub fn write_jsonl(path: &Path, rows: impl IntoIterator<Item = Value>) {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).unwrap();
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    for row in rows {
        writeln!(file, "{row}").unwrap();
    }
    file.flush().unwrap();
}

pub fn save(root: &Path, key: &str, prompts: Vec<Prompt>) -> DatasetKey {
    let key: DatasetKey = key.parse().unwrap();
    store::save_collection(root, &PromptCollection { key: key.clone(), prompts }).unwrap();
    key
}

/// Spreads `total` units over `slots`, each slot getting at least `min` and
/// at most `caps[i]`.
fn spread(rng: &mut Rng, total: u64, min: u64, caps: &[u64]) -> Vec<u64> {
    let mut counts = vec![min; caps.len()];
    let mut left = total - min * caps.len() as u64;
    while left > 0 {
        let i = rng.below(caps.len() as u64) as usize;
        if counts[i] < caps[i] {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

/// Writes `collections` collections holding `prompts` prompts in total, of
/// which `original` are original-task prompts. Sizes are uneven.
pub fn write_stats_fixture(root: &Path, collections: usize, prompts: u64, original: u64) {
    let mut rng = Rng(269);
    let sizes = spread(&mut rng, prompts, 1, &vec![30; collections]);
    let originals = spread(&mut rng, original, 0, &sizes);
    for (i, (&size, &ot)) in sizes.iter().zip(&originals).enumerate() {
        let key = if i % 3 == 0 { format!("ds{:03}", i) } else { format!("multi{:03}/sub{}", i / 3, i % 3) };
        let prompts = (0..size)
            .map(|j| {
                let mut p = prompt(&mut rng, &format!("p{j}"), "Q: {{q}} ||| {{a}}");
                p.metadata.original_task = j < ot;
                p
            })
            .collect();
        save(root, &key, prompts);
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut request = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            request = request.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let response = app.clone().oneshot(request.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

pub async fn call_raw(app: &Router, method: Method, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}
