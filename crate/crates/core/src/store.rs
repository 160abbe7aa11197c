//! Prompt collections on disk: one `prompts.json` per dataset or subset
//! under a prompts root, written canonically and atomically.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use serde_json::Value as Json;

use crate::prompt::{Prompt, PromptError, PromptMetadata};
use crate::template::TemplateError;

pub const COLLECTION_FILE: &str = "prompts.json";

/// `dataset` or `dataset/subset`; both parts match `[a-z0-9_]+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DatasetKey {
    pub dataset: String,
    pub subset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid dataset key `{0}` (expected dataset or dataset/subset, each [a-z0-9_]+)")]
pub struct InvalidKey(pub String);

fn valid_part(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl DatasetKey {
    pub fn new(dataset: &str, subset: Option<&str>) -> Result<Self, InvalidKey> {
        let key = Self { dataset: dataset.to_owned(), subset: subset.map(str::to_owned) };
        if valid_part(dataset) && subset.is_none_or(valid_part) {
            Ok(key)
        } else {
            Err(InvalidKey(key.to_string()))
        }
    }

    /// Directory holding this key's collection file.
    pub fn dir(&self, root: &Path) -> PathBuf {
        let mut dir = root.join(&self.dataset);
        if let Some(subset) = &self.subset {
            dir.push(subset);
        }
        dir
    }

    pub fn collection_path(&self, root: &Path) -> PathBuf {
        self.dir(root).join(COLLECTION_FILE)
    }

    /// `<root>/<dataset>.jsonl` or `<root>/<dataset>/<subset>.jsonl`.
    pub fn data_path(&self, data_root: &Path) -> PathBuf {
        match &self.subset {
            Some(subset) => data_root.join(&self.dataset).join(format!("{subset}.jsonl")),
            None => data_root.join(format!("{}.jsonl", self.dataset)),
        }
    }
}

impl fmt::Display for DatasetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subset {
            Some(subset) => write!(f, "{}/{subset}", self.dataset),
            None => f.write_str(&self.dataset),
        }
    }
}

impl FromStr for DatasetKey {
    type Err = InvalidKey;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((dataset, subset)) => Self::new(dataset, Some(subset)),
            None => Self::new(s, None),
        }
    }
}

impl Serialize for DatasetKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCollection {
    pub key: DatasetKey,
    pub prompts: Vec<Prompt>,
}

impl PromptCollection {
    pub fn new(key: DatasetKey) -> Self {
        Self { key, prompts: Vec::new() }
    }

    pub fn by_name(&self, name: &str) -> Option<&Prompt> {
        self.prompts.iter().find(|p| p.metadata.name == name)
    }

    pub fn by_id(&self, id: &str) -> Option<&Prompt> {
        self.prompts.iter().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn original_task_count(&self) -> usize {
        self.prompts.iter().filter(|p| p.metadata.original_task).count()
    }

    /// Canonical file text: 2-space indent, fixed key order, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            dataset: &'a str,
            subset: Option<&'a str>,
            prompts: &'a [Prompt],
        }
        let file = File { dataset: &self.key.dataset, subset: self.key.subset.as_deref(), prompts: &self.prompts };
        let mut text = serde_json::to_string_pretty(&file).expect("collections always serialize");
        text.push('\n');
        text
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no collection at {0}")]
    NotFound(PathBuf),
    #[error("{path}: schema error at `{pointer}`: {message}")]
    Schema { path: PathBuf, pointer: String, message: String },
    #[error("{path}: {source}")]
    Template { path: PathBuf, prompt: String, source: TemplateError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("a prompt named `{0}` already exists in this collection")]
    DuplicateName(String),
    #[error(transparent)]
    InvalidKey(#[from] InvalidKey),
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

/// Field-level schema problem; the pointer is RFC 6901.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("schema error at `{pointer}`: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> SchemaError {
    SchemaError { pointer: pointer.into(), message: message.into() }
}

struct Fields<'a> {
    object: &'a serde_json::Map<String, Json>,
    pointer: &'a str,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Json, pointer: &'a str, allowed: &[&str]) -> Result<Self, SchemaError> {
        let object = value.as_object().ok_or_else(|| schema(pointer, "expected an object"))?;
        if let Some(unknown) = object.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(schema(format!("{pointer}/{unknown}"), "unknown field"));
        }
        Ok(Self { object, pointer })
    }

    fn at(&self, key: &str) -> String {
        format!("{}/{key}", self.pointer)
    }

    fn required(&self, key: &str) -> Result<&'a Json, SchemaError> {
        self.object.get(key).ok_or_else(|| schema(self.at(key), "missing field"))
    }

    fn string(&self, key: &str) -> Result<String, SchemaError> {
        self.required(key)?.as_str().map(str::to_owned).ok_or_else(|| schema(self.at(key), "expected a string"))
    }

    fn opt_string(&self, key: &str) -> Result<Option<String>, SchemaError> {
        match self.object.get(key) {
            None | Some(Json::Null) => Ok(None),
            Some(Json::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(schema(self.at(key), "expected a string or null")),
        }
    }

    fn boolean(&self, key: &str) -> Result<bool, SchemaError> {
        self.required(key)?.as_bool().ok_or_else(|| schema(self.at(key), "expected a boolean"))
    }

    fn strings(&self, key: &str) -> Result<Option<Vec<String>>, SchemaError> {
        let Some(value) = self.object.get(key) else { return Ok(None) };
        let items = value.as_array().ok_or_else(|| schema(self.at(key), "expected an array of strings"))?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                item.as_str().map(str::to_owned).ok_or_else(|| schema(format!("{}/{i}", self.at(key)), "expected a string"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

const PROMPT_FIELDS: [&str; 9] = [
    "id",
    "name",
    "reference",
    "original_task",
    "choices_in_prompt",
    "metrics",
    "languages",
    "answer_choices",
    "template",
];

/// Reads one prompt object. Only types are checked here; semantic
/// invariants are left to [`Prompt::compile`] and the linter.
pub fn prompt_from_json(value: &Json, pointer: &str) -> Result<Prompt, SchemaError> {
    let fields = Fields::new(value, pointer, &PROMPT_FIELDS)?;
    Ok(Prompt {
        id: fields.string("id")?,
        template: fields.string("template")?,
        answer_choices: fields.opt_string("answer_choices")?,
        metadata: PromptMetadata {
            name: fields.string("name")?,
            reference: fields.string("reference")?,
            original_task: fields.boolean("original_task")?,
            choices_in_prompt: fields.boolean("choices_in_prompt")?,
            metrics: fields.strings("metrics")?.ok_or_else(|| schema(fields.at("metrics"), "missing field"))?,
            languages: fields.strings("languages")?.unwrap_or_else(|| vec!["en".to_owned()]),
        },
    })
}

/// Parses collection file text, checking only the schema.
pub fn collection_from_json(text: &str) -> Result<PromptCollection, SchemaError> {
    let value: Json = serde_json::from_str(text).map_err(|e| schema("", format!("invalid JSON: {e}")))?;
    let fields = Fields::new(&value, "", &["dataset", "subset", "prompts"])?;
    let dataset = fields.string("dataset")?;
    let subset = fields.opt_string("subset")?;
    let key = DatasetKey::new(&dataset, subset.as_deref()).map_err(|e| schema("/dataset", e.to_string()))?;
    let prompts = fields.required("prompts")?.as_array().ok_or_else(|| schema("/prompts", "expected an array"))?;
    let prompts = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| prompt_from_json(p, &format!("/prompts/{i}")))
        .collect::<Result<_, _>>()?;
    Ok(PromptCollection { key, prompts })
}

/// Reads a collection checking only the file schema, so that invalid prompts
/// can still be linted.
pub fn read_collection(root: &Path, key: &DatasetKey) -> Result<PromptCollection, StoreError> {
    let path = key.collection_path(root);
    let text = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(path)),
        Err(e) => return Err(io_error(&path)(e)),
    };
    let collection = collection_from_json(&text)
        .map_err(|e| StoreError::Schema { path: path.clone(), pointer: e.pointer, message: e.message })?;
    if &collection.key != key {
        return Err(StoreError::Schema {
            path,
            pointer: "/dataset".into(),
            message: format!("file declares `{}` but lives at `{key}`", collection.key),
        });
    }
    Ok(collection)
}

/// Loads a collection and enforces every prompt and collection invariant.
pub fn load_collection(root: &Path, key: &DatasetKey) -> Result<PromptCollection, StoreError> {
    let collection = read_collection(root, key)?;
    let path = key.collection_path(root);
    validate_collection(&collection).map_err(|e| match e {
        CollectionInvalid::Template { prompt, source } => StoreError::Template { path: path.clone(), prompt, source },
        CollectionInvalid::Schema(e) => StoreError::Schema { path: path.clone(), pointer: e.pointer, message: e.message },
    })?;
    Ok(collection)
}

enum CollectionInvalid {
    Template { prompt: String, source: TemplateError },
    Schema(SchemaError),
}

fn validate_collection(collection: &PromptCollection) -> Result<(), CollectionInvalid> {
    let mut names = HashSet::new();
    let mut ids = HashSet::new();
    for (i, prompt) in collection.prompts.iter().enumerate() {
        let at = |field: &str| format!("/prompts/{i}/{field}");
        match prompt.compile() {
            Ok(_) => {}
            Err(PromptError::Template { name, source } | PromptError::AnswerChoicesTemplate { name, source }) => {
                return Err(CollectionInvalid::Template { prompt: name, source })
            }
            Err(e @ PromptError::BlankName) => return Err(CollectionInvalid::Schema(schema(at("name"), e.to_string()))),
            Err(e @ PromptError::InvalidId { .. }) => return Err(CollectionInvalid::Schema(schema(at("id"), e.to_string()))),
            Err(e @ PromptError::EmptyMetric(_)) => return Err(CollectionInvalid::Schema(schema(at("metrics"), e.to_string()))),
            Err(e @ PromptError::ChoicesInPromptWithoutAnswerChoices(_)) => {
                return Err(CollectionInvalid::Schema(schema(at("answer_choices"), e.to_string())))
            }
        }
        if !names.insert(prompt.metadata.name.as_str()) {
            return Err(CollectionInvalid::Schema(schema(at("name"), format!("duplicate prompt name `{}`", prompt.metadata.name))));
        }
        if !ids.insert(prompt.id.as_str()) {
            return Err(CollectionInvalid::Schema(schema(at("id"), format!("duplicate prompt id `{}`", prompt.id))));
        }
    }
    Ok(())
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes the canonical form via a temporary file and a rename.
pub fn save_collection(root: &Path, collection: &PromptCollection) -> Result<(), StoreError> {
    let dir = collection.key.dir(root);
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let path = dir.join(COLLECTION_FILE);
    let tmp = dir.join(format!(
        ".{COLLECTION_FILE}.{}.{}.tmp",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let write = || -> io::Result<()> {
        use std::io::Write;
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(collection.to_canonical_json().as_bytes())?;
        file.sync_all()?;
        std::fs::rename(&tmp, &path)
    };
    write().map_err(|source| {
        let _ = std::fs::remove_file(&tmp);
        StoreError::Io { path: path.clone(), source }
    })
}

/// Replaces the prompt with the same id in place, or appends it.
pub fn upsert_prompt(mut collection: PromptCollection, prompt: Prompt) -> Result<PromptCollection, StoreError> {
    let clash = collection.prompts.iter().any(|p| p.id != prompt.id && p.metadata.name == prompt.metadata.name);
    if clash {
        return Err(StoreError::DuplicateName(prompt.metadata.name));
    }
    match collection.prompts.iter_mut().find(|p| p.id == prompt.id) {
        Some(slot) => *slot = prompt,
        None => collection.prompts.push(prompt),
    }
    Ok(collection)
}

/// Every key with a collection file under `root`, sorted.
pub fn list_collections(root: &Path) -> Result<Vec<DatasetKey>, StoreError> {
    let mut keys = BTreeSet::new();
    let entries = match std::fs::read_dir(root) {
        Ok(entries) => entries,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_error(root)(e)),
    };
    for entry in entries {
        let entry = entry.map_err(io_error(root))?;
        let dataset_dir = entry.path();
        let Some(dataset) = entry.file_name().to_str().map(str::to_owned) else { continue };
        if !dataset_dir.is_dir() || !valid_part(&dataset) {
            continue;
        }
        if dataset_dir.join(COLLECTION_FILE).is_file() {
            keys.insert(DatasetKey { dataset: dataset.clone(), subset: None });
        }
        for sub in std::fs::read_dir(&dataset_dir).map_err(io_error(&dataset_dir))? {
            let sub = sub.map_err(io_error(&dataset_dir))?;
            let Some(subset) = sub.file_name().to_str().map(str::to_owned) else { continue };
            if valid_part(&subset) && sub.path().join(COLLECTION_FILE).is_file() {
                keys.insert(DatasetKey { dataset: dataset.clone(), subset: Some(subset) });
            }
        }
    }
    Ok(keys.into_iter().collect())
}

/// Loads every collection under `root` in key order.
pub fn load_all(root: &Path) -> Result<Vec<PromptCollection>, StoreError> {
    list_collections(root)?.iter().map(|key| load_collection(root, key)).collect()
}

/// A non-negative decimal with one fractional digit, stored in tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct OneDecimal(pub u64);

impl OneDecimal {
    /// `numerator / denominator` rounded half-up to one decimal; 0.0 when
    /// the denominator is zero.
    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            return Self(0);
        }
        Self((numerator * 20 + denominator) / (denominator * 2))
    }

    pub fn tenths(self) -> u64 {
        self.0
    }
}

impl fmt::Display for OneDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for OneDecimal {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0 as f64 / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct StoreStats {
    pub dataset_count: u64,
    pub subset_count: u64,
    pub prompt_count: u64,
    pub original_task_prompt_count: u64,
    pub prompts_per_subset_mean: OneDecimal,
    pub original_task_per_subset_mean: OneDecimal,
    /// Prompts per collection → number of collections with that many.
    pub histogram: BTreeMap<u64, u64>,
}

/// Counts over collections; each collection is one subset, and collections
/// sharing a dataset name form one dataset.
pub fn compute_stats(collections: &[PromptCollection]) -> StoreStats {
    let datasets: HashSet<&str> = collections.iter().map(|c| c.key.dataset.as_str()).collect();
    let subset_count = collections.len() as u64;
    let prompt_count: u64 = collections.iter().map(|c| c.len() as u64).sum();
    let original: u64 = collections.iter().map(|c| c.original_task_count() as u64).sum();
    let mut histogram = BTreeMap::new();
    for c in collections {
        *histogram.entry(c.len() as u64).or_insert(0) += 1;
    }
    StoreStats {
        dataset_count: datasets.len() as u64,
        subset_count,
        prompt_count,
        original_task_prompt_count: original,
        prompts_per_subset_mean: OneDecimal::ratio(prompt_count, subset_count),
        original_task_per_subset_mean: OneDecimal::ratio(original, subset_count),
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> DatasetKey {
        s.parse().unwrap()
    }

    fn prompt(name: &str, original_task: bool) -> Prompt {
        let mut p = Prompt::new(name, "{{x}} ||| {{y}}");
        p.metadata.original_task = original_task;
        p.metadata.metrics = vec!["Accuracy".into()];
        p
    }

    #[test]
    fn key_forms() {
        assert_eq!(key("snli").to_string(), "snli");
        assert_eq!(key("super_glue/rte").subset.as_deref(), Some("rte"));
        assert!("Bad".parse::<DatasetKey>().is_err());
        assert!("a/".parse::<DatasetKey>().is_err());
        assert!("a/b/c".parse::<DatasetKey>().is_err());
        assert_eq!(key("a/b").collection_path(Path::new("/r")), Path::new("/r/a/b/prompts.json"));
        assert_eq!(key("a/b").data_path(Path::new("/d")), Path::new("/d/a/b.jsonl"));
        assert_eq!(key("a").data_path(Path::new("/d")), Path::new("/d/a.jsonl"));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(OneDecimal::ratio(2052, 269).to_string(), "7.6");
        assert_eq!(OneDecimal::ratio(1506, 269).to_string(), "5.6");
        assert_eq!(OneDecimal::ratio(1, 4).to_string(), "0.3");
        assert_eq!(OneDecimal::ratio(3, 40).to_string(), "0.1");
        assert_eq!(OneDecimal::ratio(5, 0).to_string(), "0.0");
        assert_eq!(serde_json::to_string(&OneDecimal(76)).unwrap(), "7.6");
    }

    #[test]
    fn stats_small_cases() {
        let empty = compute_stats(&[]);
        assert_eq!(empty, StoreStats::default());
        assert_eq!(empty.prompts_per_subset_mean.to_string(), "0.0");

        let mut c = PromptCollection::new(key("x"));
        for i in 0..5 {
            c.prompts.push(prompt(&format!("p{i}"), i < 3));
        }
        let stats = compute_stats(&[c]);
        assert_eq!(stats.prompts_per_subset_mean.to_string(), "5.0");
        assert_eq!(stats.original_task_per_subset_mean.to_string(), "3.0");
        assert_eq!(stats.histogram, BTreeMap::from([(5, 1)]));
    }

    #[test]
    fn upsert_rules() {
        let c = PromptCollection::new(key("x"));
        let a = prompt("a", true);
        let c = upsert_prompt(c, a.clone()).unwrap();
        assert_eq!(c.len(), 1);
        let c = upsert_prompt(c, prompt("b", false)).unwrap();
        let mut renamed = a.clone();
        renamed.metadata.name = "a2".into();
        let c = upsert_prompt(c, renamed).unwrap();
        assert_eq!(c.prompts[0].id, a.id);
        assert_eq!(c.prompts[0].metadata.name, "a2");
        assert!(matches!(upsert_prompt(c, prompt("b", true)), Err(StoreError::DuplicateName(n)) if n == "b"));
    }

    #[test]
    fn save_load_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = PromptCollection::new(key("snli"));
        c.prompts.push(prompt("based on the previous passage", true).with_answer_choices("Yes ||| No"));
        c.prompts.push(prompt("second", false));
        save_collection(dir.path(), &c).unwrap();
        let loaded = load_collection(dir.path(), &key("snli")).unwrap();
        assert_eq!(loaded, c);
        assert!(loaded.by_name("based on the previous passage").is_some());
        let text = std::fs::read_to_string(key("snli").collection_path(dir.path())).unwrap();
        assert!(text.ends_with("}\n"));
        assert!(text.starts_with("{\n  \"dataset\": \"snli\",\n  \"subset\": null,\n  \"prompts\": ["));
        assert_eq!(list_collections(dir.path()).unwrap(), vec![key("snli")]);

        assert!(matches!(load_collection(dir.path(), &key("nope")), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn empty_collection_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let c = PromptCollection::new(key("a/b"));
        save_collection(dir.path(), &c).unwrap();
        assert!(load_collection(dir.path(), &key("a/b")).unwrap().is_empty());
    }

    fn write_raw(dir: &Path, k: &str, body: serde_json::Value) {
        let path = key(k).collection_path(dir);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, body.to_string()).unwrap();
    }

    fn raw_prompt(id: &str, name: &str, template: &str) -> serde_json::Value {
        serde_json::json!({
            "id": id, "name": name, "reference": "", "original_task": true,
            "choices_in_prompt": false, "metrics": ["Accuracy"], "languages": ["en"],
            "answer_choices": null, "template": template
        })
    }

    const ID1: &str = "6f3c1a52-6d0e-4b6a-9d55-1d2f7c3e8a01";
    const ID2: &str = "6f3c1a52-6d0e-4b6a-9d55-1d2f7c3e8a02";

    #[test]
    fn duplicate_names_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_raw(dir.path(), "d", serde_json::json!({"dataset": "d", "subset": null, "prompts": [
            raw_prompt(ID1, "same", "a"), raw_prompt(ID2, "same", "b")
        ]}));
        match load_collection(dir.path(), &key("d")) {
            Err(StoreError::Schema { pointer, .. }) => assert_eq!(pointer, "/prompts/1/name"),
            other => panic!("{other:?}"),
        }
        // the schema-only reader still accepts it
        assert_eq!(read_collection(dir.path(), &key("d")).unwrap().len(), 2);
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = raw_prompt(ID1, "p", "a");
        bad["original_task"] = serde_json::json!("yes");
        write_raw(dir.path(), "d", serde_json::json!({"dataset": "d", "subset": null, "prompts": [bad]}));
        match read_collection(dir.path(), &key("d")) {
            Err(StoreError::Schema { pointer, .. }) => assert_eq!(pointer, "/prompts/0/original_task"),
            other => panic!("{other:?}"),
        }
        let mut missing = raw_prompt(ID1, "p", "a");
        missing.as_object_mut().unwrap().remove("template");
        write_raw(dir.path(), "d", serde_json::json!({"dataset": "d", "subset": null, "prompts": [missing]}));
        assert!(matches!(read_collection(dir.path(), &key("d")), Err(StoreError::Schema { pointer, .. }) if pointer == "/prompts/0/template"));
        write_raw(dir.path(), "d", serde_json::json!({"dataset": "other", "subset": null, "prompts": []}));
        assert!(matches!(read_collection(dir.path(), &key("d")), Err(StoreError::Schema { .. })));
    }

    #[test]
    fn template_errors_name_the_prompt() {
        let dir = tempfile::tempdir().unwrap();
        write_raw(dir.path(), "d", serde_json::json!({"dataset": "d", "subset": null, "prompts": [raw_prompt(ID1, "broken", "{% if x %}")]}));
        assert!(matches!(load_collection(dir.path(), &key("d")), Err(StoreError::Template { prompt, .. }) if prompt == "broken"));
    }

    #[cfg(unix)]
    #[test]
    fn read_only_destination_is_io_error() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("ro");
        std::fs::create_dir_all(target.join("d")).unwrap();
        std::fs::set_permissions(target.join("d"), std::fs::Permissions::from_mode(0o555)).unwrap();
        let result = save_collection(&target, &PromptCollection::new(key("d")));
        std::fs::set_permissions(target.join("d"), std::fs::Permissions::from_mode(0o755)).unwrap();
        // root ignores permission bits; only assert when the write was refused
        if let Err(e) = result {
            assert!(matches!(e, StoreError::Io { .. }));
        }
    }

    #[test]
    fn root_that_is_a_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        let err = save_collection(&file, &PromptCollection::new(key("d"))).unwrap_err();
        assert!(matches!(err, StoreError::Io { .. }), "{err:?}");
    }
}
