//! Streams a JSONL dataset through prompts and writes prompted examples as
//! JSONL.
//!
//! Rendering runs in parallel over chunks of examples; output is written in
//! ascending `(example_ordinal, prompt position, variant_ordinal)` order no
//! matter how many workers are used.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::prompt::{ApplyError, ChoiceStrategy, CompiledPrompt, Prompt, PromptError, DEFAULT_MAX_VARIANTS};
use crate::template::{Map, Value};

pub use crate::prompt::ChoiceStrategy as Strategy;

/// One dataset example; `ordinal` counts non-blank lines from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    pub ordinal: u64,
    pub fields: Map,
}

impl Serialize for ExampleRecord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record<'a> {
            ordinal: u64,
            fields: &'a serde_json::Value,
        }
        Record { ordinal: self.ordinal, fields: &Value::Map(self.fields.clone()).to_json() }.serialize(serializer)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Lazy reader over a JSONL stream of objects.
pub struct JsonlReader<R> {
    lines: io::Lines<R>,
    line: u64,
    ordinal: u64,
    lenient: bool,
    malformed: u64,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(reader: R) -> Self {
        Self { lines: reader.lines(), line: 0, ordinal: 0, lenient: false, malformed: 0 }
    }

    /// Skip malformed lines instead of failing; they are counted in
    /// [`JsonlReader::malformed`] and take no ordinal.
    pub fn lenient(mut self) -> Self {
        self.lenient = true;
        self
    }

    pub fn malformed(&self) -> u64 {
        self.malformed
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<ExampleRecord, JsonlError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(text) => text,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let parsed = match serde_json::from_str::<serde_json::Value>(&text) {
                Ok(serde_json::Value::Object(object)) => Ok(Value::map_from_json(&object)),
                Ok(other) => Err(format!("expected a JSON object, found {}", json_kind(&other))),
                Err(e) => Err(e.to_string()),
            };
            match parsed {
                Ok(fields) => {
                    let ordinal = self.ordinal;
                    self.ordinal += 1;
                    return Some(Ok(ExampleRecord { ordinal, fields }));
                }
                Err(_) if self.lenient => self.malformed += 1,
                Err(message) => return Some(Err(JsonlError::Parse { line: self.line, message })),
            }
        }
    }
}

fn json_kind(value: &serde_json::Value) -> &'static str {
    match value {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "a boolean",
        serde_json::Value::Number(_) => "a number",
        serde_json::Value::String(_) => "a string",
        serde_json::Value::Array(_) => "an array",
        serde_json::Value::Object(_) => "an object",
    }
}

pub fn open_jsonl(path: &Path) -> io::Result<JsonlReader<BufReader<File>>> {
    Ok(JsonlReader::new(BufReader::new(File::open(path)?)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializeOptions {
    pub strategy: ChoiceStrategy,
    pub max_variants: usize,
    /// Abort on the first render error instead of counting it.
    pub fail_fast: bool,
    /// Rendering threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Examples rendered per parallel batch.
    pub chunk_size: usize,
}

impl MaterializeOptions {
    pub fn new(strategy: ChoiceStrategy) -> Self {
        Self { strategy, max_variants: DEFAULT_MAX_VARIANTS, fail_fast: false, workers: None, chunk_size: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorSample {
    pub prompt_id: String,
    pub example_ordinal: u64,
    pub message: String,
}

/// Run counters. Every render attempt lands in exactly one of `emitted`,
/// `skipped_empty` or `errored`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MaterializeReport {
    pub examples_read: u64,
    pub emitted: u64,
    pub skipped_empty: u64,
    pub errored: u64,
    pub first_errors: Vec<ErrorSample>,
}

impl MaterializeReport {
    pub const MAX_ERROR_SAMPLES: usize = 10;

    pub fn attempts(&self) -> u64 {
        self.emitted + self.skipped_empty + self.errored
    }

    fn record_error(&mut self, error: &ApplyError) {
        self.errored += 1;
        if self.first_errors.len() < Self::MAX_ERROR_SAMPLES {
            self.first_errors.push(ErrorSample {
                prompt_id: error.prompt_id.clone(),
                example_ordinal: error.example_ordinal,
                message: error.kind.to_string(),
            });
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MaterializeError {
    #[error(transparent)]
    InvalidPrompt(#[from] PromptError),
    #[error("reading examples: {0}")]
    Input(#[from] JsonlError),
    #[error("writing output: {0}")]
    Sink(#[source] io::Error),
    #[error(transparent)]
    Render(ApplyError),
    #[error("building worker pool: {0}")]
    Pool(String),
}

#[derive(Serialize)]
struct OutputRow<'a> {
    input: &'a str,
    target: &'a str,
    answer_choices: Option<&'a [String]>,
    prompt_id: &'a str,
    prompt_name: &'a str,
    example_ordinal: u64,
    variant_ordinal: u64,
}

/// Output of one (example, prompt) pair: serialized rows plus counters.
type PairOutcome = Result<(Vec<u8>, u64, u64), ApplyError>;

fn render_pair(prompt: &CompiledPrompt, record: &ExampleRecord, options: &MaterializeOptions) -> PairOutcome {
    let application = prompt.apply_bounded(&record.fields, record.ordinal, &options.strategy, options.max_variants)?;
    let mut bytes = Vec::new();
    for example in &application.emitted {
        let row = OutputRow {
            input: &example.input,
            target: &example.target,
            answer_choices: example.answer_choices.as_deref(),
            prompt_id: &example.prompt_id,
            prompt_name: prompt.prompt().name(),
            example_ordinal: example.example_ordinal,
            variant_ordinal: example.variant_ordinal,
        };
        serde_json::to_writer(&mut bytes, &row).expect("rows always serialize");
        bytes.push(b'\n');
    }
    Ok((bytes, application.emitted.len() as u64, application.skipped))
}

/// Applies every prompt to every example and writes prompted examples to
/// `sink` as JSONL.
pub fn materialize<I, W>(
    records: I,
    prompts: &[Prompt],
    options: &MaterializeOptions,
    sink: &mut W,
) -> Result<MaterializeReport, MaterializeError>
where
    I: IntoIterator<Item = Result<ExampleRecord, JsonlError>>,
    W: Write + ?Sized,
{
    let compiled = prompts.iter().map(Prompt::compile).collect::<Result<Vec<_>, _>>()?;
    let pool = match options.workers {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| MaterializeError::Pool(e.to_string()))?,
        ),
        None => None,
    };
    let render_chunk = |chunk: &[ExampleRecord]| -> Vec<Vec<PairOutcome>> {
        let work = || {
            chunk
                .par_iter()
                .map(|record| compiled.iter().map(|p| render_pair(p, record, options)).collect())
                .collect()
        };
        match &pool {
            Some(pool) => pool.install(work),
            None => work(),
        }
    };

    let mut report = MaterializeReport::default();
    let mut records = records.into_iter();
    let chunk_size = options.chunk_size.max(1);
    let mut chunk = Vec::with_capacity(chunk_size);
    loop {
        chunk.clear();
        for record in records.by_ref().take(chunk_size) {
            chunk.push(record?);
        }
        if chunk.is_empty() {
            break;
        }
        report.examples_read += chunk.len() as u64;
        for outcomes in render_chunk(&chunk) {
            for outcome in outcomes {
                match outcome {
                    Ok((bytes, emitted, skipped)) => {
                        sink.write_all(&bytes).map_err(MaterializeError::Sink)?;
                        report.emitted += emitted;
                        report.skipped_empty += skipped;
                    }
                    Err(error) if options.fail_fast => return Err(MaterializeError::Render(error)),
                    Err(error) => report.record_error(&error),
                }
            }
        }
        if chunk.len() < chunk_size {
            break;
        }
    }
    sink.flush().map_err(MaterializeError::Sink)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(text: &str) -> Vec<Result<ExampleRecord, JsonlError>> {
        JsonlReader::new(text.as_bytes()).collect()
    }

    fn run(data: &str, prompts: &[Prompt], options: &MaterializeOptions) -> (String, MaterializeReport) {
        let mut out = Vec::new();
        let report = materialize(records(data), prompts, options, &mut out).unwrap();
        (String::from_utf8(out).unwrap(), report)
    }

    #[test]
    fn reader_ordinals_skip_blank_lines() {
        let ordinals: Vec<u64> = records("{\"a\":1}\n\n  \n{\"a\":2}\n{\"a\":3}")
            .into_iter()
            .map(|r| r.unwrap().ordinal)
            .collect();
        assert_eq!(ordinals, [0, 1, 2]);
    }

    #[test]
    fn reader_reports_malformed_line() {
        let results = records("{\"a\":1}\n{oops\n{\"a\":3}\n");
        assert!(matches!(results[1], Err(JsonlError::Parse { line: 2, .. })));
        let results = records("{\"a\":1}\n[1]\n");
        assert!(matches!(results[1], Err(JsonlError::Parse { line: 2, .. })));

        let mut reader = JsonlReader::new("{\"a\":1}\n{oops\n{\"a\":3}\n".as_bytes()).lenient();
        let ordinals: Vec<u64> = reader.by_ref().map(|r| r.unwrap().ordinal).collect();
        assert_eq!(ordinals, [0, 1]);
        assert_eq!(reader.malformed(), 1);
    }

    #[test]
    fn choice_free_prompt_emits_once_per_example() {
        let prompts = [Prompt::new("p", "{{q}} ||| {{a}}")];
        let (out, report) = run("{\"q\":\"x\",\"a\":1}\n{\"q\":\"y\",\"a\":2}\n", &prompts, &MaterializeOptions::new(ChoiceStrategy::SeededRandom(7)));
        assert_eq!(report.emitted, 2);
        assert_eq!(out.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
        assert_eq!(
            first,
            serde_json::json!({"input": "x", "target": "1", "answer_choices": null, "prompt_id": prompts[0].id,
                "prompt_name": "p", "example_ordinal": 0, "variant_ordinal": 0})
        );
        let keys: Vec<&str> = out.lines().next().unwrap().split("\":").map(|s| s.rsplit('"').next().unwrap()).collect();
        assert_eq!(&keys[..7], ["input", "target", "answer_choices", "prompt_id", "prompt_name", "example_ordinal", "variant_ordinal"]);
    }

    #[test]
    fn cross_product_rows_in_odometer_order() {
        let prompts = [Prompt::new("c", "{{choice(['A','B'])}} {{choice(['x','y','z'])}} ||| t")];
        let (out, report) = run("{}\n", &prompts, &MaterializeOptions::new(ChoiceStrategy::CrossProduct));
        assert_eq!(report.emitted, 6);
        let inputs: Vec<String> = out
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["input"].as_str().unwrap().to_owned())
            .collect();
        assert_eq!(inputs, ["A x", "A y", "A z", "B x", "B y", "B z"]);
    }

    #[test]
    fn skip_is_counted_not_emitted() {
        let prompts = [Prompt::new("g", "{% if label != -1 %}{{q}} ||| {{label}}{% endif %}")];
        let (out, report) = run("{\"label\":-1,\"q\":\"Q\"}\n", &prompts, &MaterializeOptions::new(ChoiceStrategy::SeededRandom(1)));
        assert!(out.is_empty());
        assert_eq!((report.emitted, report.skipped_empty, report.errored), (0, 1, 0));
    }

    #[test]
    fn errors_are_counted_or_abort() {
        let prompts = [Prompt::new("p", "{{q}} ||| {{a}}")];
        let data = "{\"q\":\"x\",\"a\":1}\n{\"q\":\"y\"}\n{\"q\":\"z\",\"a\":3}\n";
        let (out, report) = run(data, &prompts, &MaterializeOptions::new(ChoiceStrategy::FirstChoice));
        assert_eq!(out.lines().count(), 2);
        assert_eq!((report.examples_read, report.emitted, report.errored), (3, 2, 1));
        assert_eq!(report.first_errors[0].example_ordinal, 1);
        assert_eq!(report.attempts(), 3);

        let mut options = MaterializeOptions::new(ChoiceStrategy::FirstChoice);
        options.fail_fast = true;
        let mut sink = Vec::new();
        let err = materialize(records(data), &prompts, &options, &mut sink).unwrap_err();
        assert!(matches!(err, MaterializeError::Render(e) if e.example_ordinal == 1));
        assert_eq!(String::from_utf8(sink).unwrap().lines().count(), 1);
    }

    #[test]
    fn error_samples_are_capped() {
        let prompts = [Prompt::new("p", "{{missing}}")];
        let data = "{}\n".repeat(25);
        let (_, report) = run(&data, &prompts, &MaterializeOptions::new(ChoiceStrategy::FirstChoice));
        assert_eq!(report.errored, 25);
        assert_eq!(report.first_errors.len(), MaterializeReport::MAX_ERROR_SAMPLES);
    }

    #[test]
    fn input_errors_abort() {
        let prompts = [Prompt::new("p", "x")];
        let err = materialize(records("{}\nnope\n"), &prompts, &MaterializeOptions::new(ChoiceStrategy::FirstChoice), &mut Vec::new())
            .unwrap_err();
        assert!(matches!(err, MaterializeError::Input(JsonlError::Parse { line: 2, .. })));
    }

    #[test]
    fn output_order_is_example_then_prompt() {
        let prompts = [Prompt::new("first", "A{{n}}"), Prompt::new("second", "B{{n}}")];
        let data: String = (0..5).map(|n| format!("{{\"n\":{n}}}\n")).collect();
        let mut options = MaterializeOptions::new(ChoiceStrategy::FirstChoice);
        options.chunk_size = 2;
        let (out, _) = run(&data, &prompts, &options);
        let inputs: Vec<String> = out
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["input"].as_str().unwrap().to_owned())
            .collect();
        assert_eq!(inputs, ["A0", "B0", "A1", "B1", "A2", "B2", "A3", "B3", "A4", "B4"]);
    }
}
