//! Command-line front end: `apply`, `validate`, `stats`, `serve`.
//!
//! Exit codes: 0 success, 1 usage, 2 lint errors, 3 IO or data errors,
//! 4 render failure under `--fail-fast`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::lint;
use crate::materialize::{self, open_jsonl, ExampleRecord, MaterializeError, MaterializeOptions};
use crate::prompt::{ChoiceStrategy, DEFAULT_MAX_VARIANTS};
use crate::server::{self, ServiceConfig};
use crate::store::{self, DatasetKey, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_LINT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_RENDER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "promptforge", version, about = "Author, review and materialize prompt templates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a dataset's prompts to a JSONL file of examples.
    Apply {
        #[arg(long)]
        prompts: PathBuf,
        /// `dataset` or `dataset/subset`.
        #[arg(long)]
        dataset: DatasetKey,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `seeded:<u64>`, `cross`, `fixed:<i,j,...>` or `first`.
        #[arg(long)]
        strategy: ChoiceStrategy,
        /// Only apply the prompt with this name.
        #[arg(long)]
        prompt_name: Option<String>,
        #[arg(long)]
        fail_fast: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_VARIANTS)]
        max_variants: usize,
        /// Rendering threads (defaults to one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Skip malformed input lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Lint every collection; findings are printed as JSON lines.
    Validate {
        #[arg(long)]
        prompts: PathBuf,
        /// Examples for the dynamic rules (first 16 lines are used).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Only lint this collection.
        #[arg(long)]
        dataset: Option<DatasetKey>,
    },
    /// Collection statistics.
    Stats {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the authoring API.
    Serve {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        data_root: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory with the built UI bundle.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let rendered = e.render();
            let _ = if code == EXIT_OK { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match cli.command {
        Command::Apply { prompts, dataset, data, out: out_path, strategy, prompt_name, fail_fast, max_variants, workers, lenient } => {
            let options = MaterializeOptions {
                max_variants,
                fail_fast,
                workers,
                ..MaterializeOptions::new(strategy)
            };
            apply(&prompts, &dataset, &data, &out_path, prompt_name.as_deref(), &options, lenient, err)
        }
        Command::Validate { prompts, data, dataset } => validate(&prompts, data.as_deref(), dataset.as_ref(), out, err),
        Command::Stats { prompts, json } => stats(&prompts, json, out, err),
        Command::Serve { prompts, data_root, port, host, static_dir } => {
            let config = ServiceConfig { prompts_root: prompts, data_root, static_dir };
            let addr = SocketAddr::new(host, port);
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => {
                    let _ = writeln!(err, "error: starting runtime: {e}");
                    return EXIT_IO;
                }
            };
            let _ = writeln!(err, "serving on http://{addr}");
            match runtime.block_on(server::serve(config, addr)) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_IO
                }
            }
        }
    }
}

fn store_exit(e: &StoreError) -> i32 {
    match e {
        StoreError::Template { .. } => EXIT_LINT,
        _ => EXIT_IO,
    }
}

#[allow(clippy::too_many_arguments)]
fn apply(
    prompts_root: &Path,
    key: &DatasetKey,
    data: &Path,
    out_path: &Path,
    prompt_name: Option<&str>,
    options: &MaterializeOptions,
    lenient: bool,
    err: &mut dyn Write,
) -> i32 {
    let collection = match store::load_collection(prompts_root, key) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return store_exit(&e);
        }
    };
    let prompts = match prompt_name {
        Some(name) => match collection.by_name(name) {
            Some(p) => vec![p.clone()],
            None => {
                let _ = writeln!(err, "error: no prompt named `{name}` in `{key}`");
                return EXIT_USAGE;
            }
        },
        None => collection.prompts,
    };
    let reader = match open_jsonl(data) {
        Ok(r) if lenient => r.lenient(),
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", data.display());
            return EXIT_IO;
        }
    };
    let file = match File::create(out_path) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", out_path.display());
            return EXIT_IO;
        }
    };
    let mut sink = BufWriter::new(file);
    match materialize::materialize(reader, &prompts, options, &mut sink) {
        Ok(report) => {
            let _ = writeln!(err, "{}", serde_json::to_string(&report).expect("report serializes"));
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                MaterializeError::Render(_) => EXIT_RENDER,
                MaterializeError::InvalidPrompt(_) => EXIT_LINT,
                _ => EXIT_IO,
            }
        }
    }
}

fn read_samples(path: &Path) -> Result<Vec<ExampleRecord>, String> {
    let reader = open_jsonl(path).map_err(|e| format!("{}: {e}", path.display()))?;
    reader
        .take(lint::SAMPLE_SIZE)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn validate(prompts_root: &Path, data: Option<&Path>, only: Option<&DatasetKey>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let samples = match data.map(read_samples).transpose() {
        Ok(s) => s.unwrap_or_default(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_IO;
        }
    };
    let keys = match only {
        Some(key) => vec![key.clone()],
        None => match store::list_collections(prompts_root) {
            Ok(keys) => keys,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_IO;
            }
        },
    };
    let mut errors = 0;
    for key in keys {
        let collection = match store::read_collection(prompts_root, &key) {
            Ok(c) => c,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_IO;
            }
        };
        for finding in lint::lint_collection(&collection, &samples) {
            errors += usize::from(finding.is_error());
            let _ = writeln!(out, "{}", serde_json::to_string(&finding).expect("findings serialize"));
        }
    }
    if errors > 0 {
        let _ = writeln!(err, "{errors} error finding(s)");
        EXIT_LINT
    } else {
        EXIT_OK
    }
}

fn stats(prompts_root: &Path, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let collections = match store::load_all(prompts_root) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return store_exit(&e);
        }
    };
    let stats = store::compute_stats(&collections);
    let result = if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&stats).expect("stats serialize"))
    } else {
        (|| {
            writeln!(out, "datasets:                        {}", stats.dataset_count)?;
            writeln!(out, "subsets:                         {}", stats.subset_count)?;
            writeln!(out, "prompts:                         {}", stats.prompt_count)?;
            writeln!(out, "original-task prompts:           {}", stats.original_task_prompt_count)?;
            writeln!(out, "prompts per subset:              {}", stats.prompts_per_subset_mean)?;
            writeln!(out, "original-task prompts per subset: {}", stats.original_task_per_subset_mean)?;
            writeln!(out, "histogram (prompts -> subsets):")?;
            for (prompts, subsets) in &stats.histogram {
                writeln!(out, "  {prompts:>4} -> {subsets}")?;
            }
            Ok(())
        })()
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}
