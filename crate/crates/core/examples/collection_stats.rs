//! Save a few collections to a store directory and compute statistics.
//!
//!     cargo run --example collection_stats

use promptforge::prompt::Prompt;
use promptforge::store::{self, PromptCollection};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    for (key, size, original) in [("ag_news", 7, 7), ("super_glue/rte", 10, 6), ("super_glue/cb", 5, 5), ("xsum", 9, 3)] {
        let prompts = (0..size)
            .map(|i| {
                let mut p = Prompt::new(format!("prompt {i}"), "Text: {{text}} ||| {{label}}");
                p.metadata.original_task = i < original;
                p
            })
            .collect();
        store::save_collection(root.path(), &PromptCollection { key: key.parse()?, prompts })?;
    }

    let rte = store::load_collection(root.path(), &"super_glue/rte".parse()?)?;
    println!("{}", rte.to_canonical_json().lines().take(14).collect::<Vec<_>>().join("\n"));
    println!("...");

    let stats = store::compute_stats(&store::load_all(root.path())?);
    println!("{}", serde_json::to_string_pretty(&stats)?);
    println!("{} prompts per subset on average", stats.prompts_per_subset_mean);
    Ok(())
}
