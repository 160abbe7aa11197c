//! Run the authoring checks over a small collection.
//!
//!     cargo run --example lint_collection

use promptforge::lint;
use promptforge::materialize::ExampleRecord;
use promptforge::prompt::Prompt;
use promptforge::store::PromptCollection;
use promptforge::template::{Map, Value};

fn main() {
    let mut chatty = Prompt::new("chatty", "Is {{claim}} true? ||| The answer is {{label}}");
    chatty.metadata.metrics = vec!["Accuracy".into()];
    let bare = Prompt::new("bare", "{{claim}} ||| {{label}}");
    let broken = Prompt::new("broken", "Claim: {{claim ||| {{label}}");
    let mut twice = Prompt::new("twice", "Claim: {{claim}} ||| {{label}} ||| again");
    twice.metadata.original_task = true;
    let collection = PromptCollection { key: "fever".parse().unwrap(), prompts: vec![chatty, bare, broken, twice] };

    let mut fields = Map::new();
    fields.insert("claim".into(), Value::Str("water is wet".into()));
    fields.insert("label".into(), Value::Str("SUPPORTS".into()));
    let samples = [ExampleRecord { ordinal: 0, fields }];

    let findings = lint::lint_collection(&collection, &samples);
    for finding in &findings {
        println!("{}", serde_json::to_string(finding).unwrap());
    }
    println!("review passes: {}", !lint::has_errors(&findings));
}
