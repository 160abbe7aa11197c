//! Apply a collection to a JSONL file and stream prompted examples out.
//!
//!     cargo run --example materialize_jsonl

use std::io::Write;

use promptforge::materialize::{materialize, open_jsonl, MaterializeOptions, Strategy};
use promptforge::prompt::Prompt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("boolq.jsonl");
    let mut file = std::fs::File::create(&data)?;
    writeln!(file, r#"{{"passage": "Water boils at 100 C at sea level.", "question": "does water boil at 100 c", "answer": true}}"#)?;
    writeln!(file, r#"{{"passage": "", "question": "is the moon made of cheese", "answer": false}}"#)?;
    writeln!(file, r#"{{"passage": "Paris is in France.", "question": "is paris in france", "answer": true}}"#)?;
    drop(file);

    let prompts = vec![
        Prompt::new("read and answer", "{% if passage %}{{passage}}\n\nQuestion: {{question}}?{% endif %} ||| {{ answer_choices[answer] }}")
            .with_answer_choices("No ||| Yes"),
        Prompt::new("yes or no", "{{ choice(['Yes or no', 'True or false']) }}: {{question}}? ||| {{ answer_choices[answer] }}")
            .with_answer_choices("No ||| Yes"),
    ];

    let mut options = MaterializeOptions::new(Strategy::SeededRandom(42));
    options.workers = Some(2);
    let stdout = std::io::stdout();
    let report = materialize(open_jsonl(&data)?, &prompts, &options, &mut stdout.lock())?;
    eprintln!("{}", serde_json::to_string(&report)?);
    Ok(())
}
