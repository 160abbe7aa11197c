//! A prompt with answer choices: the target indexes into them.
//!
//!     cargo run --example answer_choices

use promptforge::prompt::{ChoiceStrategy, Prompt};
use promptforge::template::{Map, Value};

fn main() {
    let mut prompt = Prompt::new(
        "does it follow",
        "{{premise}} Does it follow that {{hypothesis}}? {{ answer_choices | join(' or ') }}? ||| {{ answer_choices[label] }}",
    )
    .with_answer_choices("yes ||| maybe ||| no");
    prompt.metadata.choices_in_prompt = true;
    prompt.metadata.original_task = true;
    prompt.metadata.metrics = vec!["Accuracy".into()];

    let compiled = prompt.compile().expect("valid prompt");
    for (ordinal, label) in [0i64, 2].into_iter().enumerate() {
        let mut example = Map::new();
        example.insert("premise".into(), Value::Str("The cat sat on the mat.".into()));
        example.insert("hypothesis".into(), Value::Str("A cat is sitting".into()));
        example.insert("label".into(), Value::Int(label));
        let application = compiled.apply(&example, ordinal as u64, &ChoiceStrategy::FirstChoice).unwrap();
        for row in application.emitted {
            println!("{}", serde_json::to_string_pretty(&row).unwrap());
        }
    }
}
