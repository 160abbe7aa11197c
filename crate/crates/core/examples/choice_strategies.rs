//! The four ways of resolving `choice()` calls.
//!
//!     cargo run --example choice_strategies

use promptforge::prompt::{ChoiceStrategy, Prompt};
use promptforge::template::{Map, Value};

fn main() {
    let prompt = Prompt::new(
        "varied wording",
        "{{ choice(['Question:', 'Q:']) }} {{question}} {{ choice(['Answer briefly.', 'Explain.', '']) }} ||| {{answer}}",
    );
    let mut example = Map::new();
    example.insert("question".into(), Value::Str("What colour is the sky?".into()));
    example.insert("answer".into(), Value::Str("blue".into()));

    for strategy in ["first", "fixed:1,0", "seeded:7", "seeded:8", "cross"] {
        let strategy: ChoiceStrategy = strategy.parse().unwrap();
        println!("{strategy:?}");
        // Same seed and ordinal always give the same draw.
        let application = prompt.apply(&example, 3, &strategy).unwrap();
        for row in application.emitted {
            println!("  #{} {:?}", row.variant_ordinal, row.input);
        }
    }

    let err = prompt.apply(&example, 0, &ChoiceStrategy::FixedPath(vec![0])).unwrap_err();
    println!("short path: {err}");
}
