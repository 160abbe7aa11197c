//! Parse a template and render it against one example.
//!
//!     cargo run --example render_template

use promptforge::template::{self, ChoiceResolver, Map, RenderContext, Value};

fn main() {
    let source = "{% if hypothesis %}If {{premise}} is true, is it also true that {{ hypothesis | lower }}?{% endif %} ||| {{entailed}}";
    let ast = template::parse(source).expect("template parses");

    let mut example = Map::new();
    example.insert("premise".into(), Value::Str("A dog runs".into()));
    example.insert("hypothesis".into(), Value::Str("An Animal Moves".into()));
    example.insert("entailed".into(), Value::Str("yes".into()));

    let mut ctx = RenderContext::new(&example, ChoiceResolver::recording());
    let rendered = template::render(&ast, &mut ctx).expect("renders");
    println!("{rendered}");

    // Errors carry a byte offset into the source.
    for broken in ["Hello {{name", "{% if x %}unclosed", "{{ premise | shout }}"] {
        let err = template::parse(broken).unwrap_err();
        println!("{broken:?}: {err} (offset {})", err.offset());
    }
    let missing = template::parse("Read {{passage}}").unwrap();
    let err = template::render(&missing, &mut RenderContext::new(&example, ChoiceResolver::recording())).unwrap_err();
    println!("render error at offset {}: {err}", err.offset);
}
