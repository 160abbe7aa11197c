//! Authoring guidelines as automatic checks.
//!
//! | rule | severity | check |
//! |------|----------|-------|
//! | L001 | ERROR    | template or answer choices fail to parse |
//! | L002 | ERROR    | a sampled render fails (e.g. more than one `\|\|\|`) |
//! | L003 | ERROR    | `choices_in_prompt` without answer choices |
//! | L004 | ERROR    | blank name |
//! | L005 | WARNING  | target text starts with "The answer is" / "Answer:" |
//! | L006 | WARNING  | no metrics |
//! | L007 | WARNING  | input has no literal wording (3+ letters in a row) |
//! | L008 | WARNING  | every sampled render was skipped |
//! | L009 | WARNING  | no separator, so the target is empty |
//! | L010 | WARNING  | `choice()` nested inside a `choice()` list |
//! | C001 | WARNING  | fewer than 5 prompts in the collection |
//! | C002 | ERROR    | duplicate prompt names |
//! | C003 | WARNING  | no original-task prompt |

use std::collections::BTreeMap;

use serde::Serialize;

use crate::materialize::ExampleRecord;
use crate::prompt::{ApplyErrorKind, ChoiceStrategy, CompiledPrompt, Prompt, SEPARATOR};
use crate::store::PromptCollection;
use crate::template::{self, Expr, Function, Node, TemplateAst};

/// Examples rendered per prompt by the dynamic rules.
pub const SAMPLE_SIZE: usize = 16;

/// Collections below this size get C001.
pub const MIN_PROMPTS_PER_COLLECTION: usize = 5;

const TARGET_PREFIXES: [&str; 2] = ["The answer is", "Answer:"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintFinding {
    pub rule: &'static str,
    pub severity: Severity,
    pub prompt_name: Option<String>,
    pub message: String,
    #[serde(skip)]
    pub location: Option<usize>,
}

impl LintFinding {
    fn new(rule: &'static str, severity: Severity, prompt: Option<&Prompt>, message: impl Into<String>) -> Self {
        Self {
            rule,
            severity,
            prompt_name: prompt.map(|p| p.metadata.name.clone()),
            message: message.into(),
            location: None,
        }
    }

    fn at(mut self, offset: usize) -> Self {
        self.location = Some(offset);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

pub fn has_errors(findings: &[LintFinding]) -> bool {
    findings.iter().any(LintFinding::is_error)
}

/// Checks one prompt. With no samples only the static rules run.
pub fn lint_prompt(prompt: &Prompt, samples: &[ExampleRecord]) -> Vec<LintFinding> {
    let p = Some(prompt);
    let mut findings = Vec::new();
    let error = |rule, message: String| LintFinding::new(rule, Severity::Error, p, message);
    let warning = |rule, message: String| LintFinding::new(rule, Severity::Warning, p, message);

    if prompt.metadata.choices_in_prompt && prompt.answer_choices.is_none() {
        findings.push(error("L003", "choices_in_prompt is set but no answer choices are declared".into()));
    }
    if prompt.metadata.name.trim().is_empty() {
        findings.push(error("L004", "prompt name is blank".into()));
    }
    if prompt.metadata.metrics.is_empty() {
        findings.push(warning("L006", "no metrics listed".into()));
    }

    let template = template::parse(&prompt.template);
    let answer_choices = prompt.answer_choices.as_deref().map(template::parse).transpose();
    let (template, answer_choices) = match (template, answer_choices) {
        (Ok(t), Ok(a)) => (t, a),
        (Err(e), _) => {
            findings.push(error("L001", format!("template does not parse: {e}")).at(e.offset()));
            return sorted(findings);
        }
        (_, Err(e)) => {
            findings.push(error("L001", format!("answer choices do not parse: {e}")).at(e.offset()));
            return sorted(findings);
        }
    };

    let skeleton = literal_skeleton(&template);
    for target in skeleton.split(SEPARATOR).skip(1) {
        let target = target.trim_start();
        if let Some(prefix) = TARGET_PREFIXES.iter().find(|p| starts_with_ignore_case(target, p)) {
            findings.push(warning("L005", format!("target starts with \"{prefix}\"; keep only the answer and move wording to the input")));
            break;
        }
    }
    let input_side = skeleton.split(SEPARATOR).next().unwrap_or_default();
    if !has_word(input_side) {
        findings.push(warning("L007", "input has no literal natural-language wording".into()));
    }
    if !skeleton.contains(SEPARATOR) {
        findings.push(warning("L009", "template has no `|||` separator; the target will be empty".into()));
    }
    if let Some(offset) = nested_choice(&template) {
        findings.push(warning("L010", "choice() nested inside another choice() list".into()).at(offset));
    }

    if !samples.is_empty() {
        let compiled = CompiledPrompt::from_parts(prompt.clone(), template, answer_choices);
        let mut skipped = 0;
        let mut failed = false;
        for record in samples.iter().take(SAMPLE_SIZE) {
            match compiled.apply(&record.fields, record.ordinal, &ChoiceStrategy::FirstChoice) {
                Ok(application) if application.emitted.is_empty() => skipped += 1,
                Ok(_) => {}
                Err(e) => {
                    if !failed {
                        let mut finding = error("L002", format!("example {}: {}", record.ordinal, e.kind));
                        if let ApplyErrorKind::Render(r) = &e.kind {
                            finding = finding.at(r.offset);
                        }
                        findings.push(finding);
                    }
                    failed = true;
                }
            }
        }
        if !failed && skipped == samples.len().min(SAMPLE_SIZE) {
            findings.push(warning("L008", format!("all {skipped} sampled examples were skipped")));
        }
    }
    sorted(findings)
}

/// Per-prompt findings in prompt order, then the collection-level rules.
pub fn lint_collection(collection: &PromptCollection, samples: &[ExampleRecord]) -> Vec<LintFinding> {
    let mut findings: Vec<LintFinding> = collection.prompts.iter().flat_map(|p| lint_prompt(p, samples)).collect();
    let mut collection_findings = Vec::new();
    if collection.len() < MIN_PROMPTS_PER_COLLECTION {
        collection_findings.push(LintFinding::new(
            "C001",
            Severity::Warning,
            None,
            format!("{} has {} prompts; aim for at least {MIN_PROMPTS_PER_COLLECTION}", collection.key, collection.len()),
        ));
    }
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &collection.prompts {
        *names.entry(p.metadata.name.as_str()).or_default() += 1;
    }
    for (name, count) in names.into_iter().filter(|(_, c)| *c > 1) {
        collection_findings.push(LintFinding {
            rule: "C002",
            severity: Severity::Error,
            prompt_name: Some(name.to_owned()),
            message: format!("{count} prompts are named `{name}`"),
            location: None,
        });
    }
    if collection.original_task_count() == 0 {
        collection_findings.push(LintFinding::new(
            "C003",
            Severity::Warning,
            None,
            format!("{} has no original-task prompt", collection.key),
        ));
    }
    findings.extend(collection_findings);
    findings
}

fn sorted(mut findings: Vec<LintFinding>) -> Vec<LintFinding> {
    findings.sort_by_key(|f| f.rule);
    findings
}

/// Literal text of every branch in source order, with interpolations
/// replaced by U+FFFC.
fn literal_skeleton(ast: &TemplateAst) -> String {
    let mut out = String::new();
    ast.walk_nodes(&mut |node| match node {
        Node::Literal(text) => out.push_str(text),
        Node::Interp { .. } => out.push('\u{FFFC}'),
        _ => {}
    });
    out
}

fn has_word(text: &str) -> bool {
    let mut run = 0;
    for c in text.chars() {
        run = if c.is_alphabetic() { run + 1 } else { 0 };
        if run >= 3 {
            return true;
        }
    }
    false
}

fn starts_with_ignore_case(text: &str, prefix: &str) -> bool {
    text.get(..prefix.len()).is_some_and(|head| head.eq_ignore_ascii_case(prefix))
}

/// Offset of the first node holding a `choice()` inside a `choice()` list.
fn nested_choice(ast: &TemplateAst) -> Option<usize> {
    let mut found = None;
    ast.walk_nodes(&mut |node| {
        if found.is_some() {
            return;
        }
        let (exprs, offset): (Vec<&Expr>, usize) = match node {
            Node::Interp { expr, offset } | Node::Set { value: expr, offset, .. } => (vec![expr], *offset),
            Node::If { cond, elifs, offset, .. } => (std::iter::once(cond).chain(elifs.iter().map(|(c, _)| c)).collect(), *offset),
            Node::For { iterable, offset, .. } => (vec![iterable], *offset),
            Node::Literal(_) => return,
        };
        for expr in exprs {
            expr.walk(&mut |e| {
                if let Expr::Call(Function::Choice, args) = e {
                    let mut inner = false;
                    args[0].walk(&mut |a| inner |= matches!(a, Expr::Call(Function::Choice, _)));
                    if inner {
                        found = Some(offset);
                    }
                }
            });
        }
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::Value;

    fn prompt(template: &str) -> Prompt {
        let mut p = Prompt::new("p", template);
        p.metadata.metrics = vec!["Accuracy".into()];
        p
    }

    fn rules(findings: &[LintFinding]) -> Vec<&'static str> {
        findings.iter().map(|f| f.rule).collect()
    }

    fn samples(lines: &[serde_json::Value]) -> Vec<ExampleRecord> {
        lines
            .iter()
            .enumerate()
            .map(|(i, v)| ExampleRecord { ordinal: i as u64, fields: Value::map_from_json(v.as_object().unwrap()) })
            .collect()
    }

    #[test]
    fn answer_prefix_in_target() {
        assert_eq!(rules(&lint_prompt(&prompt("Question: {{q}} ||| The answer is {{a}}"), &[])), ["L005"]);
        assert_eq!(rules(&lint_prompt(&prompt("Question: {{q}} ||| answer: {{a}}"), &[])), ["L005"]);
        assert!(rules(&lint_prompt(&prompt("The answer is? {{q}} ||| {{a}}"), &[])).is_empty());
    }

    #[test]
    fn bare_placeholders_are_not_natural_language() {
        assert_eq!(rules(&lint_prompt(&prompt("{{a}} ||| {{b}}"), &[])), ["L007"]);
        assert_eq!(rules(&lint_prompt(&prompt("{{a}}? Q: {{b}} ||| {{c}}"), &[])), ["L007"]);
    }

    #[test]
    fn well_formed_prompt_is_clean() {
        let p = prompt("If {{premise}} is true, is it also true that {{hypothesis}}? ||| {{entailed}}");
        let s = samples(&[
            serde_json::json!({"premise": "P", "hypothesis": "H", "entailed": "yes"}),
            serde_json::json!({"premise": "A", "hypothesis": "B", "entailed": "no"}),
            serde_json::json!({"premise": "C", "hypothesis": "D", "entailed": "yes"}),
        ]);
        let findings = lint_prompt(&p, &s);
        assert!(!has_errors(&findings));
        assert!(findings.is_empty(), "{findings:?}");
    }

    #[test]
    fn parse_failure_reports_offset() {
        let findings = lint_prompt(&prompt("Say {{ x"), &[]);
        assert_eq!(rules(&findings), ["L001"]);
        assert_eq!(findings[0].location, Some(4));
        assert!(findings[0].is_error());
    }

    #[test]
    fn dynamic_rules() {
        let s = samples(&[serde_json::json!({"a": "x ||| y", "label": -1})]);
        assert_eq!(rules(&lint_prompt(&prompt("Text {{a}} ||| z"), &s)), ["L002"]);
        assert_eq!(rules(&lint_prompt(&prompt("Text {{missing}} ||| z"), &s)), ["L002"]);
        assert_eq!(rules(&lint_prompt(&prompt("{% if label != -1 %}Text ||| z{% endif %}"), &s)), ["L008"]);
    }

    #[test]
    fn metadata_rules() {
        let mut p = prompt("Tell me about {{a}} ||| {{b}}");
        p.metadata.choices_in_prompt = true;
        p.metadata.name = "  ".into();
        p.metadata.metrics.clear();
        assert_eq!(rules(&lint_prompt(&p, &[])), ["L003", "L004", "L006"]);
    }

    #[test]
    fn structure_rules() {
        assert_eq!(rules(&lint_prompt(&prompt("Write a story about {{a}}"), &[])), ["L009"]);
        assert_eq!(rules(&lint_prompt(&prompt("Pick {{choice([choice(['a','b']), 'c'])}} ||| x"), &[])), ["L010"]);
    }

    #[test]
    fn collection_rules() {
        let mut c = PromptCollection::new("d".parse().unwrap());
        for i in 0..3 {
            let mut p = prompt("Question {{q}} ||| {{a}}");
            p.metadata.name = format!("p{i}");
            p.metadata.original_task = true;
            c.prompts.push(p);
        }
        assert_eq!(rules(&lint_collection(&c, &[])), ["C001"]);

        for i in 3..6 {
            let mut p = prompt("Question {{q}} ||| {{a}}");
            p.metadata.name = format!("p{i}");
            p.metadata.original_task = true;
            c.prompts.push(p);
        }
        assert!(lint_collection(&c, &[]).is_empty());

        c.prompts[5].metadata.name = "p0".into();
        assert_eq!(rules(&lint_collection(&c, &[])), ["C002"]);
        c.prompts[5].metadata.name = "p5".into();
        c.prompts.iter_mut().for_each(|p| p.metadata.original_task = false);
        assert_eq!(rules(&lint_collection(&c, &[])), ["C003"]);
    }

    #[test]
    fn findings_serialize_to_four_keys() {
        let f = &lint_prompt(&prompt("Q ||| The answer is {{a}}"), &[])[0];
        let json = serde_json::to_value(f).unwrap();
        assert_eq!(json["rule"], "L005");
        assert_eq!(json["severity"], "WARNING");
        assert_eq!(json["prompt_name"], "p");
        assert_eq!(json.as_object().unwrap().len(), 4);
    }
}
