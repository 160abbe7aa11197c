//! Prompts, their metadata, and applying one prompt to one example.

use serde::{Serialize, Serializer};

use crate::template::{
    self, render_cross_product, ChoiceResolver, CrossProductError, Map, RenderContext, RenderError, TemplateAst,
    TemplateError,
};

/// The marker between conditioning text and target in a rendered prompt.
pub const SEPARATOR: &str = "|||";

/// Default upper bound on cross-product variants per (prompt, example).
pub const DEFAULT_MAX_VARIANTS: usize = 256;

/// The open metric vocabulary offered to authors.
pub const METRIC_VOCABULARY: [&str; 6] = ["Accuracy", "BLEU", "ROUGE", "F1", "Squad", "Other"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptMetadata {
    pub name: String,
    /// Bibliographic reference or authoring rationale.
    pub reference: String,
    /// Whether the prompt expresses the task the dataset was built for.
    pub original_task: bool,
    /// Whether the input text spells out the valid outputs.
    pub choices_in_prompt: bool,
    pub metrics: Vec<String>,
    pub languages: Vec<String>,
}

impl Default for PromptMetadata {
    fn default() -> Self {
        Self {
            name: String::new(),
            reference: String::new(),
            original_task: false,
            choices_in_prompt: false,
            metrics: Vec::new(),
            languages: vec!["en".to_owned()],
        }
    }
}

/// A template plus metadata. Held as plain data so that invalid prompts can
/// still be loaded and linted; [`Prompt::compile`] enforces the invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub id: String,
    pub template: String,
    pub answer_choices: Option<String>,
    pub metadata: PromptMetadata,
}

#[derive(Serialize)]
struct PromptRecord<'a> {
    id: &'a str,
    name: &'a str,
    reference: &'a str,
    original_task: bool,
    choices_in_prompt: bool,
    metrics: &'a [String],
    languages: &'a [String],
    answer_choices: Option<&'a str>,
    template: &'a str,
}

/// Flat object in canonical key order.
impl Serialize for Prompt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PromptRecord {
            id: &self.id,
            name: &self.metadata.name,
            reference: &self.metadata.reference,
            original_task: self.metadata.original_task,
            choices_in_prompt: self.metadata.choices_in_prompt,
            metrics: &self.metadata.metrics,
            languages: &self.metadata.languages,
            answer_choices: self.answer_choices.as_deref(),
            template: &self.template,
        }
        .serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template of prompt `{name}`: {source}")]
    Template { name: String, source: TemplateError },
    #[error("answer choices of prompt `{name}`: {source}")]
    AnswerChoicesTemplate { name: String, source: TemplateError },
    #[error("prompt `{0}` sets choices_in_prompt but declares no answer choices")]
    ChoicesInPromptWithoutAnswerChoices(String),
    #[error("prompt name must not be blank")]
    BlankName,
    #[error("prompt `{name}` has invalid id `{id}` (expected a lowercase hyphenated UUID)")]
    InvalidId { name: String, id: String },
    #[error("prompt `{0}` has an empty metric entry")]
    EmptyMetric(String),
}

impl PromptError {
    /// Byte offset into the offending template, when there is one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            Self::Template { source, .. } | Self::AnswerChoicesTemplate { source, .. } => Some(source.offset()),
            _ => None,
        }
    }
}

pub fn new_prompt_id() -> String {
    uuid::Uuid::new_v4().hyphenated().to_string()
}

pub fn is_canonical_id(id: &str) -> bool {
    uuid::Uuid::parse_str(id).is_ok_and(|u| u.hyphenated().to_string() == id)
}

impl Prompt {
    /// A prompt with a fresh id and default metadata.
    pub fn new(name: impl Into<String>, template: impl Into<String>) -> Self {
        Self {
            id: new_prompt_id(),
            template: template.into(),
            answer_choices: None,
            metadata: PromptMetadata { name: name.into(), ..PromptMetadata::default() },
        }
    }

    pub fn with_answer_choices(mut self, answer_choices: impl Into<String>) -> Self {
        self.answer_choices = Some(answer_choices.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.metadata.name
    }

    /// Checks the invariants and parses both templates.
    pub fn compile(&self) -> Result<CompiledPrompt, PromptError> {
        let name = &self.metadata.name;
        if name.trim().is_empty() {
            return Err(PromptError::BlankName);
        }
        if !is_canonical_id(&self.id) {
            return Err(PromptError::InvalidId { name: name.clone(), id: self.id.clone() });
        }
        if self.metadata.metrics.iter().any(|m| m.is_empty()) {
            return Err(PromptError::EmptyMetric(name.clone()));
        }
        if self.metadata.choices_in_prompt && self.answer_choices.is_none() {
            return Err(PromptError::ChoicesInPromptWithoutAnswerChoices(name.clone()));
        }
        let template = template::parse(&self.template)
            .map_err(|source| PromptError::Template { name: name.clone(), source })?;
        let answer_choices = self
            .answer_choices
            .as_deref()
            .map(template::parse)
            .transpose()
            .map_err(|source| PromptError::AnswerChoicesTemplate { name: name.clone(), source })?;
        Ok(CompiledPrompt { prompt: self.clone(), template, answer_choices })
    }

    /// Compiles and applies in one step. Prefer [`CompiledPrompt::apply`]
    /// when applying to many examples.
    pub fn apply(&self, example: &Map, example_ordinal: u64, strategy: &ChoiceStrategy) -> Result<Application, ApplyError> {
        let compiled = self.compile().map_err(|e| ApplyError {
            prompt_id: self.id.clone(),
            example_ordinal,
            kind: ApplyErrorKind::Invalid(e),
        })?;
        compiled.apply(example, example_ordinal, strategy)
    }
}

/// How `choice()` calls are resolved when applying a prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChoiceStrategy {
    /// One render per example, drawing from the example's seeded stream.
    SeededRandom(u64),
    /// One render per combination of choice indices.
    CrossProduct,
    /// One render with the k-th call taking `indices[k]`.
    FixedPath(Vec<usize>),
    /// One render taking the first element at every call; the stable
    /// preview used while editing.
    FirstChoice,
}

impl std::str::FromStr for ChoiceStrategy {
    type Err = String;

    /// `seeded:<u64>`, `cross`, `fixed:<i,j,...>` or `first`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "cross" {
            return Ok(Self::CrossProduct);
        }
        if s == "first" {
            return Ok(Self::FirstChoice);
        }
        if let Some(seed) = s.strip_prefix("seeded:") {
            return seed.parse().map(Self::SeededRandom).map_err(|_| format!("invalid seed `{seed}`"));
        }
        if let Some(path) = s.strip_prefix("fixed:") {
            if path.is_empty() {
                return Ok(Self::FixedPath(Vec::new()));
            }
            return path
                .split(',')
                .map(|i| i.trim().parse::<usize>().map_err(|_| format!("invalid index `{i}`")))
                .collect::<Result<_, _>>()
                .map(Self::FixedPath);
        }
        Err(format!("unknown strategy `{s}` (expected seeded:<u64>, cross, fixed:<i,j,...> or first)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptedExample {
    pub input: String,
    pub target: String,
    pub answer_choices: Option<Vec<String>>,
    pub prompt_id: String,
    pub example_ordinal: u64,
    /// Rank of the choice combination in odometer order (0 outside the
    /// cross-product strategy).
    pub variant_ordinal: u64,
}

/// Result of applying one prompt to one example.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Application {
    pub emitted: Vec<PromptedExample>,
    /// Variants whose rendered input was blank.
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`|||` occurs {0} times; expected at most one")]
pub struct MultipleSeparators(pub usize);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnswerChoicesError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("answer choices rendered to no non-empty entries")]
    EmptyChoices,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApplyErrorKind {
    #[error(transparent)]
    Invalid(PromptError),
    #[error("answer choices: {0}")]
    AnswerChoices(AnswerChoicesError),
    #[error(transparent)]
    Render(RenderError),
    #[error(transparent)]
    MultipleSeparators(#[from] MultipleSeparators),
    #[error("more than {0} choice combinations")]
    TooManyVariants(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("prompt {prompt_id}, example {example_ordinal}: {kind}")]
pub struct ApplyError {
    pub prompt_id: String,
    pub example_ordinal: u64,
    pub kind: ApplyErrorKind,
}

/// Splits a rendered prompt at its separator. `None` means the render was
/// blank and the example is skipped.
pub fn split_separator(rendered: &str) -> Result<Option<(String, String)>, MultipleSeparators> {
    if rendered.trim().is_empty() {
        return Ok(None);
    }
    let count = rendered.matches(SEPARATOR).count();
    if count > 1 {
        return Err(MultipleSeparators(count));
    }
    Ok(Some(match rendered.split_once(SEPARATOR) {
        Some((input, target)) => (input.trim().to_owned(), target.trim().to_owned()),
        None => (rendered.trim().to_owned(), String::new()),
    }))
}

/// Renders an answer-choices template and splits it into the choice list.
/// `answer_choices` is not in scope here, and `choice()` calls take their
/// first element.
pub fn parse_answer_choices(ast: &TemplateAst, example: &Map) -> Result<Vec<String>, AnswerChoicesError> {
    let mut ctx = RenderContext::new(example, ChoiceResolver::recording());
    let rendered = template::render(ast, &mut ctx)?;
    let choices: Vec<String> = rendered
        .split(SEPARATOR)
        .map(str::trim)
        .filter(|piece| !piece.is_empty())
        .map(str::to_owned)
        .collect();
    if choices.is_empty() {
        return Err(AnswerChoicesError::EmptyChoices);
    }
    Ok(choices)
}

/// A prompt whose invariants hold and whose templates are parsed.
#[derive(Debug, Clone)]
pub struct CompiledPrompt {
    prompt: Prompt,
    template: TemplateAst,
    answer_choices: Option<TemplateAst>,
}

impl CompiledPrompt {
    /// Skips the metadata invariants; used to exercise templates of prompts
    /// that are still under review.
    pub(crate) fn from_parts(prompt: Prompt, template: TemplateAst, answer_choices: Option<TemplateAst>) -> Self {
        Self { prompt, template, answer_choices }
    }

    pub fn prompt(&self) -> &Prompt {
        &self.prompt
    }

    pub fn template_ast(&self) -> &TemplateAst {
        &self.template
    }

    pub fn answer_choices_ast(&self) -> Option<&TemplateAst> {
        self.answer_choices.as_ref()
    }

    pub fn apply(&self, example: &Map, example_ordinal: u64, strategy: &ChoiceStrategy) -> Result<Application, ApplyError> {
        self.apply_bounded(example, example_ordinal, strategy, DEFAULT_MAX_VARIANTS)
    }

    pub fn apply_bounded(
        &self,
        example: &Map,
        example_ordinal: u64,
        strategy: &ChoiceStrategy,
        max_variants: usize,
    ) -> Result<Application, ApplyError> {
        let fail = |kind| ApplyError { prompt_id: self.prompt.id.clone(), example_ordinal, kind };
        let answer_choices = self
            .answer_choices
            .as_ref()
            .map(|ast| parse_answer_choices(ast, example))
            .transpose()
            .map_err(|e| fail(ApplyErrorKind::AnswerChoices(e)))?;
        let choices = answer_choices.as_deref();

        let renders: Vec<(u64, String)> = match strategy {
            ChoiceStrategy::CrossProduct => render_cross_product(&self.template, example, choices, max_variants)
                .map_err(|e| {
                    fail(match e {
                        CrossProductError::Render(e) => ApplyErrorKind::Render(e),
                        CrossProductError::TooManyVariants(n) => ApplyErrorKind::TooManyVariants(n),
                    })
                })?
                .into_iter()
                .enumerate()
                .map(|(rank, v)| (rank as u64, v.rendered))
                .collect(),
            single => {
                let resolver = match single {
                    ChoiceStrategy::SeededRandom(seed) => ChoiceResolver::seeded(*seed, example_ordinal),
                    ChoiceStrategy::FixedPath(indices) => ChoiceResolver::fixed(indices.clone()),
                    _ => ChoiceResolver::recording(),
                };
                let mut ctx = RenderContext::new(example, resolver).with_answer_choices(choices);
                let rendered = template::render(&self.template, &mut ctx).map_err(|e| fail(ApplyErrorKind::Render(e)))?;
                vec![(0, rendered)]
            }
        };

        let mut out = Application::default();
        for (variant_ordinal, rendered) in renders {
            match split_separator(&rendered).map_err(|e| fail(e.into()))? {
                Some((input, target)) if !input.is_empty() => out.emitted.push(PromptedExample {
                    input,
                    target,
                    answer_choices: answer_choices.clone(),
                    prompt_id: self.prompt.id.clone(),
                    example_ordinal,
                    variant_ordinal,
                }),
                _ => out.skipped += 1,
            }
        }
        Ok(out)
    }
}
