//! The templating dialect: `{{ expr }}` interpolation, `{% if %}`/`{% for %}`
//! /`{% set %}` statements, a small expression language with a closed set of
//! filters, and the `choice(list)` function.
//!
//! No whitespace is trimmed around tags; what is written is what renders.

pub mod ast;
mod choice;
mod lexer;
mod parser;
mod render;
mod value;

pub use ast::{BinaryOp, Expr, FilterName, Function, Node, TemplateAst, UnaryOp};
pub use choice::{example_stream_seed, splitmix64_next, ChoiceFailure, ChoiceMode, ChoiceResolver, GOLDEN_GAMMA};
pub use lexer::{tokenize, Keyword, Punct, Token, TokenKind};
pub use parser::parse;
pub use render::{
    enumerate_choice_shape, render, render_cross_product, CrossProductError, RenderContext, RenderError,
    RenderErrorKind, Variant,
};
pub use value::{Map, Value};

/// Template text that failed to lex or parse.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unterminated `{delimiter}` opened at byte {offset}")]
    UnterminatedDelimiter { offset: usize, delimiter: &'static str },
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

impl TemplateError {
    pub fn offset(&self) -> usize {
        match self {
            Self::UnterminatedDelimiter { offset, .. } | Self::Syntax { offset, .. } => *offset,
        }
    }
}
