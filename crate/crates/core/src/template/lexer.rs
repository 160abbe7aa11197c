//! Splits template source into literal text and expression tokens.
//!
//! Literal text is everything outside `{{ ... }}` and `{% ... %}`. The
//! separator `|||` is ordinary literal data at this level.

use std::ops::Range;

use super::TemplateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    And,
    Or,
    Not,
    In,
    True,
    False,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Pipe,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Tilde,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Literal(String),
    InterpOpen,
    InterpClose,
    StmtOpen,
    StmtClose,
    Ident(String),
    Keyword(Keyword),
    Int(i64),
    Float(f64),
    Str(String),
    Punct(Punct),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte range in the source.
    pub span: Range<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Interp,
    Stmt,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, TemplateError> {
    Lexer { src: source, pos: 0, tokens: Vec::new() }.run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> Result<Vec<Token>, TemplateError> {
        while self.pos < self.src.len() {
            let rest = &self.src[self.pos..];
            let next_open = find_open(rest);
            match next_open {
                Some((at, mode)) => {
                    if at > 0 {
                        self.push_literal(at);
                    }
                    self.lex_block(mode)?;
                }
                None => self.push_literal(rest.len()),
            }
        }
        Ok(self.tokens)
    }

    fn push_literal(&mut self, len: usize) {
        let span = self.pos..self.pos + len;
        self.tokens.push(Token {
            kind: TokenKind::Literal(self.src[span.clone()].to_owned()),
            span,
        });
        self.pos += len;
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.tokens.push(Token { kind, span: start..self.pos });
    }

    fn lex_block(&mut self, mode: Mode) -> Result<(), TemplateError> {
        let open_at = self.pos;
        self.pos += 2;
        self.push(
            match mode {
                Mode::Interp => TokenKind::InterpOpen,
                Mode::Stmt => TokenKind::StmtOpen,
            },
            open_at,
        );
        let bytes = self.src.as_bytes();
        loop {
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos >= bytes.len() {
                let what = if mode == Mode::Interp { "{{" } else { "{%" };
                return Err(TemplateError::UnterminatedDelimiter {
                    offset: open_at,
                    delimiter: what,
                });
            }
            let start = self.pos;
            let c = bytes[self.pos];
            let next = bytes.get(self.pos + 1).copied();
            match (c, next) {
                (b'}', Some(b'}')) if mode == Mode::Interp => {
                    self.pos += 2;
                    self.push(TokenKind::InterpClose, start);
                    return Ok(());
                }
                (b'%', Some(b'}')) if mode == Mode::Stmt => {
                    self.pos += 2;
                    self.push(TokenKind::StmtClose, start);
                    return Ok(());
                }
                (b'\'' | b'"', _) => self.lex_string(c)?,
                (b'0'..=b'9', _) => self.lex_number()?,
                (c, _) if c == b'_' || c.is_ascii_alphabetic() => self.lex_word(),
                _ => self.lex_punct()?,
            }
        }
    }

    fn lex_string(&mut self, quote: u8) -> Result<(), TemplateError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, ch)) = chars.next() {
            match ch {
                '\\' => {
                    let Some((_, escaped)) = chars.next() else { break };
                    out.push(match escaped {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        other => other,
                    });
                }
                c if c as u32 == quote as u32 => {
                    self.pos += i + 1;
                    self.push(TokenKind::Str(out), start);
                    return Ok(());
                }
                c => out.push(c),
            }
        }
        Err(TemplateError::UnterminatedDelimiter {
            offset: start,
            delimiter: if quote == b'\'' { "'" } else { "\"" },
        })
    }

    fn lex_number(&mut self) -> Result<(), TemplateError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let is_float = bytes.get(self.pos) == Some(&b'.')
            && bytes.get(self.pos + 1).is_some_and(u8::is_ascii_digit);
        if is_float {
            self.pos += 1;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let text = &self.src[start..self.pos];
        let kind = if is_float {
            TokenKind::Float(text.parse().expect("digits.digits is a valid float"))
        } else {
            TokenKind::Int(text.parse().map_err(|_| TemplateError::Syntax {
                offset: start,
                message: format!("integer literal `{text}` is out of range"),
            })?)
        };
        self.push(kind, start);
        Ok(())
    }

    fn lex_word(&mut self) {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] == b'_' || bytes[self.pos].is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let word = &self.src[start..self.pos];
        let kind = match word {
            "and" => TokenKind::Keyword(Keyword::And),
            "or" => TokenKind::Keyword(Keyword::Or),
            "not" => TokenKind::Keyword(Keyword::Not),
            "in" => TokenKind::Keyword(Keyword::In),
            "true" | "True" => TokenKind::Keyword(Keyword::True),
            "false" | "False" => TokenKind::Keyword(Keyword::False),
            "none" | "None" | "null" => TokenKind::Keyword(Keyword::None),
            _ => TokenKind::Ident(word.to_owned()),
        };
        self.push(kind, start);
    }

    fn lex_punct(&mut self) -> Result<(), TemplateError> {
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let two = [
            ("==", Punct::Eq),
            ("!=", Punct::Ne),
            ("<=", Punct::Le),
            (">=", Punct::Ge),
        ];
        for (text, punct) in two {
            if rest.starts_with(text) {
                self.pos += 2;
                self.push(TokenKind::Punct(punct), start);
                return Ok(());
            }
        }
        let ch = rest.chars().next().expect("caller checked pos < len");
        let punct = match ch {
            '(' => Punct::LParen,
            ')' => Punct::RParen,
            '[' => Punct::LBracket,
            ']' => Punct::RBracket,
            ',' => Punct::Comma,
            '.' => Punct::Dot,
            '|' => Punct::Pipe,
            '=' => Punct::Assign,
            '<' => Punct::Lt,
            '>' => Punct::Gt,
            '+' => Punct::Plus,
            '-' => Punct::Minus,
            '*' => Punct::Star,
            '/' => Punct::Slash,
            '%' => Punct::Percent,
            '~' => Punct::Tilde,
            other => {
                return Err(TemplateError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{other}` in expression"),
                })
            }
        };
        self.pos += ch.len_utf8();
        self.push(TokenKind::Punct(punct), start);
        Ok(())
    }
}

fn find_open(text: &str) -> Option<(usize, Mode)> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if bytes[i] == b'{' {
            match bytes[i + 1] {
                b'{' => return Some((i, Mode::Interp)),
                b'%' => return Some((i, Mode::Stmt)),
                _ => {}
            }
        }
        i += 1;
    }
    None
}
