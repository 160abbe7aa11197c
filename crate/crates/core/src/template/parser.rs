//! Recursive-descent parser over the token stream.
//!
//! Operator precedence, loosest first: `or`, `and`, `not`, comparisons and
//! `in`, `+ -`, `~`, `* / %`, unary `-`, then postfix access and filters.

use super::ast::{BinaryOp, Expr, FilterName, Function, Node, TemplateAst, UnaryOp};
use super::lexer::{tokenize, Keyword, Punct, Token, TokenKind};
use super::TemplateError;

pub fn parse(source: &str) -> Result<TemplateAst, TemplateError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, end: source.len() };
    let (nodes, stop) = parser.parse_nodes(&[])?;
    debug_assert!(stop.is_none());
    Ok(TemplateAst { nodes })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

/// The closing statement that ended a block, with the offset of its `{%`.
struct Stop {
    word: String,
    offset: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> TemplateError {
    TemplateError::Syntax { offset, message: message.into() }
}

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.span.start)
    }

    fn bump(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        token
    }

    fn eat_punct(&mut self, punct: Punct) -> bool {
        if self.peek() == Some(&TokenKind::Punct(punct)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, keyword: Keyword) -> bool {
        if self.peek() == Some(&TokenKind::Keyword(keyword)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), TemplateError> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}, found {}", self.describe())))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of template".into(),
            Some(TokenKind::Literal(_)) => "literal text".into(),
            Some(TokenKind::InterpOpen) => "`{{`".into(),
            Some(TokenKind::InterpClose) => "`}}`".into(),
            Some(TokenKind::StmtOpen) => "`{%`".into(),
            Some(TokenKind::StmtClose) => "`%}`".into(),
            Some(TokenKind::Ident(name)) => format!("identifier `{name}`"),
            Some(TokenKind::Keyword(k)) => format!("keyword `{}`", format!("{k:?}").to_lowercase()),
            Some(TokenKind::Int(i)) => format!("number `{i}`"),
            Some(TokenKind::Float(f)) => format!("number `{f}`"),
            Some(TokenKind::Str(_)) => "string literal".into(),
            Some(TokenKind::Punct(p)) => format!("`{p:?}`"),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, TemplateError> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => Err(syntax(self.offset(), format!("expected {what}, found {}", self.describe()))),
        }
    }

    /// Parses nodes until end of input or a statement named in `stops`.
    fn parse_nodes(&mut self, stops: &[&str]) -> Result<(Vec<Node>, Option<Stop>), TemplateError> {
        let mut nodes = Vec::new();
        while let Some(token) = self.bump() {
            match token.kind {
                TokenKind::Literal(text) => nodes.push(Node::Literal(text)),
                TokenKind::InterpOpen => {
                    let expr = self.parse_expr()?;
                    self.expect(TokenKind::InterpClose, "`}}`")?;
                    nodes.push(Node::Interp { expr, offset: token.span.start });
                }
                TokenKind::StmtOpen => {
                    let offset = token.span.start;
                    let word_at = self.offset();
                    let word = self.ident("statement name")?;
                    match word.as_str() {
                        "if" => nodes.push(self.parse_if(offset)?),
                        "for" => nodes.push(self.parse_for(offset)?),
                        "set" => {
                            let var = self.ident("variable name")?;
                            self.expect(TokenKind::Punct(Punct::Assign), "`=`")?;
                            let value = self.parse_expr()?;
                            self.expect(TokenKind::StmtClose, "`%}`")?;
                            nodes.push(Node::Set { var, value, offset });
                        }
                        w if stops.contains(&w) => return Ok((nodes, Some(Stop { word, offset }))),
                        "elif" | "else" | "endif" | "endfor" => {
                            return Err(syntax(offset, format!("unexpected `{word}` without matching block")))
                        }
                        _ => return Err(syntax(word_at, format!("unknown statement `{word}`"))),
                    }
                }
                _ => return Err(syntax(token.span.start, "unexpected token outside delimiters")),
            }
        }
        if stops.is_empty() {
            Ok((nodes, None))
        } else {
            Err(syntax(self.end, format!("unexpected end of template, expected `{}`", stops.last().unwrap())))
        }
    }

    fn parse_if(&mut self, offset: usize) -> Result<Node, TemplateError> {
        let cond = self.parse_expr()?;
        self.expect(TokenKind::StmtClose, "`%}`")?;
        let unclosed = |e: TemplateError| match e {
            TemplateError::Syntax { message, .. } if message.starts_with("unexpected end of template") => {
                syntax(offset, "unclosed `if` block (missing `endif`)")
            }
            other => other,
        };
        let (then, mut stop) = self.parse_nodes(&["elif", "else", "endif"]).map_err(unclosed)?;
        let mut elifs = Vec::new();
        let mut otherwise = Vec::new();
        loop {
            let Stop { word, offset: stop_at } = stop.expect("stops are non-empty");
            match word.as_str() {
                "elif" => {
                    let cond = self.parse_expr()?;
                    self.expect(TokenKind::StmtClose, "`%}`")?;
                    let (body, next) = self.parse_nodes(&["elif", "else", "endif"]).map_err(unclosed)?;
                    elifs.push((cond, body));
                    stop = next;
                }
                "else" => {
                    self.expect(TokenKind::StmtClose, "`%}`")?;
                    let (body, next) = self.parse_nodes(&["endif"]).map_err(unclosed)?;
                    otherwise = body;
                    stop = next;
                    if stop.as_ref().is_some_and(|s| s.word != "endif") {
                        return Err(syntax(stop_at, "`else` must be the last branch"));
                    }
                }
                "endif" => {
                    self.expect(TokenKind::StmtClose, "`%}`")?;
                    return Ok(Node::If { cond, then, elifs, otherwise, offset });
                }
                _ => unreachable!(),
            }
        }
    }

    fn parse_for(&mut self, offset: usize) -> Result<Node, TemplateError> {
        let var = self.ident("loop variable")?;
        if !self.eat_keyword(Keyword::In) {
            return Err(syntax(self.offset(), format!("expected `in`, found {}", self.describe())));
        }
        let iterable = self.parse_expr()?;
        self.expect(TokenKind::StmtClose, "`%}`")?;
        let (body, _) = self.parse_nodes(&["endfor"]).map_err(|e| match e {
            TemplateError::Syntax { message, .. } if message.starts_with("unexpected end of template") => {
                syntax(offset, "unclosed `for` block (missing `endfor`)")
            }
            other => other,
        })?;
        self.expect(TokenKind::StmtClose, "`%}`")?;
        Ok(Node::For { var, iterable, body, offset })
    }

    fn parse_expr(&mut self) -> Result<Expr, TemplateError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.parse_and()?;
        while self.eat_keyword(Keyword::Or) {
            let rhs = self.parse_and()?;
            lhs = Expr::Binary(BinaryOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.parse_not()?;
        while self.eat_keyword(Keyword::And) {
            let rhs = self.parse_not()?;
            lhs = Expr::Binary(BinaryOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_not(&mut self) -> Result<Expr, TemplateError> {
        if self.eat_keyword(Keyword::Not) {
            let operand = self.parse_not()?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(operand)));
        }
        self.parse_compare()
    }

    fn parse_compare(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.parse_add()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Punct(Punct::Eq)) => BinaryOp::Eq,
                Some(TokenKind::Punct(Punct::Ne)) => BinaryOp::Ne,
                Some(TokenKind::Punct(Punct::Lt)) => BinaryOp::Lt,
                Some(TokenKind::Punct(Punct::Le)) => BinaryOp::Le,
                Some(TokenKind::Punct(Punct::Gt)) => BinaryOp::Gt,
                Some(TokenKind::Punct(Punct::Ge)) => BinaryOp::Ge,
                Some(TokenKind::Keyword(Keyword::In)) => BinaryOp::In,
                Some(TokenKind::Keyword(Keyword::Not))
                    if self.tokens.get(self.pos + 1).map(|t| &t.kind)
                        == Some(&TokenKind::Keyword(Keyword::In)) =>
                {
                    self.pos += 2;
                    let rhs = self.parse_add()?;
                    let test = Expr::Binary(BinaryOp::In, Box::new(lhs), Box::new(rhs));
                    lhs = Expr::Unary(UnaryOp::Not, Box::new(test));
                    continue;
                }
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.parse_add()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_add(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.parse_concat()?;
        loop {
            let op = if self.eat_punct(Punct::Plus) {
                BinaryOp::Add
            } else if self.eat_punct(Punct::Minus) {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.parse_concat()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_concat(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.parse_mul()?;
        while self.eat_punct(Punct::Tilde) {
            let rhs = self.parse_mul()?;
            lhs = Expr::Binary(BinaryOp::Concat, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_mul(&mut self) -> Result<Expr, TemplateError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = if self.eat_punct(Punct::Star) {
                BinaryOp::Mul
            } else if self.eat_punct(Punct::Slash) {
                BinaryOp::Div
            } else if self.eat_punct(Punct::Percent) {
                BinaryOp::Rem
            } else {
                return Ok(lhs);
            };
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, TemplateError> {
        if self.eat_punct(Punct::Minus) {
            let operand = self.parse_unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(operand)));
        }
        let mut expr = self.parse_postfix()?;
        while self.eat_punct(Punct::Pipe) {
            let at = self.offset();
            let name = self.ident("filter name")?;
            let filter = FilterName::lookup(&name)
                .ok_or_else(|| syntax(at, format!("unknown filter `{name}`")))?;
            let args = if self.eat_punct(Punct::LParen) { self.parse_args()? } else { Vec::new() };
            let (min, max) = filter.arity();
            if args.len() < min || args.len() > max {
                return Err(syntax(at, format!("filter `{name}` takes {min}..={max} arguments, got {}", args.len())));
            }
            expr = Expr::Filter(Box::new(expr), filter, args);
        }
        Ok(expr)
    }

    fn parse_postfix(&mut self) -> Result<Expr, TemplateError> {
        let mut expr = self.parse_primary()?;
        loop {
            if self.eat_punct(Punct::Dot) {
                let name = self.ident("attribute name")?;
                if self.peek() == Some(&TokenKind::Punct(Punct::LParen)) {
                    return Err(syntax(self.offset(), format!("method calls are not supported (`.{name}(...)`)")));
                }
                expr = Expr::Attr(Box::new(expr), name);
            } else if self.eat_punct(Punct::LBracket) {
                let key = self.parse_expr()?;
                self.expect(TokenKind::Punct(Punct::RBracket), "`]`")?;
                expr = Expr::Index(Box::new(expr), Box::new(key));
            } else {
                return Ok(expr);
            }
        }
    }

    /// Comma-separated arguments after an opening parenthesis.
    fn parse_args(&mut self) -> Result<Vec<Expr>, TemplateError> {
        self.parse_items(Punct::RParen, "`)`")
    }

    fn parse_items(&mut self, close: Punct, what: &str) -> Result<Vec<Expr>, TemplateError> {
        let mut items = Vec::new();
        if self.eat_punct(close) {
            return Ok(items);
        }
        loop {
            items.push(self.parse_expr()?);
            if self.eat_punct(close) {
                return Ok(items);
            }
            if !self.eat_punct(Punct::Comma) {
                return Err(syntax(self.offset(), format!("expected `,` or {what}, found {}", self.describe())));
            }
            // trailing comma
            if self.eat_punct(close) {
                return Ok(items);
            }
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, TemplateError> {
        let at = self.offset();
        let Some(token) = self.bump() else {
            return Err(syntax(at, "expected expression, found end of template"));
        };
        Ok(match token.kind {
            TokenKind::Str(s) => Expr::Str(s),
            TokenKind::Int(i) => Expr::Int(i),
            TokenKind::Float(f) => Expr::Float(f),
            TokenKind::Keyword(Keyword::True) => Expr::Bool(true),
            TokenKind::Keyword(Keyword::False) => Expr::Bool(false),
            TokenKind::Keyword(Keyword::None) => Expr::Null,
            TokenKind::Punct(Punct::LParen) => {
                let inner = self.parse_expr()?;
                self.expect(TokenKind::Punct(Punct::RParen), "`)`")?;
                inner
            }
            TokenKind::Punct(Punct::LBracket) => Expr::List(self.parse_items(Punct::RBracket, "`]`")?),
            TokenKind::Ident(name) => {
                if self.eat_punct(Punct::LParen) {
                    let function = match name.as_str() {
                        "choice" => Function::Choice,
                        _ => return Err(syntax(at, format!("unknown function `{name}`"))),
                    };
                    let args = self.parse_args()?;
                    if args.len() != 1 {
                        return Err(syntax(at, format!("`choice` takes exactly one list argument, got {}", args.len())));
                    }
                    Expr::Call(function, args)
                } else {
                    Expr::Var(name)
                }
            }
            _ => {
                self.pos -= 1;
                return Err(syntax(at, format!("expected expression, found {}", self.describe())));
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interp(expr: Expr, offset: usize) -> Node {
        Node::Interp { expr, offset }
    }

    #[test]
    fn parses_entailment_template() {
        let src = "If {{premise}} is true, is it also true that {{hypothesis}}? ||| {{entailed}}";
        let ast = parse(src).unwrap();
        assert_eq!(
            ast.nodes,
            vec![
                Node::Literal("If ".into()),
                interp(Expr::var("premise"), 3),
                Node::Literal(" is true, is it also true that ".into()),
                interp(Expr::var("hypothesis"), 45),
                Node::Literal("? ||| ".into()),
                interp(Expr::var("entailed"), 65),
            ]
        );
        assert_eq!(parse(src).unwrap(), ast);
    }

    #[test]
    fn minimal_conditional() {
        let ast = parse("{% if x %}a{% endif %}").unwrap();
        assert_eq!(
            ast.nodes,
            vec![Node::If {
                cond: Expr::var("x"),
                then: vec![Node::Literal("a".into())],
                elifs: vec![],
                otherwise: vec![],
                offset: 0,
            }]
        );
    }

    #[test]
    fn elif_else_and_for() {
        let ast = parse("{% if a %}1{% elif b %}2{% else %}3{% endif %}{% for w in ws %}{{w}}{% endfor %}").unwrap();
        let Node::If { elifs, otherwise, .. } = &ast.nodes[0] else { panic!() };
        assert_eq!(elifs.len(), 1);
        assert_eq!(otherwise, &vec![Node::Literal("3".into())]);
        assert!(matches!(&ast.nodes[1], Node::For { var, .. } if var == "w"));
    }

    #[test]
    fn unbalanced_blocks_are_errors() {
        let err = parse("{% if x %}a").unwrap_err();
        assert!(matches!(err, TemplateError::Syntax { offset: 0, ref message } if message.contains("endif")), "{err:?}");
        assert!(parse("{% for x in y %}a").is_err());
        assert!(parse("a{% endif %}").is_err());
        assert!(parse("{% if a %}{% endfor %}").is_err());
        assert!(parse("{% if a %}{% else %}{% elif b %}{% endif %}").is_err());
    }

    #[test]
    fn unknown_names_are_syntax_errors() {
        assert_eq!(
            parse("ab{{ x | shout }}").unwrap_err(),
            TemplateError::Syntax { offset: 9, message: "unknown filter `shout`".into() }
        );
        assert!(matches!(parse("{{ rand(1) }}").unwrap_err(), TemplateError::Syntax { offset: 3, .. }));
        assert!(parse("{% macro m() %}{% endmacro %}").is_err());
        assert!(parse("{{ x.split() }}").is_err());
        assert!(parse("{{ x | replace('a') }}").is_err());
    }

    #[test]
    fn malformed_expressions() {
        for src in ["{{ }}", "{{ 1 + }}", "{{ (a }}", "{{ [1, 2 }}", "{{ a b }}", "{% set = 1 %}"] {
            assert!(matches!(parse(src), Err(TemplateError::Syntax { .. })), "{src}");
        }
    }

    #[test]
    fn precedence() {
        let ast = parse("{{ a ~ b | upper == 'X' or not c in d }}").unwrap();
        let Node::Interp { expr, .. } = &ast.nodes[0] else { panic!() };
        let expected = Expr::Binary(
            BinaryOp::Or,
            Box::new(Expr::Binary(
                BinaryOp::Eq,
                Box::new(Expr::Binary(
                    BinaryOp::Concat,
                    Box::new(Expr::var("a")),
                    Box::new(Expr::Filter(Box::new(Expr::var("b")), FilterName::Upper, vec![])),
                )),
                Box::new(Expr::Str("X".into())),
            )),
            Box::new(Expr::Unary(
                UnaryOp::Not,
                Box::new(Expr::Binary(BinaryOp::In, Box::new(Expr::var("c")), Box::new(Expr::var("d")))),
            )),
        );
        assert_eq!(expr, &expected);
    }

    #[test]
    fn not_in_and_postfix() {
        let ast = parse("{{ x not in ys[0].z }}").unwrap();
        let Node::Interp { expr, .. } = &ast.nodes[0] else { panic!() };
        assert!(matches!(expr, Expr::Unary(UnaryOp::Not, inner) if matches!(**inner, Expr::Binary(BinaryOp::In, _, _))));
    }

    #[test]
    fn literal_only_template() {
        let ast = parse("plain ||| text").unwrap();
        assert_eq!(ast.nodes, vec![Node::Literal("plain ||| text".into())]);
    }
}
