/// A parsed template: the node sequence in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateAst {
    pub nodes: Vec<Node>,
}

/// Statement-level nodes. `offset` is the byte offset of the opening
/// delimiter and is what render errors point at.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Literal(String),
    Interp {
        expr: Expr,
        offset: usize,
    },
    If {
        cond: Expr,
        then: Vec<Node>,
        elifs: Vec<(Expr, Vec<Node>)>,
        otherwise: Vec<Node>,
        offset: usize,
    },
    For {
        var: String,
        iterable: Expr,
        body: Vec<Node>,
        offset: usize,
    },
    Set {
        var: String,
        value: Expr,
        offset: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Concat,
    And,
    Or,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

/// The closed set of functions callable from templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Choice,
}

/// The closed set of filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterName {
    Lower,
    Upper,
    Trim,
    Capitalize,
    Length,
    Join,
    Replace,
    First,
    Last,
}

impl FilterName {
    pub fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "lower" => Self::Lower,
            "upper" => Self::Upper,
            "trim" => Self::Trim,
            "capitalize" => Self::Capitalize,
            "length" | "count" => Self::Length,
            "join" => Self::Join,
            "replace" => Self::Replace,
            "first" => Self::First,
            "last" => Self::Last,
            _ => return None,
        })
    }

    /// Accepted argument counts, inclusive.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Self::Join => (0, 1),
            Self::Replace => (2, 2),
            _ => (0, 0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Upper => "upper",
            Self::Trim => "trim",
            Self::Capitalize => "capitalize",
            Self::Length => "length",
            Self::Join => "join",
            Self::Replace => "replace",
            Self::First => "first",
            Self::Last => "last",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
    List(Vec<Expr>),
    Var(String),
    Attr(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
    Filter(Box<Expr>, FilterName, Vec<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_owned())
    }

    /// Visits this expression and every sub-expression, parents first.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::List(items) | Expr::Call(_, items) => items.iter().for_each(|e| e.walk(visit)),
            Expr::Attr(base, _) | Expr::Unary(_, base) => base.walk(visit),
            Expr::Index(a, b) | Expr::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::Filter(base, _, args) => {
                base.walk(visit);
                args.iter().for_each(|e| e.walk(visit));
            }
            Expr::Str(_) | Expr::Int(_) | Expr::Float(_) | Expr::Bool(_) | Expr::Null | Expr::Var(_) => {}
        }
    }
}

impl TemplateAst {
    /// Visits every node, including those nested in blocks, in source order.
    pub fn walk_nodes<'a>(&'a self, visit: &mut impl FnMut(&'a Node)) {
        fn go<'a>(nodes: &'a [Node], visit: &mut impl FnMut(&'a Node)) {
            for node in nodes {
                visit(node);
                match node {
                    Node::If { then, elifs, otherwise, .. } => {
                        go(then, visit);
                        for (_, body) in elifs {
                            go(body, visit);
                        }
                        go(otherwise, visit);
                    }
                    Node::For { body, .. } => go(body, visit),
                    Node::Literal(_) | Node::Interp { .. } | Node::Set { .. } => {}
                }
            }
        }
        go(&self.nodes, visit);
    }

    /// Every expression in the template, in source order.
    pub fn expressions(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.walk_nodes(&mut |node| match node {
            Node::Interp { expr, .. } | Node::Set { value: expr, .. } => out.push(expr),
            Node::If { cond, elifs, .. } => {
                out.push(cond);
                out.extend(elifs.iter().map(|(c, _)| c));
            }
            Node::For { iterable, .. } => out.push(iterable),
            Node::Literal(_) => {}
        });
        out
    }

    pub fn has_choice(&self) -> bool {
        self.expressions().into_iter().any(|expr| {
            let mut found = false;
            expr.walk(&mut |e| found |= matches!(e, Expr::Call(Function::Choice, _)));
            found
        })
    }
}
