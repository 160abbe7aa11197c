use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::ast::{BinaryOp, Expr, FilterName, Function, Node, TemplateAst, UnaryOp};
use super::choice::{ChoiceFailure, ChoiceMode, ChoiceResolver};
use super::value::{Map, Value};

/// Everything a render can see: the example's fields, the parsed answer
/// choices (if any) and the choice resolver for this render.
#[derive(Debug, Clone)]
pub struct RenderContext<'a> {
    pub example: &'a Map,
    pub answer_choices: Option<&'a [String]>,
    pub choices: ChoiceResolver,
}

impl<'a> RenderContext<'a> {
    pub fn new(example: &'a Map, choices: ChoiceResolver) -> Self {
        Self { example, answer_choices: None, choices }
    }

    pub fn with_answer_choices(mut self, answer_choices: Option<&'a [String]>) -> Self {
        self.answer_choices = answer_choices;
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderErrorKind {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error(transparent)]
    Choice(#[from] ChoiceFailure),
    #[error("division by zero")]
    DivisionByZero,
}

/// A render failure, located at the `{{`/`{%` of the offending node.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} (at byte {offset})")]
pub struct RenderError {
    pub kind: RenderErrorKind,
    pub offset: usize,
}

type Eval<T> = Result<T, RenderErrorKind>;

fn mismatch<T>(message: impl Into<String>) -> Eval<T> {
    Err(RenderErrorKind::TypeMismatch(message.into()))
}

pub fn render(ast: &TemplateAst, ctx: &mut RenderContext<'_>) -> Result<String, RenderError> {
    let mut renderer = Renderer { ctx, scopes: vec![BTreeMap::new()], out: String::new() };
    renderer.nodes(&ast.nodes)?;
    Ok(renderer.out)
}

/// Lengths of the choice lists met along the path that takes the first
/// element at every call.
pub fn enumerate_choice_shape(ast: &TemplateAst, ctx: &RenderContext<'_>) -> Result<Vec<usize>, RenderError> {
    let mut probe = ctx.clone();
    probe.choices = ChoiceResolver::recording();
    render(ast, &mut probe)?;
    Ok(probe.choices.recorded().to_vec())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrossProductError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("more than {0} choice combinations")]
    TooManyVariants(usize),
}

/// One rendered combination of choice indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub path: Vec<usize>,
    pub rendered: String,
}

/// Renders every combination of choice indices in odometer order (last call
/// varying fastest). Calls hidden behind conditionals are discovered per
/// path, so the count equals the product of list sizes only when every call
/// is unconditional.
pub fn render_cross_product(
    ast: &TemplateAst,
    example: &Map,
    answer_choices: Option<&[String]>,
    max_variants: usize,
) -> Result<Vec<Variant>, CrossProductError> {
    let mut variants = Vec::new();
    let mut prefix = Vec::new();
    loop {
        let resolver = ChoiceResolver::new(ChoiceMode::Recording { prefix });
        let mut ctx = RenderContext::new(example, resolver).with_answer_choices(answer_choices);
        let rendered = render(ast, &mut ctx)?;
        if variants.len() == max_variants {
            return Err(CrossProductError::TooManyVariants(max_variants));
        }
        let path = ctx.choices.picks().to_vec();
        let lengths = ctx.choices.recorded();
        let next = (0..path.len()).rev().find(|&j| path[j] + 1 < lengths[j]);
        prefix = match next {
            Some(j) => {
                let mut p = path[..j].to_vec();
                p.push(path[j] + 1);
                p
            }
            None => Vec::new(),
        };
        variants.push(Variant { path, rendered });
        if next.is_none() {
            return Ok(variants);
        }
    }
}

struct Renderer<'c, 'a> {
    ctx: &'c mut RenderContext<'a>,
    scopes: Vec<BTreeMap<String, Value>>,
    out: String,
}

impl Renderer<'_, '_> {
    fn nodes(&mut self, nodes: &[Node]) -> Result<(), RenderError> {
        for node in nodes {
            self.node(node)?;
        }
        Ok(())
    }

    fn node(&mut self, node: &Node) -> Result<(), RenderError> {
        match node {
            Node::Literal(text) => self.out.push_str(text),
            Node::Interp { expr, offset } => {
                let value = self.eval(expr).map_err(|kind| RenderError { kind, offset: *offset })?;
                write!(self.out, "{value}").expect("writing to a String cannot fail");
            }
            Node::If { cond, then, elifs, otherwise, offset } => {
                let at = |kind| RenderError { kind, offset: *offset };
                if self.eval(cond).map_err(at)?.is_truthy() {
                    return self.nodes(then);
                }
                for (cond, body) in elifs {
                    if self.eval(cond).map_err(at)?.is_truthy() {
                        return self.nodes(body);
                    }
                }
                self.nodes(otherwise)?;
            }
            Node::For { var, iterable, body, offset } => {
                let at = |kind| RenderError { kind, offset: *offset };
                let items: Vec<Value> = match self.eval(iterable).map_err(at)? {
                    Value::List(items) => items,
                    Value::Map(map) => map.into_keys().map(Value::Str).collect(),
                    Value::Str(s) => s.chars().map(|c| Value::Str(c.to_string())).collect(),
                    other => return Err(at(RenderErrorKind::TypeMismatch(format!("cannot iterate over {}", other.type_name())))),
                };
                let length = items.len();
                for (i, item) in items.into_iter().enumerate() {
                    let mut scope = BTreeMap::new();
                    scope.insert(var.clone(), item);
                    scope.insert("loop".to_owned(), loop_info(i, length));
                    self.scopes.push(scope);
                    let result = self.nodes(body);
                    self.scopes.pop();
                    result?;
                }
            }
            Node::Set { var, value, offset } => {
                let value = self.eval(value).map_err(|kind| RenderError { kind, offset: *offset })?;
                self.scopes.last_mut().expect("base scope").insert(var.clone(), value);
            }
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Eval<Value> {
        for scope in self.scopes.iter().rev() {
            if let Some(value) = scope.get(name) {
                return Ok(value.clone());
            }
        }
        if name == "answer_choices" {
            return match self.ctx.answer_choices {
                Some(choices) => Ok(Value::List(choices.iter().map(|c| Value::Str(c.clone())).collect())),
                None => Err(RenderErrorKind::MissingField(name.to_owned())),
            };
        }
        self.ctx
            .example
            .get(name)
            .cloned()
            .ok_or_else(|| RenderErrorKind::MissingField(name.to_owned()))
    }

    fn eval(&mut self, expr: &Expr) -> Eval<Value> {
        Ok(match expr {
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Int(i) => Value::Int(*i),
            Expr::Float(f) => Value::Float(*f),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Null => Value::Null,
            Expr::List(items) => Value::List(items.iter().map(|e| self.eval(e)).collect::<Eval<_>>()?),
            Expr::Var(name) => self.lookup(name)?,
            Expr::Attr(base, name) => match self.eval(base)? {
                Value::Map(mut map) => map
                    .remove(name)
                    .ok_or_else(|| RenderErrorKind::MissingField(format!("{}.{name}", describe(base))))?,
                other => return mismatch(format!("cannot read attribute `{name}` of {}", other.type_name())),
            },
            Expr::Index(base, key) => {
                let base_value = self.eval(base)?;
                let key = self.eval(key)?;
                index(base_value, key, base)?
            }
            Expr::Call(Function::Choice, args) => {
                let list = self.eval(&args[0])?;
                let Value::List(mut items) = list else {
                    return Err(ChoiceFailure::NotAList(list.type_name()).into());
                };
                let picked = self.ctx.choices.pick(items.len())?;
                items.swap_remove(picked)
            }
            Expr::Filter(base, filter, args) => {
                let value = self.eval(base)?;
                let args = args.iter().map(|a| self.eval(a)).collect::<Eval<Vec<_>>>()?;
                apply_filter(*filter, value, &args)?
            }
            Expr::Binary(BinaryOp::And, lhs, rhs) => {
                let left = self.eval(lhs)?;
                if left.is_truthy() { self.eval(rhs)? } else { left }
            }
            Expr::Binary(BinaryOp::Or, lhs, rhs) => {
                let left = self.eval(lhs)?;
                if left.is_truthy() { left } else { self.eval(rhs)? }
            }
            Expr::Binary(op, lhs, rhs) => {
                let left = self.eval(lhs)?;
                let right = self.eval(rhs)?;
                binary(*op, left, right)?
            }
            Expr::Unary(UnaryOp::Not, operand) => Value::Bool(!self.eval(operand)?.is_truthy()),
            Expr::Unary(UnaryOp::Neg, operand) => match self.eval(operand)? {
                Value::Int(i) => Value::Int(i.checked_neg().ok_or_else(|| RenderErrorKind::TypeMismatch("integer overflow".into()))?),
                Value::Float(f) => Value::Float(-f),
                other => return mismatch(format!("cannot negate {}", other.type_name())),
            },
        })
    }
}

fn loop_info(i: usize, length: usize) -> Value {
    let mut map = Map::new();
    map.insert("index".into(), Value::Int(i as i64 + 1));
    map.insert("index0".into(), Value::Int(i as i64));
    map.insert("first".into(), Value::Bool(i == 0));
    map.insert("last".into(), Value::Bool(i + 1 == length));
    map.insert("length".into(), Value::Int(length as i64));
    Value::Map(map)
}

fn describe(expr: &Expr) -> String {
    match expr {
        Expr::Var(name) => name.clone(),
        Expr::Attr(base, name) => format!("{}.{name}", describe(base)),
        _ => "expression".into(),
    }
}

fn index(base_value: Value, key: Value, base: &Expr) -> Eval<Value> {
    let position = |len: usize, i: i64| -> Option<usize> {
        let idx = if i < 0 { len as i64 + i } else { i };
        (0..len as i64).contains(&idx).then_some(idx as usize)
    };
    // Booleans index like 0 and 1, as labels in boolean datasets expect.
    let key = match key {
        Value::Bool(b) => Value::Int(i64::from(b)),
        other => other,
    };
    match (base_value, key) {
        (Value::List(mut items), Value::Int(i)) => match position(items.len(), i) {
            Some(p) => Ok(items.swap_remove(p)),
            None => Err(RenderErrorKind::MissingField(format!("{}[{i}]", describe(base)))),
        },
        (Value::Str(s), Value::Int(i)) => {
            let chars: Vec<char> = s.chars().collect();
            match position(chars.len(), i) {
                Some(p) => Ok(Value::Str(chars[p].to_string())),
                None => Err(RenderErrorKind::MissingField(format!("{}[{i}]", describe(base)))),
            }
        }
        (Value::Map(mut map), Value::Str(k)) => map
            .remove(&k)
            .ok_or_else(|| RenderErrorKind::MissingField(format!("{}[{k:?}]", describe(base)))),
        (b, k) => mismatch(format!("cannot index {} with {}", b.type_name(), k.type_name())),
    }
}

fn scalar_text(value: &Value, filter: FilterName) -> Eval<String> {
    match value {
        Value::List(_) | Value::Map(_) => mismatch(format!("filter `{}` expects a string, got {}", filter.as_str(), value.type_name())),
        other => Ok(other.to_string()),
    }
}

fn apply_filter(filter: FilterName, value: Value, args: &[Value]) -> Eval<Value> {
    Ok(match filter {
        FilterName::Lower => Value::Str(scalar_text(&value, filter)?.to_lowercase()),
        FilterName::Upper => Value::Str(scalar_text(&value, filter)?.to_uppercase()),
        FilterName::Trim => Value::Str(scalar_text(&value, filter)?.trim().to_owned()),
        FilterName::Capitalize => {
            let text = scalar_text(&value, filter)?;
            let mut chars = text.chars();
            Value::Str(match chars.next() {
                Some(first) => first.to_uppercase().chain(chars.as_str().to_lowercase().chars()).collect(),
                None => String::new(),
            })
        }
        FilterName::Length => match &value {
            Value::Str(s) => Value::Int(s.chars().count() as i64),
            Value::List(items) => Value::Int(items.len() as i64),
            Value::Map(map) => Value::Int(map.len() as i64),
            other => return mismatch(format!("filter `length` expects a string, list or mapping, got {}", other.type_name())),
        },
        FilterName::Join => {
            let Value::List(items) = value else {
                return mismatch(format!("filter `join` expects a list, got {}", value.type_name()));
            };
            let sep = args.first().map(Value::to_string).unwrap_or_default();
            Value::Str(items.iter().map(Value::to_string).collect::<Vec<_>>().join(&sep))
        }
        FilterName::Replace => {
            let text = scalar_text(&value, filter)?;
            Value::Str(text.replace(&args[0].to_string(), &args[1].to_string()))
        }
        FilterName::First | FilterName::Last => {
            let first = filter == FilterName::First;
            match value {
                Value::List(mut items) => {
                    if items.is_empty() {
                        Value::Null
                    } else if first {
                        items.swap_remove(0)
                    } else {
                        items.pop().expect("non-empty")
                    }
                }
                Value::Str(s) => {
                    let c = if first { s.chars().next() } else { s.chars().next_back() };
                    c.map_or(Value::Null, |c| Value::Str(c.to_string()))
                }
                other => return mismatch(format!("filter `{}` expects a list or string, got {}", filter.as_str(), other.type_name())),
            }
        }
    })
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Float(y)) | (Value::Float(y), Value::Int(x)) => (*x as f64) == *y,
        (Value::List(xs), Value::List(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y)),
        (Value::Map(xs), Value::Map(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|((kx, vx), (ky, vy))| kx == ky && values_equal(vx, vy))
        }
        _ => a == b,
    }
}

fn binary(op: BinaryOp, left: Value, right: Value) -> Eval<Value> {
    use std::cmp::Ordering;
    let overflow = || RenderErrorKind::TypeMismatch("integer overflow".into());
    Ok(match op {
        BinaryOp::Eq => Value::Bool(values_equal(&left, &right)),
        BinaryOp::Ne => Value::Bool(!values_equal(&left, &right)),
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ordering = match (&left, &right) {
                (Value::Int(x), Value::Int(y)) => x.cmp(y),
                (Value::Str(x), Value::Str(y)) => x.cmp(y),
                (x, y) => match (x.as_f64(), y.as_f64()) {
                    (Some(a), Some(b)) => match a.partial_cmp(&b) {
                        Some(o) => o,
                        None => return Ok(Value::Bool(false)),
                    },
                    _ => return mismatch(format!("cannot compare {} with {}", x.type_name(), y.type_name())),
                },
            };
            Value::Bool(match op {
                BinaryOp::Lt => ordering == Ordering::Less,
                BinaryOp::Le => ordering != Ordering::Greater,
                BinaryOp::Gt => ordering == Ordering::Greater,
                _ => ordering != Ordering::Less,
            })
        }
        BinaryOp::Concat => Value::Str(format!("{left}{right}")),
        BinaryOp::Add => match (left, right) {
            (Value::Int(x), Value::Int(y)) => Value::Int(x.checked_add(y).ok_or_else(overflow)?),
            (Value::Str(x), Value::Str(y)) => Value::Str(x + &y),
            (Value::List(mut x), Value::List(y)) => {
                x.extend(y);
                Value::List(x)
            }
            (x, y) => Value::Float(numeric_pair(&x, &y, "+")?.into_iter().sum()),
        },
        BinaryOp::Sub => match (left, right) {
            (Value::Int(x), Value::Int(y)) => Value::Int(x.checked_sub(y).ok_or_else(overflow)?),
            (x, y) => {
                let [a, b] = numeric_pair(&x, &y, "-")?;
                Value::Float(a - b)
            }
        },
        BinaryOp::Mul => match (left, right) {
            (Value::Int(x), Value::Int(y)) => Value::Int(x.checked_mul(y).ok_or_else(overflow)?),
            (x, y) => {
                let [a, b] = numeric_pair(&x, &y, "*")?;
                Value::Float(a * b)
            }
        },
        BinaryOp::Div => {
            let [a, b] = numeric_pair(&left, &right, "/")?;
            if b == 0.0 {
                return Err(RenderErrorKind::DivisionByZero);
            }
            Value::Float(a / b)
        }
        BinaryOp::Rem => match (left, right) {
            (Value::Int(_), Value::Int(0)) => return Err(RenderErrorKind::DivisionByZero),
            // floor modulo: result takes the divisor's sign
            (Value::Int(x), Value::Int(y)) => Value::Int(((x % y) + y) % y),
            (x, y) => return mismatch(format!("`%` needs integers, got {} and {}", x.type_name(), y.type_name())),
        },
        BinaryOp::In => Value::Bool(match (&left, &right) {
            (Value::Str(needle), Value::Str(hay)) => hay.contains(needle.as_str()),
            (needle, Value::List(items)) => items.iter().any(|item| values_equal(needle, item)),
            (Value::Str(key), Value::Map(map)) => map.contains_key(key),
            (x, y) => return mismatch(format!("cannot test {} in {}", x.type_name(), y.type_name())),
        }),
        BinaryOp::And | BinaryOp::Or => unreachable!("short-circuit operators are evaluated lazily"),
    })
}

fn numeric_pair(x: &Value, y: &Value, op: &str) -> Eval<[f64; 2]> {
    match (x.as_f64(), y.as_f64()) {
        (Some(a), Some(b)) => Ok([a, b]),
        _ => mismatch(format!("cannot apply `{op}` to {} and {}", x.type_name(), y.type_name())),
    }
}
