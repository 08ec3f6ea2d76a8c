//! Arithmetic expressions for distances, maps and control functions.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := unary ('^' factor)?
//! unary   := '-' unary | primary
//! primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than the other binaries. The
//! built-in functions are `min(a, b)`, `max(a, b)`, `abs(a)` and `sqrt(a)`.
//! Fractions are written with division (`7/5`); there is no rational literal.

use std::fmt;

use thiserror::Error;

use crate::space::CarrierSpec;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at offset {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative number {0}")]
    SqrtOfNegative(f64),
    #[error("zero raised to negative power {0}")]
    ZeroToNegativePower(f64),
    #[error("non-finite result")]
    NonFinite,
    #[error("variable #{0} is not bound")]
    Unbound(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
    Sqrt,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        match name {
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Abs | Func::Sqrt => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    /// Index into [`Expression::variables`].
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression over a fixed, ordered set of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    variables: Vec<String>,
    root: Node,
}

impl Expression {
    /// Parses `source`, accepting only identifiers listed in `allowed`.
    pub fn parse(source: &str, allowed: &[&str]) -> Result<Expression, ParseError> {
        let tokens = lex(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            allowed,
            end: source.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(Expression {
            variables: allowed.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Evaluates with positional values, one per declared variable.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        let v = eval_node(&self.root, values)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Evaluates with named bindings. Missing names surface as
    /// [`EvalError::Unbound`] only if the expression actually uses them.
    pub fn eval_with(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        let values: Vec<f64> = self
            .variables
            .iter()
            .map(|name| {
                bindings
                    .iter()
                    .find(|(n, _)| n == name)
                    .map_or(f64::NAN, |&(_, v)| v)
            })
            .collect();
        check_bound(&self.root, &values)?;
        self.eval(&values)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.variables)
    }
}

fn check_bound(node: &Node, values: &[f64]) -> Result<(), EvalError> {
    match node {
        Node::Num(_) => Ok(()),
        Node::Var(i) => {
            if values[*i].is_nan() {
                Err(EvalError::Unbound(*i))
            } else {
                Ok(())
            }
        }
        Node::Neg(a) => check_bound(a, values),
        Node::Bin(_, a, b) => {
            check_bound(a, values)?;
            check_bound(b, values)
        }
        Node::Call(_, args) => args.iter().try_for_each(|a| check_bound(a, values)),
    }
}

fn eval_node(node: &Node, values: &[f64]) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => *values.get(*i).ok_or(EvalError::Unbound(*i))?,
        Node::Neg(a) => -eval_node(a, values)?,
        Node::Bin(op, a, b) => {
            let a = eval_node(a, values)?;
            let b = eval_node(b, values)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => {
                    if a == 0.0 && b < 0.0 {
                        return Err(EvalError::ZeroToNegativePower(b));
                    }
                    a.powf(b)
                }
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], values)?;
            match func {
                Func::Abs => a.abs(),
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(EvalError::SqrtOfNegative(a));
                    }
                    a.sqrt()
                }
                Func::Min => a.min(eval_node(&args[1], values)?),
                Func::Max => a.max(eval_node(&args[1], values)?),
            }
        }
    })
}

// Canonical printer: every compound subterm is parenthesised, so the output
// reparses to the identical tree.
fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, vars: &[String]) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v}"),
        Node::Var(i) => f.write_str(&vars[*i]),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(f, a, vars)?;
            f.write_str(")")
        }
        Node::Bin(op, a, b) => {
            f.write_str("(")?;
            write_node(f, a, vars)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, b, vars)?;
            f.write_str(")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                write_node(f, a, vars)?;
            }
            f.write_str(")")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("`{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                tokens.push(Token {
                    kind: TokenKind::Op(c as char),
                    offset: start,
                });
                i += 1;
            }
            b'(' | b')' | b',' => {
                let kind = match c {
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    _ => TokenKind::Comma,
                };
                tokens.push(Token {
                    kind,
                    offset: start,
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Num(value),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(source[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = source[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    allowed: &'a [&'a str],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn next_offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let message = match self.peek() {
            Some(t) => format!("expected {wanted}, found {}", t.kind.describe()),
            None => format!("expected {wanted}, found end of input"),
        };
        ParseError::Syntax {
            offset: self.next_offset(),
            message,
        }
    }

    fn expect(&mut self, kind: TokenKind, wanted: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.factor()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        let base = self.unary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.factor()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("an operand"));
        };
        match tok.kind {
            TokenKind::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                let is_call = matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    })
                );
                if is_call {
                    let func =
                        Func::lookup(&name).ok_or_else(|| ParseError::UnknownIdentifier {
                            name: name.clone(),
                            offset: tok.offset,
                        })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(
                        self.peek(),
                        Some(Token {
                            kind: TokenKind::Comma,
                            ..
                        })
                    ) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokenKind::RParen, "`,` or `)`")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            name,
                            offset: tok.offset,
                            expected: func.arity(),
                            found: args.len(),
                        });
                    }
                    Ok(Node::Call(func, args))
                } else {
                    let index = self.allowed.iter().position(|v| *v == name).ok_or(
                        ParseError::UnknownIdentifier {
                            name,
                            offset: tok.offset,
                        },
                    )?;
                    Ok(Node::Var(index))
                }
            }
            _ => Err(self.unexpected("an operand")),
        }
    }
}

/// One guarded branch of a [`PiecewiseMap`]: applies when `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub expr: Expression,
}

/// A self-map `T(x)` defined by closed-interval guards; the first matching
/// piece wins.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseMap {
    pub name: String,
    pub pieces: Vec<Piece>,
}

impl PiecewiseMap {
    pub fn new(name: impl Into<String>) -> Self {
        PiecewiseMap {
            name: name.into(),
            pieces: Vec::new(),
        }
    }

    /// Appends a piece parsed from `source` over the variable `x`.
    pub fn piece(mut self, lo: f64, hi: f64, source: &str) -> Result<Self, Error> {
        if !(lo <= hi) {
            return Err(Error::Input(format!("guard [{lo}, {hi}] is empty")));
        }
        let expr = Expression::parse(source, &["x"])?;
        self.pieces.push(Piece { lo, hi, expr });
        Ok(self)
    }

    /// Evaluates the first matching piece without any carrier check.
    pub fn eval(&self, x: f64) -> Result<f64, Error> {
        let piece = self
            .pieces
            .iter()
            .find(|p| p.lo <= x && x <= p.hi)
            .ok_or_else(|| Error::NoMatchingPiece {
                map: self.name.clone(),
                x,
            })?;
        piece.expr.eval(&[x]).map_err(|source| Error::MapEval {
            map: self.name.clone(),
            x,
            source,
        })
    }

    /// Applies the map to a carrier point, checking the image stays in the
    /// carrier.
    pub fn apply(&self, carrier: &CarrierSpec, x: f64) -> Result<f64, Error> {
        if !carrier.contains(x) {
            return Err(Error::Domain { point: x });
        }
        let image = self.eval(x)?;
        if !carrier.contains(image) {
            return Err(Error::NotSelfMap {
                map: self.name.clone(),
                x,
                image,
            });
        }
        Ok(image)
    }
}
