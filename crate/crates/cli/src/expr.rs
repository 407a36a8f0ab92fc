//! Coefficient expressions `a(x)`, `b(x)` over one real variable.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          -- right-associative
//! atom    := number | 'x' | func '(' expr ')' | '(' expr ')'
//! func    := exp | sin | cos | abs | sign
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`, while the exponent
//! may itself carry a sign: `2^-1` is `0.5`.

use std::fmt;

use afmc_core::processes::Coefficient;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownName { offset: usize, name: String },
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Abs,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
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

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

const NEG_PRECEDENCE: u8 = 3;

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Bin(op, ..) => op.precedence(),
            Node::Neg(_) => NEG_PRECEDENCE,
            // a negative literal prints with its sign, so it behaves like a negation
            Node::Num(v) if v.is_sign_negative() => NEG_PRECEDENCE,
            _ => 5,
        }
    }

    fn eval(&self, x: f64) -> Result<f64, ExprError> {
        Ok(match self {
            Node::Num(v) => *v,
            Node::Var => x,
            Node::Neg(a) => -a.eval(x)?,
            Node::Call(f, a) => f.apply(a.eval(x)?),
            Node::Bin(op, a, b) => {
                let (u, v) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => {
                        if v == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        u / v
                    }
                    BinOp::Pow => u.powf(v),
                }
            }
        })
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{:?}` keeps a decimal point or exponent and round-trips exactly
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var => write!(f, "x"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Neg(a) => {
                if a.precedence() <= NEG_PRECEDENCE {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-{a}")
                }
            }
            Node::Bin(op, a, b) => {
                let p = op.precedence();
                // left-associative operators need parentheses on the right at equal
                // precedence; `^` is right-associative and needs them on the left
                let (left_paren, right_paren) = if *op == BinOp::Pow {
                    (a.precedence() <= p, b.precedence() < NEG_PRECEDENCE)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                wrap(f, a, left_paren)?;
                write!(f, " {} ", op.symbol())?;
                wrap(f, b, right_paren)
            }
        }
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, node: &Node, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({node})")
    } else {
        write!(f, "{node}")
    }
}

/// A parsed coefficient expression.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientExpr {
    root: Node,
}

impl CoefficientExpr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_coefficient_expr(text)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Evaluate at `x`; division by zero is an error, everything else is total.
    pub fn try_eval(&self, x: f64) -> Result<f64, ExprError> {
        self.root.eval(x)
    }

    /// Largest finite-difference slope `|g(u + h) - g(u)| / h` over `points`
    /// equally spaced points of `[lo, hi]`.
    pub fn lipschitz_probe(&self, lo: f64, hi: f64, points: usize) -> f64 {
        let points = points.max(2);
        let step = (hi - lo) / (points - 1) as f64;
        let h = 1e-6 * (1.0 + lo.abs().max(hi.abs()));
        (0..points)
            .map(|i| {
                let u = lo + i as f64 * step;
                match (self.try_eval(u), self.try_eval(u + h)) {
                    (Ok(a), Ok(b)) => ((b - a) / h).abs(),
                    _ => f64::INFINITY,
                }
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for CoefficientExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

impl Coefficient for CoefficientExpr {
    /// Division by zero yields a non-finite value, which the chain generators
    /// report as a numeric failure with the step index.
    fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

pub fn parse_coefficient_expr(text: &str) -> Result<CoefficientExpr, ExprError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    if p.pos == text.len() {
        return Err(p.error("empty expression"));
    }
    let root = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error(format!("unexpected '{}'", p.peek_char().unwrap())));
    }
    Ok(CoefficientExpr { root })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek_char() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek_char() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let len = self.src[start..]
                    .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                    .unwrap_or(self.src.len() - start);
                let name = &self.src[start..start + len];
                self.pos += len;
                if name == "x" {
                    return Ok(Node::Var);
                }
                let Some(func) = Func::from_name(name) else {
                    return Err(ExprError::UnknownName {
                        offset: start,
                        name: name.to_string(),
                    });
                };
                if !self.eat('(') {
                    return Err(self.error(format!("expected '(' after '{name}'")));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        // optional exponent, only when followed by digits
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut e = end + 1;
            if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                e += 1;
            }
            if e < bytes.len() && bytes[e].is_ascii_digit() {
                while e < bytes.len() && bytes[e].is_ascii_digit() {
                    e += 1;
                }
                end = e;
            }
        }
        let text = &self.src[start..end];
        let value: f64 = text.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| ExprError::Syntax {
            offset: start,
            message: format!("malformed number '{text}'"),
        })?;
        self.pos = end;
        Ok(Node::Num(value))
    }
}
