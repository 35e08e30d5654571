//! Data expressions (`index`, `random()`, arithmetic) and materialization of
//! bindings into per-instance values.
//!
//! ```text
//! expr    = term { ("+" | "-") term }
//! term    = unary { ("*" | "/") unary }
//! unary   = ("-" | "+") unary | primary
//! primary = number | "index" | "random" "(" ")" | "(" expr ")"
//! ```

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{DataBinding, DataSource, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Index,
    Random,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    /// `column` is 1-based, counted in characters.
    #[error("syntax error at column {column}: {message}")]
    Syntax {
        column: usize,
        message: &'static str,
    },
    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { name: String, column: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression produced a non-finite value")]
    NonFiniteResult,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("binding has no data")]
    EmptyData,
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error("instance {index}: {error}")]
    Eval { index: u32, error: EvalError },
}

/// SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Generator for one binding: the document seed XOR a hash of
/// `(container id, attribute path)`.
pub fn binding_rng(doc_seed: u64, container: &str, path: &str) -> Rng {
    let mut key = Vec::with_capacity(container.len() + path.len() + 1);
    key.extend_from_slice(container.as_bytes());
    key.push(0);
    key.extend_from_slice(path.as_bytes());
    Rng::new(doc_seed ^ fnv1a(&key))
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn err(&self, message: &'static str) -> ExprError {
        ExprError::Syntax {
            column: self.column(),
            message,
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let column = self.column();
                let start = self.pos;
                while self.pos < self.chars.len()
                    && (self.chars[self.pos].1.is_alphanumeric() || self.chars[self.pos].1 == '_')
                {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                match name.as_str() {
                    "index" => Ok(Expr::Index),
                    "random" => {
                        if self.peek() != Some('(') {
                            return Err(self.err("expected `(` after `random`"));
                        }
                        self.pos += 1;
                        if self.peek() != Some(')') {
                            return Err(self.err("`random()` takes no arguments"));
                        }
                        self.pos += 1;
                        Ok(Expr::Random)
                    }
                    _ => Err(ExprError::UnknownIdentifier { name, column }),
                }
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let mut seen_dot = false;
        while let Some(&(_, c)) = self.chars.get(self.pos) {
            if c.is_ascii_digit() {
                self.pos += 1;
            } else if c == '.' && !seen_dot {
                seen_dot = true;
                self.pos += 1;
            } else {
                break;
            }
        }
        if let Some(&(_, 'e' | 'E')) = self.chars.get(self.pos) {
            let save = self.pos;
            self.pos += 1;
            if let Some(&(_, '+' | '-')) = self.chars.get(self.pos) {
                self.pos += 1;
            }
            let digits_start = self.pos;
            while matches!(self.chars.get(self.pos), Some((_, c)) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digits_start {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        text.parse::<f64>()
            .map(Expr::Number)
            .map_err(|_| ExprError::Syntax {
                column: start + 1,
                message: "malformed number",
            })
    }
}

/// Parses an expression with standard precedence and left associativity.
pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        chars: text.char_indices().collect(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Evaluates `e` for instance `index`. Each `random()` call draws from `rng`.
pub fn eval_expression(e: &Expr, index: u32, rng: &mut Rng) -> Result<f64, EvalError> {
    let v = eval(e, index, rng)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFiniteResult)
    }
}

fn eval(e: &Expr, index: u32, rng: &mut Rng) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Number(v) => *v,
        Expr::Index => index as f64,
        Expr::Random => rng.next_f64(),
        Expr::Neg(inner) => -eval(inner, index, rng)?,
        Expr::Bin(op, l, r) => {
            let a = eval(l, index, rng)?;
            let b = eval(r, index, rng)?;
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
            }
        }
    })
}

/// Per-instance values for `b`. Value lists are cycled or truncated to
/// `count`; the flag reports a length mismatch. The scale is applied last, to
/// numbers only.
pub fn materialize_binding(
    b: &DataBinding,
    count: u32,
    rng: &mut Rng,
) -> Result<(Vec<Scalar>, bool), BindError> {
    let (mut values, mismatch) = match &b.source {
        DataSource::Values(list) => {
            if list.is_empty() {
                return Err(BindError::EmptyData);
            }
            let out = (0..count as usize)
                .map(|i| list[i % list.len()].clone())
                .collect::<Vec<_>>();
            (out, list.len() != count as usize)
        }
        DataSource::Expression(text) => {
            let e = parse_expression(text)?;
            let mut out = Vec::with_capacity(count as usize);
            for i in 0..count {
                let v = eval_expression(&e, i, rng)
                    .map_err(|error| BindError::Eval { index: i, error })?;
                out.push(Scalar::Num(v));
            }
            (out, false)
        }
    };
    if let Some(scale) = &b.scale {
        for v in &mut values {
            if let Scalar::Num(x) = v {
                *x = scale.apply(*x);
            }
        }
    }
    Ok((values, mismatch))
}
