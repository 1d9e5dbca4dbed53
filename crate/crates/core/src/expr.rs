//! Function text → expression tree → symbolic derivative → value.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | 'pi' | ident | func '(' sum ')' | '(' sum ')'
//! func    := exp | sin | cos | sqrt | log
//! ```
//!
//! `-x^2` is `-(x^2)` and `2^-x` is `2^(-x)`. There is no implicit
//! multiplication. The first identifier that is not a function or `pi`
//! becomes the variable; a second, different one is rejected.
//!
//! Numeric literals keep their decimal text and are converted only when an
//! expression is bound to a [`Precision`], so `0.083` is exact to whatever
//! precision the evaluation runs at.

use std::fmt;

use thiserror::Error;

use crate::mpscalar::{MPReal, Precision, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier {name:?} at byte {offset} (variable is already {variable:?})")]
    UnknownIdentifier {
        name: String,
        offset: usize,
        variable: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }
}

/// Expression tree. Literal text is always non-negative; a negative constant
/// is `Neg(Num(..))`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(String),
    Pi,
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(text: impl Into<String>) -> Self {
        Expr::Num(text.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Self {
        Expr::Neg(Box::new(a))
    }

    pub fn call(f: Func, a: Expr) -> Self {
        Expr::Call(f, Box::new(a))
    }

    /// Name of the variable, if the tree mentions one.
    pub fn variable(&self) -> Option<&str> {
        match self {
            Expr::Var(v) => Some(v),
            Expr::Num(_) | Expr::Pi => None,
            Expr::Neg(a) | Expr::Call(_, a) => a.variable(),
            Expr::Bin(_, a, b) => a.variable().or_else(|| b.variable()),
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Var(v) => v == var,
            Expr::Num(_) | Expr::Pi => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Bin(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Fully parenthesized canonical text; `parse` reads it back to the same tree.
    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn differentiate(&self, var: &str) -> Expr {
        differentiate(self, var)
    }

    /// Converts literals once for repeated evaluation at `p`.
    pub fn bind(&self, p: Precision) -> BoundExpr {
        BoundExpr::new(self, p)
    }

    /// One-shot evaluation; see [`BoundExpr::eval`].
    pub fn eval<S: Scalar>(&self, x: &S, p: Precision) -> S {
        self.bind(p).eval(x)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(t) => f.write_str(t),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => write!(f, "({a}{}{b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if !text[start..i].bytes().any(|b| b.is_ascii_digit()) {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: "malformed number".into(),
                });
            }
            // exponent only when digits follow, so `2e` stays a syntax error below
            if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                let mut j = i + 1;
                if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((Tok::Num(text[start..i].to_string()), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character {ch:?}"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    variable: Option<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(t) => Ok(Expr::Num(t)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return self.syntax(format!("expected '(' after {name}"));
                    }
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    return Ok(Expr::call(func, arg));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                match &self.variable {
                    None => {
                        self.variable = Some(name.clone());
                        Ok(Expr::Var(name))
                    }
                    Some(v) if *v == name => Ok(Expr::Var(name)),
                    Some(v) => Err(ExprError::UnknownIdentifier {
                        name,
                        offset,
                        variable: v.clone(),
                    }),
                }
            }
            Tok::End => Err(ExprError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            Tok::RParen => Err(ExprError::Syntax {
                offset,
                message: "unexpected ')'".into(),
            }),
            Tok::Op(c) => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected operator '{c}'"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() != Tok::RParen {
            return self.syntax("expected ')'");
        }
        self.bump();
        Ok(())
    }
}

/// Parses function text into a tree.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Empty);
    }
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        variable: None,
    };
    let e = parser.sum()?;
    if *parser.peek() != Tok::End {
        return parser.syntax("unexpected trailing input");
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Minimal simplifier

/// Exact decimal `mantissa * 10^-scale`, for folding literals.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Decimal {
    mantissa: i128,
    scale: u32,
}

impl Decimal {
    const MAX_SCALE: u32 = 30;

    fn from_text(text: &str) -> Option<Self> {
        let (body, exp) = match text.find(['e', 'E']) {
            Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
            None => (text, 0),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let digits = format!("{int}{frac}");
        let mut mantissa: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let mut scale = frac.len() as i32 - exp;
        while scale < 0 {
            mantissa = mantissa.checked_mul(10)?;
            scale += 1;
        }
        if scale as u32 > Self::MAX_SCALE {
            return None;
        }
        Some(Decimal { mantissa, scale: scale as u32 }.normalized())
    }

    fn of(e: &Expr) -> Option<Self> {
        match e {
            Expr::Num(t) => Self::from_text(t),
            Expr::Neg(a) => match a.as_ref() {
                Expr::Num(t) => Self::from_text(t).map(|d| Decimal {
                    mantissa: -d.mantissa,
                    ..d
                }),
                _ => None,
            },
            _ => None,
        }
    }

    fn normalized(mut self) -> Self {
        while self.scale > 0 && self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.scale -= 1;
        }
        self
    }

    fn align(a: Self, b: Self) -> Option<(i128, i128, u32)> {
        let scale = a.scale.max(b.scale);
        let am = a.mantissa.checked_mul(10i128.checked_pow(scale - a.scale)?)?;
        let bm = b.mantissa.checked_mul(10i128.checked_pow(scale - b.scale)?)?;
        Some((am, bm, scale))
    }

    fn add(a: Self, b: Self) -> Option<Self> {
        let (am, bm, scale) = Self::align(a, b)?;
        Some(Decimal { mantissa: am.checked_add(bm)?, scale }.normalized())
    }

    fn sub(a: Self, b: Self) -> Option<Self> {
        let (am, bm, scale) = Self::align(a, b)?;
        Some(Decimal { mantissa: am.checked_sub(bm)?, scale }.normalized())
    }

    fn mul(a: Self, b: Self) -> Option<Self> {
        let scale = a.scale + b.scale;
        if scale > Self::MAX_SCALE {
            return None;
        }
        Some(Decimal { mantissa: a.mantissa.checked_mul(b.mantissa)?, scale }.normalized())
    }

    fn is(self, v: i128) -> bool {
        self.scale == 0 && self.mantissa == v
    }

    fn to_expr(self) -> Expr {
        let digits = self.mantissa.unsigned_abs().to_string();
        let text = if self.scale == 0 {
            digits
        } else {
            let s = self.scale as usize;
            let padded = format!("{digits:0>width$}", width = s + 1);
            let (int, frac) = padded.split_at(padded.len() - s);
            format!("{int}.{frac}")
        };
        if self.mantissa < 0 {
            Expr::neg(Expr::Num(text))
        } else {
            Expr::Num(text)
        }
    }
}

fn is_const(e: &Expr, v: i128) -> bool {
    Decimal::of(e).is_some_and(|d| d.is(v))
}

fn zero() -> Expr {
    Expr::num("0")
}

fn one() -> Expr {
    Expr::num("1")
}

fn mk_neg(a: Expr) -> Expr {
    match a {
        Expr::Neg(inner) => *inner,
        a if is_const(&a, 0) => zero(),
        a => Expr::neg(a),
    }
}

fn mk_add(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (Decimal::of(&a), Decimal::of(&b)) {
        if let Some(s) = Decimal::add(x, y) {
            return s.to_expr();
        }
    }
    if is_const(&a, 0) {
        return b;
    }
    if is_const(&b, 0) {
        return a;
    }
    Expr::bin(BinOp::Add, a, b)
}

fn mk_sub(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (Decimal::of(&a), Decimal::of(&b)) {
        if let Some(s) = Decimal::sub(x, y) {
            return s.to_expr();
        }
    }
    if is_const(&b, 0) {
        return a;
    }
    if is_const(&a, 0) {
        return mk_neg(b);
    }
    Expr::bin(BinOp::Sub, a, b)
}

fn mk_mul(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (Decimal::of(&a), Decimal::of(&b)) {
        if let Some(s) = Decimal::mul(x, y) {
            return s.to_expr();
        }
    }
    if is_const(&a, 0) || is_const(&b, 0) {
        return zero();
    }
    if is_const(&a, 1) {
        return b;
    }
    if is_const(&b, 1) {
        return a;
    }
    Expr::bin(BinOp::Mul, a, b)
}

fn mk_div(a: Expr, b: Expr) -> Expr {
    if is_const(&b, 1) {
        return a;
    }
    if is_const(&a, 0) {
        return zero();
    }
    Expr::bin(BinOp::Div, a, b)
}

fn mk_pow(a: Expr, b: Expr) -> Expr {
    if is_const(&b, 0) {
        return one();
    }
    if is_const(&b, 1) {
        return a;
    }
    Expr::bin(BinOp::Pow, a, b)
}

/// Symbolic derivative with respect to `var`.
///
/// Only literal folding and the 0/1 identities are applied to the result.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    match e {
        Expr::Num(_) | Expr::Pi => zero(),
        Expr::Var(v) => {
            if v == var {
                one()
            } else {
                zero()
            }
        }
        Expr::Neg(a) => mk_neg(differentiate(a, var)),
        Expr::Bin(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => mk_add(differentiate(a, var), differentiate(b, var)),
                BinOp::Sub => mk_sub(differentiate(a, var), differentiate(b, var)),
                BinOp::Mul => mk_add(
                    mk_mul(differentiate(a, var), b.clone()),
                    mk_mul(a.clone(), differentiate(b, var)),
                ),
                BinOp::Div => mk_div(
                    mk_sub(
                        mk_mul(differentiate(a, var), b.clone()),
                        mk_mul(a.clone(), differentiate(b, var)),
                    ),
                    mk_pow(b.clone(), Expr::num("2")),
                ),
                BinOp::Pow => {
                    if !b.depends_on(var) {
                        // b * a^(b-1) * a'
                        mk_mul(
                            mk_mul(b.clone(), mk_pow(a.clone(), mk_sub(b.clone(), one()))),
                            differentiate(a, var),
                        )
                    } else if !a.depends_on(var) {
                        // a^b * log(a) * b'
                        mk_mul(
                            mk_mul(e.clone(), Expr::call(Func::Log, a.clone())),
                            differentiate(b, var),
                        )
                    } else {
                        // a^b * (b' log(a) + b a' / a)
                        mk_mul(
                            e.clone(),
                            mk_add(
                                mk_mul(differentiate(b, var), Expr::call(Func::Log, a.clone())),
                                mk_div(mk_mul(b.clone(), differentiate(a, var)), a.clone()),
                            ),
                        )
                    }
                }
            }
        }
        Expr::Call(func, a) => {
            let da = differentiate(a, var);
            let inner = a.as_ref().clone();
            let outer = match func {
                Func::Exp => e.clone(),
                Func::Sin => Expr::call(Func::Cos, inner),
                Func::Cos => mk_neg(Expr::call(Func::Sin, inner)),
                Func::Sqrt => {
                    return mk_div(da, mk_mul(Expr::num("2"), e.clone()));
                }
                Func::Log => {
                    return mk_div(da, inner);
                }
            };
            mk_mul(outer, da)
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

/// An expression with literals converted at a fixed precision.
#[derive(Debug, Clone)]
pub struct BoundExpr {
    root: Node,
    precision: Precision,
}

#[derive(Debug, Clone)]
enum Node {
    Const(MPReal),
    Var,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    /// Power with a literal integer exponent.
    Powi(Box<Node>, i64),
    Call(Func, Box<Node>),
}

impl BoundExpr {
    fn new(e: &Expr, p: Precision) -> Self {
        BoundExpr {
            root: Self::lower(e, p),
            precision: p,
        }
    }

    fn lower(e: &Expr, p: Precision) -> Node {
        match e {
            // Literals were validated by the tokenizer; an unparseable one can
            // only come from a hand-built tree and evaluates to NaN.
            Expr::Num(t) => Node::Const(MPReal::parse(t, p).unwrap_or_else(|_| MPReal::nan(p))),
            Expr::Pi => Node::Const(MPReal::pi(p)),
            Expr::Var(_) => Node::Var,
            Expr::Neg(a) => Node::Neg(Box::new(Self::lower(a, p))),
            Expr::Bin(BinOp::Pow, a, b) => {
                let exponent = Self::lower(b, p);
                let literal = match &exponent {
                    Node::Const(c) => c.to_i64_exact(),
                    Node::Neg(inner) => match inner.as_ref() {
                        Node::Const(c) => c.to_i64_exact().map(|n| -n),
                        _ => None,
                    },
                    _ => None,
                };
                match literal {
                    Some(n) if n.unsigned_abs() <= 1 << 20 => Node::Powi(Box::new(Self::lower(a, p)), n),
                    _ => Node::Bin(BinOp::Pow, Box::new(Self::lower(a, p)), Box::new(exponent)),
                }
            }
            Expr::Bin(op, a, b) => Node::Bin(*op, Box::new(Self::lower(a, p)), Box::new(Self::lower(b, p))),
            Expr::Call(f, a) => Node::Call(*f, Box::new(Self::lower(a, p))),
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Value at `x`. Real-mode domain violations (`sqrt(-1)`, `log(-1)`)
    /// come back as NaN rather than an error.
    pub fn eval<S: Scalar>(&self, x: &S) -> S {
        Self::eval_node(&self.root, x)
    }

    fn eval_node<S: Scalar>(node: &Node, x: &S) -> S {
        match node {
            Node::Const(c) => S::from_real(c.clone()),
            Node::Var => x.clone(),
            Node::Neg(a) => -Self::eval_node(a, x),
            Node::Bin(op, a, b) => {
                let a = Self::eval_node(a, x);
                let b = Self::eval_node(b, x);
                match op {
                    BinOp::Add => a + &b,
                    BinOp::Sub => a - &b,
                    BinOp::Mul => a * &b,
                    BinOp::Div => a / &b,
                    BinOp::Pow => a.pow(&b),
                }
            }
            Node::Powi(a, n) => Self::eval_node(a, x).powi(*n),
            Node::Call(f, a) => {
                let a = Self::eval_node(a, x);
                match f {
                    Func::Exp => a.exp(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Sqrt => a.sqrt(),
                    Func::Log => a.ln(),
                }
            }
        }
    }
}

/// A parsed function together with its derivative, bound at one precision.
#[derive(Debug, Clone)]
pub struct Function {
    text: String,
    expr: Expr,
    derivative: Expr,
    value: BoundExpr,
    slope: BoundExpr,
}

impl Function {
    pub fn parse(text: &str, p: Precision) -> Result<Self, ExprError> {
        let expr = parse(text)?;
        let var = expr.variable().unwrap_or("x").to_string();
        let derivative = differentiate(&expr, &var);
        Ok(Function {
            text: text.to_string(),
            value: expr.bind(p),
            slope: derivative.bind(p),
            expr,
            derivative,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn derivative_expr(&self) -> &Expr {
        &self.derivative
    }

    pub fn precision(&self) -> Precision {
        self.value.precision()
    }

    pub fn value<S: Scalar>(&self, x: &S) -> S {
        self.value.eval(x)
    }

    pub fn slope<S: Scalar>(&self, x: &S) -> S {
        self.slope.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpscalar::MPComplex;
    use proptest::prelude::*;

    fn p(d: u32) -> Precision {
        Precision::digits_const(d)
    }

    fn x() -> Expr {
        Expr::var("x")
    }

    fn n(t: &str) -> Expr {
        Expr::num(t)
    }

    #[test]
    fn parses_newton_classic() {
        let e = parse("x^3-2*x-5").unwrap();
        let want = Expr::bin(
            BinOp::Sub,
            Expr::bin(
                BinOp::Sub,
                Expr::bin(BinOp::Pow, x(), n("3")),
                Expr::bin(BinOp::Mul, n("2"), x()),
            ),
            n("5"),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn parses_kepler() {
        let e = parse("x - 0.083*sin(x) - 1").unwrap();
        let want = Expr::bin(
            BinOp::Sub,
            Expr::bin(
                BinOp::Sub,
                x(),
                Expr::bin(BinOp::Mul, n("0.083"), Expr::call(Func::Sin, x())),
            ),
            n("1"),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn precedence() {
        assert_eq!(
            parse("-x^2").unwrap(),
            Expr::neg(Expr::bin(BinOp::Pow, x(), n("2")))
        );
        // right-associative
        assert_eq!(
            parse("x^2^3").unwrap(),
            Expr::bin(BinOp::Pow, x(), Expr::bin(BinOp::Pow, n("2"), n("3")))
        );
        assert_eq!(
            parse("2^-x").unwrap(),
            Expr::bin(BinOp::Pow, n("2"), Expr::neg(x()))
        );
        assert_eq!(
            parse("1-2-3").unwrap(),
            Expr::bin(BinOp::Sub, Expr::bin(BinOp::Sub, n("1"), n("2")), n("3"))
        );
        assert_eq!(
            parse("1/2*x").unwrap(),
            Expr::bin(BinOp::Mul, Expr::bin(BinOp::Div, n("1"), n("2")), x())
        );
        assert_eq!(parse("1e-8").unwrap(), n("1e-8"));
        assert_eq!(parse("pi*z").unwrap(), Expr::bin(BinOp::Mul, Expr::Pi, Expr::var("z")));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(parse("   "), Err(ExprError::Empty));
        assert!(matches!(parse("x+"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x $ 2"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("(x+1"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("2x"), Err(ExprError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("sin x"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("x)"), Err(ExprError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("."), Err(ExprError::Syntax { offset: 0, .. })));
        assert_eq!(
            parse("x + y"),
            Err(ExprError::UnknownIdentifier {
                name: "y".into(),
                offset: 4,
                variable: "x".into()
            })
        );
    }

    #[test]
    fn derivative_examples() {
        let d = differentiate(&parse("x^3-2*x-5").unwrap(), "x");
        assert_eq!(d, parse("3*x^2-2").unwrap());
        let d = differentiate(&parse("x - 0.083*sin(x) - 1").unwrap(), "x");
        assert_eq!(d, parse("1-0.083*cos(x)").unwrap());
        let d = differentiate(&parse("x").unwrap(), "x");
        assert_eq!(d, n("1"));
        let d = differentiate(&parse("(x-2)^2").unwrap(), "x");
        assert_eq!(d, parse("2*(x-2)").unwrap());
    }

    #[test]
    fn literal_folding_is_exact() {
        assert_eq!(mk_sub(n("3"), n("1")), n("2"));
        assert_eq!(mk_mul(n("0.083"), n("2")), n("0.166"));
        assert_eq!(mk_sub(n("1"), n("3")), Expr::neg(n("2")));
        assert_eq!(mk_add(n("0.1"), n("0.2")), n("0.3"));
        assert_eq!(mk_mul(n("1e-8"), n("1e3")), n("0.00001"));
        assert_eq!(mk_mul(x(), n("1")), x());
        assert_eq!(mk_add(n("0"), x()), x());
        assert_eq!(mk_neg(mk_neg(x())), x());
        assert_eq!(mk_pow(x(), n("1")), x());
    }

    #[test]
    fn eval_examples() {
        let q = p(40);
        let f = parse("x^3-2*x-5").unwrap();
        assert_eq!(f.eval(&MPReal::from_i64(1, q), q), MPReal::from_i64(-6, q));
        assert_eq!(f.eval(&MPReal::from_i64(2, q), q), MPReal::from_i64(-1, q));

        // oracle: 6 e^-2 - 1/3 written out independently
        let g = parse("(x^2+x)*exp(-x)-1/3").unwrap();
        let two = MPReal::from_i64(2, q);
        let want = MPReal::from_i64(6, q) * (-two.clone()).exp()
            - MPReal::one(q) / MPReal::from_i64(3, q);
        let got = g.eval(&two, q);
        assert!((got.clone() - &want).abs() <= q.decimal_ulp());
        assert!((got.to_f64() - 0.478_679).abs() < 1e-6);
    }

    #[test]
    fn literals_are_honest_at_high_precision() {
        let q = p(1000);
        let e = parse("0.083").unwrap();
        let v = e.eval(&MPReal::zero(q), q);
        let diff = v * MPReal::from_i64(1000, q) - MPReal::from_i64(83, q);
        assert!(diff.abs() <= q.decimal_ulp());
    }

    #[test]
    fn real_domain_errors_are_nan() {
        let q = p(20);
        assert!(parse("sqrt(x)").unwrap().eval(&MPReal::from_i64(-1, q), q).is_nan());
        assert!(parse("log(x)").unwrap().eval(&MPReal::from_i64(-1, q), q).is_nan());
        assert!(parse("x^0.5").unwrap().eval(&MPReal::from_i64(-4, q), q).is_nan());
        // principal branch in complex mode
        let z = parse("sqrt(z)").unwrap().eval(&MPComplex::from_f64(-4.0, 0.0, q), q);
        assert!(z.re.is_zero());
        assert_eq!(z.im, MPReal::from_i64(2, q));
    }

    #[test]
    fn complex_eval_of_cube() {
        let q = p(30);
        let f = Function::parse("z^3-1", q).unwrap();
        let z = MPComplex::from_f64(0.0, 1.0, q);
        // i^3 - 1 = -1 - i
        assert_eq!(f.value(&z), MPComplex::from_f64(-1.0, -1.0, q));
        assert_eq!(f.slope(&z), MPComplex::from_f64(-3.0, 0.0, q));
    }

    #[test]
    fn derivative_matches_finite_difference_on_exp_example() {
        let q = p(60);
        let e = parse("exp(-x)*(x^2+x)").unwrap();
        let d = differentiate(&e, "x");
        let h = q.pow10(-30);
        let two = MPReal::from_i64(2, q);
        for v in ["0.3", "2", "3.82", "-1.5"] {
            let x0 = MPReal::parse(v, q).unwrap();
            let fd = (e.eval(&(&x0 + &h), q) - e.eval(&(&x0 - &h), q)) / (&h * &two);
            let got = d.eval(&x0, q);
            assert!((got - &fd).abs() <= q.pow10(-28), "at {v}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            3 => Just(Expr::var("x")),
            2 => (1u32..40, 0u32..3).prop_map(|(m, s)| {
                let text = if s == 0 { m.to_string() } else { format!("{}.{:0>w$}", m / 10u32.pow(s).max(1), m % 10u32.pow(s), w = s as usize) };
                Expr::Num(text)
            }),
            1 => Just(Expr::Pi),
        ];
        leaf.prop_recursive(6, 48, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Add, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Sub, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(BinOp::Mul, a, b)),
                // denominators kept away from zero
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::bin(
                    BinOp::Div,
                    a,
                    Expr::bin(BinOp::Add, Expr::num("2"), Expr::call(Func::Sin, b))
                )),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| Expr::bin(BinOp::Pow, a, Expr::num(k.to_string()))),
                inner.clone().prop_map(Expr::neg),
                inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
                inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
                // exp of a bounded argument
                inner.clone().prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
                // sqrt and log of a positive argument
                inner.clone().prop_map(|a| Expr::call(Func::Sqrt, Expr::bin(BinOp::Add, Expr::num("1"), Expr::bin(BinOp::Pow, a, Expr::num("2"))))),
                inner.clone().prop_map(|a| Expr::call(Func::Log, Expr::bin(BinOp::Add, Expr::num("1"), Expr::bin(BinOp::Pow, a, Expr::num("2"))))),
            ]
        })
    }

    fn depth(e: &Expr) -> usize {
        match e {
            Expr::Num(_) | Expr::Pi | Expr::Var(_) => 0,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + depth(a),
            Expr::Bin(_, a, b) => 1 + depth(a).max(depth(b)),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn render_parse_idempotent(e in arb_expr()) {
            let text = e.render();
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(parse(&back.render()).unwrap(), back);
        }

        #[test]
        fn derivative_agrees_with_central_difference(e in arb_expr(), at in -2.0f64..2.0) {
            // the generator nests its guards, so trees can exceed depth 6
            prop_assume!(depth(&e) <= 12);
            let digits = 60u32;
            let q = p(digits);
            let x0 = MPReal::from_f64(at, q);
            let d = differentiate(&e, "x");
            let h = q.pow10(-i64::from(digits / 2));
            let two = MPReal::from_i64(2, q);
            let fx = e.eval(&x0, q);
            let fd = (e.eval(&(&x0 + &h), q) - e.eval(&(&x0 - &h), q)) / (&h * &two);
            let got = d.eval(&x0, q);
            prop_assume!(got.is_finite() && fd.is_finite() && fx.is_finite());
            let scale = got.abs().max(fx.abs()).max(MPReal::one(q));
            let bound = q.pow10(-i64::from(digits / 2) + 2) * scale;
            prop_assert!((got.clone() - &fd).abs() <= bound, "{} at {}: {} vs {}", e, at, got, fd);
        }

        #[test]
        fn higher_precision_agrees(e in arb_expr(), at in -2.0f64..2.0) {
            let lo = p(30);
            let hi = p(60);
            let a = e.eval(&MPReal::from_f64(at, lo), lo);
            let b = e.eval(&MPReal::from_f64(at, hi), hi);
            prop_assume!(a.is_finite() && b.is_finite());
            let scale = b.abs().max(MPReal::one(hi));
            prop_assert!((a.with_precision(hi) - &b).abs() <= lo.pow10(-28) * scale);
        }
    }
}
