//! A small arithmetic language for boundaries, drifts, potentials and
//! payoffs.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | 'i' | 't' | 'x' | func '(' args ')' | '(' expr ')'
//! func    := exp | log | sin | cos | sqrt | abs | min | max | step
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. `step(x, r)` is
//! `1` when `x > r` and `0` otherwise. The same tree evaluates over `f64`,
//! [`Complex64`] and [`HyperDual`] through the [`Scalar`] trait.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::autodiff::HyperDual;

/// Largest imaginary part tolerated when a real value is expected.
pub const REAL_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Var::T => "t",
            Var::X => "x",
        })
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Min,
    Max,
    Step,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "step" => Func::Step,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Step => "step",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Step => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Imag,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("`{func}` at offset {offset} takes {expected} argument(s), got {found}")]
    Arity {
        offset: usize,
        func: &'static str,
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

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not bound")]
    UnboundVariable(Var),
    #[error("{func} is undefined at {arg}")]
    Domain { func: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("complex value (imaginary part {im}) where a real value is required")]
    ComplexValue { im: f64 },
    #[error("expression is not a constant")]
    NotConstant,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
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
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                expected: "number".into(),
                found: format!("`{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: i,
                    expected: "operand or operator".into(),
                    found: format!("`{ch}`"),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "t" => return Ok(Expr::Var(Var::T)),
                    "x" => return Ok(Expr::Var(Var::X)),
                    "i" => return Ok(Expr::Imag),
                    _ => {}
                }
                let func = Func::from_name(&name)
                    .ok_or(ParseError::UnknownIdentifier { offset, name })?;
                self.expect(Tok::LParen, "`(`")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                if args.len() != func.arity() {
                    return Err(ParseError::Arity {
                        offset,
                        func: func.name(),
                        expected: func.arity(),
                        found: args.len(),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.error("operand")),
        }
    }
}

// ---------------------------------------------------------------------------
// Scalars

/// Number types an [`Expr`] can be evaluated over.
pub trait Scalar: Copy {
    fn from_real(v: f64) -> Self;
    fn imaginary_unit() -> Result<Self, EvalError>;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div(self, o: Self) -> Result<Self, EvalError>;
    fn pow(self, o: Self) -> Result<Self, EvalError>;
    fn exp(self) -> Self;
    fn log(self) -> Result<Self, EvalError>;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Result<Self, EvalError>;
    fn abs(self) -> Self;
    fn min(self, o: Self) -> Result<Self, EvalError>;
    fn max(self, o: Self) -> Result<Self, EvalError>;
    fn step(self, level: Self) -> Result<Self, EvalError>;
}

fn is_small_integer(p: f64) -> bool {
    p.fract() == 0.0 && p.abs() <= 1024.0
}

impl Scalar for f64 {
    fn from_real(v: f64) -> Self {
        v
    }
    fn imaginary_unit() -> Result<Self, EvalError> {
        Err(EvalError::ComplexValue { im: 1.0 })
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self, EvalError> {
        if o == 0.0 {
            Err(EvalError::DivisionByZero)
        } else {
            Ok(self / o)
        }
    }
    fn pow(self, p: Self) -> Result<Self, EvalError> {
        if is_small_integer(p) {
            if self == 0.0 && p < 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(self.powi(p as i32))
        } else if self < 0.0 {
            Err(EvalError::Domain { func: "pow", arg: self })
        } else {
            Ok(self.powf(p))
        }
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn log(self) -> Result<Self, EvalError> {
        if self <= 0.0 {
            Err(EvalError::Domain { func: "log", arg: self })
        } else {
            Ok(self.ln())
        }
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Result<Self, EvalError> {
        if self < 0.0 {
            Err(EvalError::Domain { func: "sqrt", arg: self })
        } else {
            Ok(f64::sqrt(self))
        }
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn min(self, o: Self) -> Result<Self, EvalError> {
        Ok(f64::min(self, o))
    }
    fn max(self, o: Self) -> Result<Self, EvalError> {
        Ok(f64::max(self, o))
    }
    fn step(self, level: Self) -> Result<Self, EvalError> {
        Ok(if self > level { 1.0 } else { 0.0 })
    }
}

fn real_part(z: Complex64) -> Result<f64, EvalError> {
    if z.im.abs() > REAL_TOLERANCE {
        Err(EvalError::ComplexValue { im: z.im })
    } else {
        Ok(z.re)
    }
}

impl Scalar for Complex64 {
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn imaginary_unit() -> Result<Self, EvalError> {
        Ok(Complex64::i())
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self, EvalError> {
        if o == Complex64::new(0.0, 0.0) {
            Err(EvalError::DivisionByZero)
        } else {
            Ok(self / o)
        }
    }
    fn pow(self, p: Self) -> Result<Self, EvalError> {
        // integer powers by repeated multiplication keep real inputs real
        if p.im == 0.0 && is_small_integer(p.re) {
            if self == Complex64::new(0.0, 0.0) && p.re < 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            return Ok(self.powi(p.re as i32));
        }
        if self.im == 0.0 && p.im == 0.0 && self.re >= 0.0 {
            return Ok(Complex64::new(self.re.powf(p.re), 0.0));
        }
        if self == Complex64::new(0.0, 0.0) {
            return Err(EvalError::Domain { func: "pow", arg: 0.0 });
        }
        Ok(self.powc(p))
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn log(self) -> Result<Self, EvalError> {
        if self == Complex64::new(0.0, 0.0) {
            Err(EvalError::Domain { func: "log", arg: 0.0 })
        } else {
            Ok(self.ln())
        }
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn sqrt(self) -> Result<Self, EvalError> {
        Ok(Complex64::sqrt(self))
    }
    fn abs(self) -> Self {
        Complex64::new(self.norm(), 0.0)
    }
    fn min(self, o: Self) -> Result<Self, EvalError> {
        Ok(Complex64::new(real_part(self)?.min(real_part(o)?), 0.0))
    }
    fn max(self, o: Self) -> Result<Self, EvalError> {
        Ok(Complex64::new(real_part(self)?.max(real_part(o)?), 0.0))
    }
    fn step(self, level: Self) -> Result<Self, EvalError> {
        let v = if real_part(self)? > real_part(level)? { 1.0 } else { 0.0 };
        Ok(Complex64::new(v, 0.0))
    }
}

impl Scalar for HyperDual {
    fn from_real(v: f64) -> Self {
        HyperDual::constant(v)
    }
    fn imaginary_unit() -> Result<Self, EvalError> {
        Err(EvalError::ComplexValue { im: 1.0 })
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self, EvalError> {
        self / o
    }
    fn pow(self, o: Self) -> Result<Self, EvalError> {
        HyperDual::pow(self, o)
    }
    fn exp(self) -> Self {
        HyperDual::exp(self)
    }
    fn log(self) -> Result<Self, EvalError> {
        self.ln()
    }
    fn sin(self) -> Self {
        HyperDual::sin(self)
    }
    fn cos(self) -> Self {
        HyperDual::cos(self)
    }
    fn sqrt(self) -> Result<Self, EvalError> {
        HyperDual::sqrt(self)
    }
    fn abs(self) -> Self {
        HyperDual::abs(self)
    }
    fn min(self, o: Self) -> Result<Self, EvalError> {
        Ok(if o.value < self.value { o } else { self })
    }
    fn max(self, o: Self) -> Result<Self, EvalError> {
        Ok(if o.value > self.value { o } else { self })
    }
    fn step(self, level: Self) -> Result<Self, EvalError> {
        Ok(HyperDual::constant(if self.value > level.value { 1.0 } else { 0.0 }))
    }
}

/// Variable values for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<S> {
    pub t: Option<S>,
    pub x: Option<S>,
}

impl<S> Default for Bindings<S> {
    fn default() -> Self {
        Self { t: None, x: None }
    }
}

impl<S: Copy> Bindings<S> {
    pub fn t(t: S) -> Self {
        Self { t: Some(t), x: None }
    }

    pub fn x(x: S) -> Self {
        Self { t: None, x: Some(x) }
    }

    pub fn tx(t: S, x: S) -> Self {
        Self { t: Some(t), x: Some(x) }
    }
}

// ---------------------------------------------------------------------------

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser { toks: lex(src)?, pos: 0 };
        let e = p.expr()?;
        if *p.peek() != Tok::End {
            return Err(p.error("operator or end of input"));
        }
        Ok(e)
    }

    pub fn eval<S: Scalar>(&self, b: &Bindings<S>) -> Result<S, EvalError> {
        self.eval_with(|v| match v {
            Var::T => b.t,
            Var::X => b.x,
        })
    }

    pub fn eval_with<S: Scalar>(&self, lookup: impl Fn(Var) -> Option<S> + Copy) -> Result<S, EvalError> {
        Ok(match self {
            Expr::Num(v) => S::from_real(*v),
            Expr::Imag => S::imaginary_unit()?,
            Expr::Var(v) => lookup(*v).ok_or(EvalError::UnboundVariable(*v))?,
            Expr::Neg(e) => e.eval_with(lookup)?.neg(),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_with(lookup)?, b.eval_with(lookup)?);
                match op {
                    BinOp::Add => a.add(b),
                    BinOp::Sub => a.sub(b),
                    BinOp::Mul => a.mul(b),
                    BinOp::Div => a.div(b)?,
                    BinOp::Pow => a.pow(b)?,
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval_with(lookup)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => a.log()?,
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Sqrt => a.sqrt()?,
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval_with(lookup)?)?,
                    Func::Max => a.max(args[1].eval_with(lookup)?)?,
                    Func::Step => a.step(args[1].eval_with(lookup)?)?,
                }
            }
        })
    }

    /// Real-valued evaluation. Expressions that mention `i` are evaluated over
    /// the complex numbers and rejected unless the imaginary part vanishes.
    pub fn eval_real(&self, b: Bindings<f64>) -> Result<f64, EvalError> {
        if self.uses_imaginary_unit() {
            let cb = Bindings {
                t: b.t.map(Complex64::from_real),
                x: b.x.map(Complex64::from_real),
            };
            real_part(self.eval(&cb)?)
        } else {
            self.eval(&b)
        }
    }

    pub fn eval_complex(&self, b: Bindings<f64>) -> Result<Complex64, EvalError> {
        self.eval(&Bindings {
            t: b.t.map(Complex64::from_real),
            x: b.x.map(Complex64::from_real),
        })
    }

    /// Value of a variable-free expression.
    pub fn eval_constant(&self) -> Result<f64, EvalError> {
        if self.uses_var(Var::T) || self.uses_var(Var::X) {
            return Err(EvalError::NotConstant);
        }
        self.eval_real(Bindings::default())
    }

    fn any(&self, pred: &impl Fn(&Expr) -> bool) -> bool {
        pred(self)
            || match self {
                Expr::Neg(e) => e.any(pred),
                Expr::Binary(_, a, b) => a.any(pred) || b.any(pred),
                Expr::Call(_, args) => args.iter().any(|a| a.any(pred)),
                _ => false,
            }
    }

    pub fn uses_imaginary_unit(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Imag))
    }

    pub fn uses_var(&self, v: Var) -> bool {
        self.any(&|e| *e == Expr::Var(v))
    }

    pub fn uses_step(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Call(Func::Step, _)))
    }

    /// Recognises `step(x, r)`, `k*step(x, r)` and `step(x, r)*k` with
    /// constant `k` and `r`, returning `(k, r)`.
    pub fn as_step_potential(&self) -> Option<(f64, f64)> {
        fn bare(e: &Expr) -> Option<f64> {
            match e {
                Expr::Call(Func::Step, args) if args[0] == Expr::Var(Var::X) => {
                    args[1].eval_constant().ok()
                }
                _ => None,
            }
        }
        if let Some(r) = bare(self) {
            return Some((1.0, r));
        }
        if let Expr::Binary(BinOp::Mul, a, b) = self {
            if let (Ok(k), Some(r)) = (a.eval_constant(), bare(b)) {
                return Some((k, r));
            }
            if let (Some(r), Ok(k)) = (bare(a), b.eval_constant()) {
                return Some((k, r));
            }
        }
        None
    }
}

/// Fully parenthesised, so the printed form re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Imag => f.write_str("i"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}
