//! Closed-form perturbation expressions.
//!
//! A small infix language over the pendulum state and rescaled time. The
//! grammar is
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! reads as `-(x^2)`. The exponent must be constant; it is folded to a
//! literal at parse time. There is no implicit multiplication.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{omega1, omega2};

/// Deepest expression tree the parser will build.
pub const MAX_DEPTH: usize = 200;

/// State and time variables a perturbation may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Tau,
    Th1,
    Th1d,
    Th2,
    Th2d,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::Tau, Var::Th1, Var::Th1d, Var::Th2, Var::Th2d];

    pub fn name(self) -> &'static str {
        match self {
            Var::Tau => "tau",
            Var::Th1 => "th1",
            Var::Th1d => "th1d",
            Var::Th2 => "th2",
            Var::Th2d => "th2d",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Var::ALL.into_iter().find(|v| v.name() == name)
    }
}

/// Reserved constants. `w1` and `w2` are the two normal-mode frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    W1,
    W2,
}

impl Constant {
    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::W1 => "w1",
            Constant::W2 => "w2",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::W1 => omega1(),
            Constant::W2 => omega2(),
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [Constant::Pi, Constant::W1, Constant::W2]
            .into_iter()
            .find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Exp,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [Func::Sin, Func::Cos, Func::Sqrt, Func::Exp, Func::Abs]
            .into_iter()
            .find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `base ^ exponent`; the exponent is always a folded literal.
    Pow {
        base: Box<Expr>,
        exponent: f64,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
    },
}

/// Arguments of a perturbation function `F(tau, th1, th1d, th2, th2d)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalEnv {
    pub tau: f64,
    pub th1: f64,
    pub th1d: f64,
    pub th2: f64,
    pub th2d: f64,
}

impl EvalEnv {
    pub fn new(tau: f64, th1: f64, th1d: f64, th2: f64, th2d: f64) -> Self {
        Self {
            tau,
            th1,
            th1d,
            th2,
            th2d,
        }
    }

    pub fn get(&self, var: Var) -> f64 {
        match var {
            Var::Tau => self.tau,
            Var::Th1 => self.th1,
            Var::Th1d => self.th1d,
            Var::Th2 => self.th2,
            Var::Th2d => self.th2d,
        }
    }

    fn is_finite(&self) -> bool {
        Var::ALL.iter().all(|&v| self.get(v).is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken { found: String, expected: &'static str },
    UnexpectedEnd { expected: &'static str },
    InvalidNumber(String),
    ImplicitMultiplication,
    UnknownIdentifier(String),
    UnknownFunction(String),
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    NonConstantExponent,
    InvalidExponent,
    TooDeep,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnexpectedToken { found, expected } => {
                write!(f, "expected {expected}, found {found}")
            }
            ParseErrorKind::UnexpectedEnd { expected } => {
                write!(f, "expected {expected}, found end of input")
            }
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number {s:?}"),
            ParseErrorKind::ImplicitMultiplication => {
                write!(f, "implicit multiplication is not supported; insert '*'")
            }
            ParseErrorKind::UnknownIdentifier(name) => write!(
                f,
                "unknown identifier {name:?} (variables: tau, th1, th1d, th2, th2d; constants: pi, w1, w2)"
            ),
            ParseErrorKind::UnknownFunction(name) => write!(
                f,
                "unknown function {name:?} (functions: sin, cos, sqrt, exp, abs)"
            ),
            ParseErrorKind::Arity {
                function,
                expected,
                found,
            } => write!(
                f,
                "{function} takes {expected} argument(s), {found} given"
            ),
            ParseErrorKind::NonConstantExponent => {
                write!(f, "exponent must be a constant expression")
            }
            ParseErrorKind::InvalidExponent => write!(f, "exponent does not evaluate to a finite number"),
            ParseErrorKind::TooDeep => write!(f, "expression nested deeper than {MAX_DEPTH} levels"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("{function} is undefined at {argument}")]
    Domain {
        function: &'static str,
        argument: f64,
    },
    #[error("{operation} produced a non-finite value")]
    NonFinite { operation: &'static str },
    #[error("evaluation environment contains a non-finite value")]
    NonFiniteInput,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Num(f64),
    Name(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok<'_> {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Name(n) => format!("name {n:?}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_name_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn lex(text: &str) -> Result<Vec<(Tok<'_>, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let simple = match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((tok, start));
            i += 1;
            continue;
        }
        if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
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
            let lit = &text[start..i];
            if i < bytes.len() && (is_name_start(bytes[i]) || bytes[i] == b'.') {
                return Err(ParseError {
                    offset: i,
                    kind: if bytes[i] == b'.' {
                        ParseErrorKind::InvalidNumber(format!("{lit}."))
                    } else {
                        ParseErrorKind::ImplicitMultiplication
                    },
                });
            }
            let value: f64 = lit.parse().map_err(|_| ParseError {
                offset: start,
                kind: ParseErrorKind::InvalidNumber(lit.to_string()),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::InvalidNumber(lit.to_string()),
                });
            }
            out.push((Tok::Num(value), start));
            continue;
        }
        if is_name_start(b) {
            while i < bytes.len() && is_name_continue(bytes[i]) {
                i += 1;
            }
            out.push((Tok::Name(&text[start..i]), start));
            continue;
        }
        let c = text[start..].chars().next().unwrap_or('\u{fffd}');
        return Err(ParseError {
            offset: start,
            kind: ParseErrorKind::UnexpectedChar(c),
        });
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    tokens: Vec<(Tok<'a>, usize)>,
    pos: usize,
    nesting: usize,
}

type Node = (Expr, usize);

impl<'a> Parser<'a> {
    fn peek(&self) -> Tok<'a> {
        self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok<'a> {
        let tok = self.peek();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let tok = self.peek();
        let kind = match tok {
            Tok::End => ParseErrorKind::UnexpectedEnd { expected },
            Tok::Name(_) | Tok::Num(_) | Tok::LParen
                if expected == "operator or end of input" || expected == "')'" =>
            {
                ParseErrorKind::ImplicitMultiplication
            }
            other => ParseErrorKind::UnexpectedToken {
                found: other.describe(),
                expected,
            },
        };
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn deepen(&self, depth: usize, at: usize) -> Result<usize, ParseError> {
        if depth > MAX_DEPTH {
            Err(ParseError {
                offset: at,
                kind: ParseErrorKind::TooDeep,
            })
        } else {
            Ok(depth)
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let (mut lhs, mut depth) = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok((lhs, depth)),
            };
            let at = self.offset();
            self.bump();
            let (rhs, rd) = self.term()?;
            depth = self.deepen(depth.max(rd) + 1, at)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let (mut lhs, mut depth) = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok((lhs, depth)),
            };
            let at = self.offset();
            self.bump();
            let (rhs, rd) = self.unary()?;
            depth = self.deepen(depth.max(rd) + 1, at)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        // Every recursive path passes through here; bound the stack.
        self.nesting += 1;
        let out = if self.nesting > MAX_DEPTH {
            Err(ParseError {
                offset: self.offset(),
                kind: ParseErrorKind::TooDeep,
            })
        } else {
            self.unary_inner()
        };
        self.nesting -= 1;
        out
    }

    fn unary_inner(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let (inner, d) = self.unary()?;
                let depth = self.deepen(d + 1, at)?;
                Ok((Expr::Neg(Box::new(inner)), depth))
            }
            Tok::Plus => {
                self.bump();
                let (inner, d) = self.unary()?;
                // Unary plus is dropped but still counts toward nesting.
                self.deepen(d + 1, at)?;
                Ok((inner, d))
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let (base, depth) = self.primary()?;
        if self.peek() != Tok::Caret {
            return Ok((base, depth));
        }
        let at = self.offset();
        self.bump();
        let exp_at = self.offset();
        let (exp_expr, ed) = self.unary()?;
        let depth = self.deepen(depth.max(ed) + 1, at)?;
        if exp_expr.mentions_variable() {
            return Err(ParseError {
                offset: exp_at,
                kind: ParseErrorKind::NonConstantExponent,
            });
        }
        let exponent = exp_expr
            .eval(&EvalEnv::default())
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(ParseError {
                offset: exp_at,
                kind: ParseErrorKind::InvalidExponent,
            })?;
        Ok((
            Expr::Pow {
                base: Box::new(base),
                exponent,
            },
            depth,
        ))
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        match self.peek() {
            Tok::Num(v) => {
                self.bump();
                Ok((Expr::Num(v), 1))
            }
            Tok::LParen => {
                self.bump();
                let (inner, d) = self.expr()?;
                if self.peek() != Tok::RParen {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                Ok((inner, d))
            }
            Tok::Name(name) => {
                self.bump();
                if self.peek() == Tok::LParen {
                    return self.call(name, at);
                }
                if let Some(var) = Var::from_name(name) {
                    Ok((Expr::Var(var), 1))
                } else if let Some(c) = Constant::from_name(name) {
                    Ok((Expr::Const(c), 1))
                } else {
                    Err(ParseError {
                        offset: at,
                        kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
                    })
                }
            }
            _ => Err(self.unexpected("number, name or '('")),
        }
    }

    fn call(&mut self, name: &str, at: usize) -> Result<Node, ParseError> {
        let func = Func::from_name(name).ok_or(ParseError {
            offset: at,
            kind: ParseErrorKind::UnknownFunction(name.to_string()),
        })?;
        self.bump(); // '('
        let mut args = Vec::new();
        if self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.unexpected("',' or ')'")),
                }
            }
        }
        self.bump(); // ')'
        if args.len() != 1 {
            return Err(ParseError {
                offset: at,
                kind: ParseErrorKind::Arity {
                    function: name.to_string(),
                    expected: 1,
                    found: args.len(),
                },
            });
        }
        let (arg, d) = args.pop().expect("one argument");
        let depth = self.deepen(d + 1, at)?;
        Ok((
            Expr::Call {
                func,
                arg: Box::new(arg),
            },
            depth,
        ))
    }
}

/// Parses `text` into an expression tree.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        nesting: 0,
    };
    let (expr, _) = parser.expr()?;
    if parser.peek() != Tok::End {
        return Err(parser.unexpected("operator or end of input"));
    }
    Ok(expr)
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn finite(value: f64, operation: &'static str) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite { operation })
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        return finite(base.powi(exponent as i32), "^");
    }
    if base > 0.0 {
        finite(base.powf(exponent), "^")
    } else if base == 0.0 && exponent > 0.0 {
        Ok(0.0)
    } else {
        Err(EvalError::Domain {
            function: "^",
            argument: base,
        })
    }
}

impl Expr {
    /// Parses `text`; see [`parse`].
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse(text)
    }

    pub fn zero() -> Self {
        Expr::Num(0.0)
    }

    pub fn eval(&self, env: &EvalEnv) -> Result<f64, EvalError> {
        if !env.is_finite() {
            return Err(EvalError::NonFiniteInput);
        }
        self.eval_unchecked(env)
    }

    fn eval_unchecked(&self, env: &EvalEnv) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(v) => Ok(env.get(*v)),
            Expr::Const(c) => Ok(c.value()),
            Expr::Neg(e) => Ok(-e.eval_unchecked(env)?),
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval_unchecked(env)?;
                let b = rhs.eval_unchecked(env)?;
                match op {
                    BinOp::Add => finite(a + b, "+"),
                    BinOp::Sub => finite(a - b, "-"),
                    BinOp::Mul => finite(a * b, "*"),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else {
                            finite(a / b, "/")
                        }
                    }
                }
            }
            Expr::Pow { base, exponent } => pow(base.eval_unchecked(env)?, *exponent),
            Expr::Call { func, arg } => {
                let x = arg.eval_unchecked(env)?;
                match func {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Abs => Ok(x.abs()),
                    Func::Exp => finite(x.exp(), "exp"),
                    Func::Sqrt => {
                        if x < 0.0 {
                            Err(EvalError::Domain {
                                function: "sqrt",
                                argument: x,
                            })
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                }
            }
        }
    }

    /// True if any variable (including `tau`) occurs in the tree.
    pub fn mentions_variable(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(e) => e.mentions_variable(),
            Expr::Binary { lhs, rhs, .. } => lhs.mentions_variable() || rhs.mentions_variable(),
            Expr::Pow { base, .. } => base.mentions_variable(),
            Expr::Call { arg, .. } => arg.mentions_variable(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow { .. } => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_sign_negative() {
        write!(f, "-{:?}", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the minimum parentheses needed to reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, e.precedence() < 3)
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                write_child(f, lhs, lhs.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                write_child(f, rhs, rhs.precedence() <= p)
            }
            Expr::Pow { base, exponent } => {
                write_child(f, base, base.precedence() <= 4)?;
                f.write_str("^")?;
                write_num(f, *exponent)
            }
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(tau: f64, th1: f64) -> EvalEnv {
        EvalEnv::new(tau, th1, 0.0, 0.0, 0.0)
    }

    #[test]
    fn corollary_expressions_parse() {
        let f2 = parse("(1 - th1^2) * sin(w1 * tau)").unwrap();
        let tau = std::f64::consts::FRAC_PI_2 / omega1();
        assert!((f2.eval(&env(tau, 0.5)).unwrap() - 0.75).abs() < 1e-15);

        let f1 = parse("th2d + th1^2 * cos(w2 * tau)").unwrap();
        let e = EvalEnv::new(0.0, 2.0, 0.0, 0.0, 3.0);
        assert_eq!(f1.eval(&e).unwrap(), 7.0);
    }

    #[test]
    fn zero_and_constants() {
        assert_eq!(parse("0").unwrap(), Expr::Num(0.0));
        assert_eq!(parse("0").unwrap().eval(&env(3.0, -1.0)).unwrap(), 0.0);
        let w1 = parse("w1").unwrap().eval(&EvalEnv::default()).unwrap();
        assert_eq!(w1, (2.0 - 2f64.sqrt()).sqrt());
        assert!((w1 - 0.765_366_864_730_179_5).abs() < 1e-16);
        assert_eq!(parse("sin(pi/2)").unwrap().eval(&EvalEnv::default()).unwrap(), 1.0);
    }

    #[test]
    fn precedence_and_associativity() {
        let e = EvalEnv::default();
        let v = |s: &str| parse(s).unwrap().eval(&e).unwrap();
        assert_eq!(v("2^3^2"), 512.0);
        assert_eq!(v("-2^2"), -4.0);
        assert_eq!(v("2^-1"), 0.5);
        assert_eq!(v("1 - 2 - 3"), -4.0);
        assert_eq!(v("8 / 4 / 2"), 1.0);
        assert_eq!(v("1 + 2 * 3"), 7.0);
        assert_eq!(v("(1 + 2) * 3"), 9.0);
        assert_eq!(v("2 ^ (1/2)"), 2f64.sqrt());
        assert_eq!(v("+3"), 3.0);
        assert_eq!(v(".5e1"), 5.0);
    }

    #[test]
    fn errors_carry_offsets() {
        let err = parse("2x").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ImplicitMultiplication);
        assert_eq!(err.offset, 1);

        let err = parse("2 th1").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ImplicitMultiplication);
        assert_eq!(err.offset, 2);

        let err = parse("th3 + 1").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("th3".into()));
        assert_eq!(err.offset, 0);

        let err = parse("1 + tan(tau)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownFunction("tan".into()));
        assert_eq!(err.offset, 4);

        let err = parse("sin(1, 2)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Arity { expected: 1, found: 2, .. }));
        assert!(matches!(parse("cos()").unwrap_err().kind, ParseErrorKind::Arity { found: 0, .. }));

        let err = parse("(1 + 2").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnexpectedEnd { .. }));
        assert_eq!(err.offset, 6);

        let err = parse("1 + * 2").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnexpectedToken { .. }));
        assert_eq!(err.offset, 4);

        assert!(matches!(parse("1 $ 2").unwrap_err().kind, ParseErrorKind::UnexpectedChar('$')));
        assert_eq!(parse("th1^th2").unwrap_err().kind, ParseErrorKind::NonConstantExponent);
        assert_eq!(parse("").unwrap_err().offset, 0);
        assert!(matches!(parse("1.2.3").unwrap_err().kind, ParseErrorKind::InvalidNumber(_)));
        assert!(matches!(parse("1e999").unwrap_err().kind, ParseErrorKind::InvalidNumber(_)));
    }

    #[test]
    fn deep_nesting_is_rejected() {
        let deep = format!("{}1{}", "(".repeat(5000), ")".repeat(5000));
        assert_eq!(parse(&deep).unwrap_err().kind, ParseErrorKind::TooDeep);
        let long = vec!["1"; 5000].join("+");
        assert_eq!(parse(&long).unwrap_err().kind, ParseErrorKind::TooDeep);
        let negs = format!("{}1", "-".repeat(5000));
        assert_eq!(parse(&negs).unwrap_err().kind, ParseErrorKind::TooDeep);
        // Redundant parentheses alone do not make a tree deep.
        let ok = format!("{}1{}", "(".repeat(50), ")".repeat(50));
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = EvalEnv::new(0.0, -1.0, 0.0, 0.0, 0.0);
        let ev = |s: &str| parse(s).unwrap().eval(&e);
        assert!(matches!(ev("sqrt(th1)"), Err(EvalError::Domain { function: "sqrt", .. })));
        assert_eq!(ev("1 / (th1 + 1)"), Err(EvalError::DivisionByZero));
        assert!(matches!(ev("th1^0.5"), Err(EvalError::Domain { .. })));
        assert_eq!(ev("th1^3"), Ok(-1.0));
        assert_eq!(ev("(th1 + 1)^-2"), Err(EvalError::DivisionByZero));
        assert_eq!(ev("(th1 + 1)^0.5"), Ok(0.0));
        assert!(matches!(ev("exp(1000)"), Err(EvalError::NonFinite { .. })));
        let bad = EvalEnv::new(f64::NAN, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(parse("1").unwrap().eval(&bad), Err(EvalError::NonFiniteInput));
    }

    #[test]
    fn display_reparses() {
        for text in [
            "(1 - th1^2) * sin(w1 * tau)",
            "th2d + th1^2 * cos(w2 * tau)",
            "-(-th1)",
            "(-th1)^2",
            "(th1^2)^3",
            "1 - (2 - 3)",
            "1 / (2 * th2)",
            "abs(-tau) ^ -1.5",
            "exp(th1d) / 1e-7",
        ] {
            let e = parse(text).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{text} -> {printed}");
        }
        assert_eq!(parse("(1 - th1^2) * sin(w1 * tau)").unwrap().to_string(), "(1.0 - th1^2.0) * sin(w1 * tau)");
    }
}
