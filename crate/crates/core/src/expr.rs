//! Scalar expressions for the right-hand sides f(t, x, w), gᵢ(t, x, w),
//! K(t, x), ℓ(t, x) and the weight φ(t).
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | primary ;
//! primary = number | var | call | "(" expr ")" ;
//! var     = "t" | "x" | "w" ;
//! call    = "abs" "(" expr ")"
//!         | "psi" "(" expr ")"
//!         | "mitlef" "(" literal "," expr ")"
//!         | "pow" "(" expr "," literal ")" ;
//! literal = [ "-" ] number ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ exponent ] ;
//! ```
//!
//! Whitespace is insignificant. `psi(·)` evaluates the problem's ψ, and
//! `mitlef(a, ·)` the one-parameter Mittag-Leffler function E_a.

use std::fmt;

use thiserror::Error;

use crate::psi::{PsiError, PsiFunction};
use crate::special::{mittag_leffler, SpecialError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {position}: {message}")]
pub struct ParseError {
    /// Character offset into the source, at most its length.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at offset {position}")]
    DivideByZero { position: usize },
    #[error(transparent)]
    Psi(#[from] PsiError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("pow: {base}^{exponent} is undefined")]
    Pow { base: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
    W,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::W => "w",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    /// Division remembers where the `/` appeared for error reporting.
    Div { position: usize },
}

// Positions are not part of the structure.
impl PartialEq for BinOp {
    fn eq(&self, other: &Self) -> bool {
        matches!(
            (self, other),
            (BinOp::Add, BinOp::Add)
                | (BinOp::Sub, BinOp::Sub)
                | (BinOp::Mul, BinOp::Mul)
                | (BinOp::Div { .. }, BinOp::Div { .. })
        )
    }
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div { .. } => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Abs(Box<Expr>),
    Psi(Box<Expr>),
    MitLef { alpha: f64, arg: Box<Expr> },
    Pow { base: Box<Expr>, exponent: f64 },
}

/// What `psi(·)` and `mitlef(·, ·)` resolve against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalEnv {
    pub psi: PsiFunction,
    pub ml_tol: f64,
}

impl Default for EvalEnv {
    fn default() -> Self {
        EvalEnv {
            psi: PsiFunction::Identity,
            ml_tol: 1e-15,
        }
    }
}

impl EvalEnv {
    pub fn new(psi: PsiFunction) -> Self {
        EvalEnv {
            psi,
            ..Default::default()
        }
    }
}

fn fmt_literal(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", fmt_literal(-v))
                } else {
                    write!(f, "{}", fmt_literal(*v))
                }
            }
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Psi(e) => write!(f, "psi({e})"),
            Expr::MitLef { alpha, arg } => write!(f, "mitlef({}, {arg})", fmt_literal(*alpha)),
            Expr::Pow { base, exponent } => write!(f, "pow({base}, {})", fmt_literal(*exponent)),
        }
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        parse(source)
    }

    pub fn references(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Abs(e) | Expr::Psi(e) => e.references(var),
            Expr::MitLef { arg, .. } => arg.references(var),
            Expr::Pow { base, .. } => base.references(var),
            Expr::Binary { lhs, rhs, .. } => lhs.references(var) || rhs.references(var),
        }
    }

    pub fn eval(&self, env: &EvalEnv, t: f64, x: f64, w: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::T) => t,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::W) => w,
            Expr::Neg(e) => -e.eval(env, t, x, w)?,
            Expr::Abs(e) => e.eval(env, t, x, w)?.abs(),
            Expr::Psi(e) => env.psi.eval(e.eval(env, t, x, w)?)?,
            Expr::MitLef { alpha, arg } => mittag_leffler(*alpha, arg.eval(env, t, x, w)?, env.ml_tol)?,
            Expr::Pow { base, exponent } => {
                let b = base.eval(env, t, x, w)?;
                let v = b.powf(*exponent);
                if v.is_nan() && !b.is_nan() {
                    return Err(EvalError::Pow {
                        base: b,
                        exponent: *exponent,
                    });
                }
                v
            }
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval(env, t, x, w)?;
                let b = rhs.eval(env, t, x, w)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div { position } => {
                        if b == 0.0 {
                            return Err(EvalError::DivideByZero { position: *position });
                        }
                        a / b
                    }
                }
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn err(position: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        position,
        message: message.into(),
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            c if c.is_ascii_digit() || c == '.' => {
                let digits = |i: &mut usize| {
                    let s = *i;
                    while *i < chars.len() && chars[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    *i - s
                };
                let mut n = digits(&mut i);
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    n += digits(&mut i);
                }
                if n == 0 {
                    return Err(err(start, "malformed number"));
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    let before = j;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j == before {
                        return Err(err(i, "exponent needs digits"));
                    }
                    i = j;
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| err(start, format!("malformed number '{text}'")))?;
                if !v.is_finite() {
                    return Err(err(start, format!("number '{text}' out of range")));
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            other => return Err(err(start, format!("unexpected character '{other}'"))),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(err(
                self.at(),
                format!("expected {what}, found {}", self.peek().describe()),
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div { position: self.at() },
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn literal(&mut self) -> Result<f64, ParseError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            (Tok::Num(v), _) => Ok(if negative { -v } else { v }),
            (tok, at) => Err(err(
                at,
                format!("expected a numeric literal, found {}", tok.describe()),
            )),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::Var(Var::T)),
                "x" => Ok(Expr::Var(Var::X)),
                "w" => Ok(Expr::Var(Var::W)),
                "abs" | "psi" => {
                    self.expect(Tok::LParen, &format!("'(' after {name}"))?;
                    let e = Box::new(self.expr()?);
                    self.expect(Tok::RParen, "')'")?;
                    Ok(if name == "abs" { Expr::Abs(e) } else { Expr::Psi(e) })
                }
                "mitlef" => {
                    self.expect(Tok::LParen, "'(' after mitlef")?;
                    let alpha = self.literal()?;
                    self.expect(Tok::Comma, "','")?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Expr::MitLef { alpha, arg })
                }
                "pow" => {
                    self.expect(Tok::LParen, "'(' after pow")?;
                    let base = Box::new(self.expr()?);
                    self.expect(Tok::Comma, "','")?;
                    let exponent = self.literal()?;
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Expr::Pow { base, exponent })
                }
                _ => Err(err(at, format!("unknown identifier '{name}'"))),
            },
            Tok::End => Err(err(at, "unexpected end of input")),
            other => Err(err(at, format!("unexpected {}", other.describe()))),
        }
    }
}

/// Parses an expression; see the module docs for the grammar.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(err(
            p.at(),
            format!("unexpected trailing {}", p.peek().describe()),
        ));
    }
    Ok(e)
}

/// Evaluates with identity ψ and the default Mittag-Leffler tolerance.
pub fn evaluate(e: &Expr, t: f64, x: f64, w: f64) -> Result<f64, EvalError> {
    e.eval(&EvalEnv::default(), t, x, w)
}
