//! Arithmetic expression DSL.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?
//! primary := number | "pi" | "e" | xK | yK | func "(" expr ("," expr)* ")" | "(" expr ")"
//! func    := sin | cos | exp | log | sqrt | pow
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-x1^2`
//! is `-(x1^2)` and `2^3^2` is `2^(3^2)`. `pow(a, b)` is the same node as `a^b`.

use std::fmt;

use super::jet::Jet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    /// Base coordinate `x{i+1}`.
    X(usize),
    /// Fiber coordinate `y{a+1}`.
    Y(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprAst {
    Literal(f64),
    Var(Var),
    Const(Constant),
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(b) = self.peek() else {
            return Ok((Tok::End, start));
        };
        if b.is_ascii_digit() || b == b'.' {
            return self.number(start);
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        if b"+-*/^(),".contains(&b) {
            self.pos += 1;
            return Ok((Tok::Op(b as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(Error::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let bytes = self.src.as_bytes();
        let digits = |lx: &mut Lexer| {
            let s = lx.pos;
            while matches!(lx.peek(), Some(c) if c.is_ascii_digit()) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mut k = self.pos + 1;
            if matches!(bytes.get(k), Some(b'+' | b'-')) {
                k += 1;
            }
            if matches!(bytes.get(k), Some(c) if c.is_ascii_digit()) {
                self.pos = k;
                digits(self);
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    m: usize,
    r: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<ExprAst> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(ExprAst::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(ExprAst::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<ExprAst> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(ExprAst::Literal(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, off),
            Tok::End => Err(Error::Syntax {
                offset: off,
                message: "unexpected end of input".into(),
            }),
            Tok::Op(c) => Err(Error::Syntax {
                offset: off,
                message: format!("unexpected `{c}`"),
            }),
        }
    }

    fn ident(&mut self, name: String, off: usize) -> Result<ExprAst> {
        let func = match name.as_str() {
            "pi" => return Ok(ExprAst::Const(Constant::Pi)),
            "e" => return Ok(ExprAst::Const(Constant::E)),
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            "sqrt" => Some(UnaryOp::Sqrt),
            "pow" => None,
            _ => return self.variable(name, off),
        };
        if *self.peek() != Tok::Op('(') {
            return Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected `(` after `{name}`"),
            });
        }
        self.bump();
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Op(',') {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let expected = if func.is_some() { 1 } else { 2 };
        if args.len() != expected {
            return Err(Error::Arity {
                name,
                offset: off,
                expected,
                got: args.len(),
            });
        }
        let mut args = args.into_iter();
        let a = Box::new(args.next().unwrap());
        Ok(match func {
            Some(op) => ExprAst::Unary(op, a),
            None => ExprAst::Binary(BinaryOp::Pow, a, Box::new(args.next().unwrap())),
        })
    }

    fn variable(&self, name: String, off: usize) -> Result<ExprAst> {
        let unknown = || Error::UnknownIdentifier {
            name: name.clone(),
            offset: off,
        };
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0')
        {
            return Err(unknown());
        }
        let k: usize = digits.parse().map_err(|_| unknown())?;
        match kind {
            "x" if k <= self.m => Ok(ExprAst::Var(Var::X(k - 1))),
            "y" if k <= self.r => Ok(ExprAst::Var(Var::Y(k - 1))),
            _ => Err(unknown()),
        }
    }
}

/// Parses `src` with base variables `x1..xm` and fiber variables `y1..yr`.
pub fn parse_expression(src: &str, m: usize, r: usize) -> Result<ExprAst> {
    if src.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, i: 0, m, r };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            offset: p.offset(),
            message: "unexpected trailing input".into(),
        });
    }
    Ok(e)
}

fn prec(e: &ExprAst) -> u8 {
    match e {
        ExprAst::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        ExprAst::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        ExprAst::Unary(UnaryOp::Neg, _) => 3,
        ExprAst::Binary(BinaryOp::Pow, ..) => 4,
        ExprAst::Literal(v) if *v < 0.0 || v.is_sign_negative() => 3,
        _ => 5,
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, e: &ExprAst, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Literal(v) => write!(f, "{v:?}"),
            ExprAst::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            ExprAst::Var(Var::Y(a)) => write!(f, "y{}", a + 1),
            ExprAst::Const(Constant::Pi) => write!(f, "pi"),
            ExprAst::Const(Constant::E) => write!(f, "e"),
            ExprAst::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                wrap(f, a, prec(a) < 3)
            }
            ExprAst::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Log => "log",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            ExprAst::Binary(BinaryOp::Pow, a, b) => {
                wrap(f, a, prec(a) <= 4)?;
                write!(f, "^")?;
                wrap(f, b, prec(b) < 3)
            }
            ExprAst::Binary(op, a, b) => {
                let (p, s) = match op {
                    BinaryOp::Add => (1, " + "),
                    BinaryOp::Sub => (1, " - "),
                    BinaryOp::Mul => (2, "*"),
                    BinaryOp::Div => (2, "/"),
                    BinaryOp::Pow => unreachable!(),
                };
                wrap(f, a, prec(a) < p)?;
                write!(f, "{s}")?;
                wrap(f, b, prec(b) <= p)
            }
        }
    }
}

fn domain(node: &ExprAst, detail: impl Into<String>) -> Error {
    Error::Domain {
        node: node.to_string(),
        detail: detail.into(),
    }
}

/// Integer power by repeated squaring, matching [`Jet::powi`] bit for bit.
pub(crate) fn powi_f64(x: f64, n: u32) -> f64 {
    let mut result = 1.0;
    let mut base = x;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        e >>= 1;
        if e > 0 {
            base *= base;
        }
    }
    result
}

fn small_int(c: f64) -> Option<i32> {
    (c.fract() == 0.0 && c.abs() <= 1024.0).then_some(c as i32)
}

impl ExprAst {
    /// Largest 1-based `(x, y)` variable indices referenced.
    pub fn max_vars(&self) -> (usize, usize) {
        match self {
            ExprAst::Var(Var::X(i)) => (i + 1, 0),
            ExprAst::Var(Var::Y(a)) => (0, a + 1),
            ExprAst::Unary(_, a) => a.max_vars(),
            ExprAst::Binary(_, a, b) => {
                let (p, q) = (a.max_vars(), b.max_vars());
                (p.0.max(q.0), p.1.max(q.1))
            }
            _ => (0, 0),
        }
    }

    /// Evaluates over plain reals; `vals` is `[x1..xm, y1..yr]`.
    pub fn eval_f64(&self, m: usize, vals: &[f64]) -> Result<f64> {
        Ok(match self {
            ExprAst::Literal(v) => *v,
            ExprAst::Var(Var::X(i)) => vals[*i],
            ExprAst::Var(Var::Y(a)) => vals[m + a],
            ExprAst::Const(Constant::Pi) => std::f64::consts::PI,
            ExprAst::Const(Constant::E) => std::f64::consts::E,
            ExprAst::Unary(op, a) => {
                let u = a.eval_f64(m, vals)?;
                match op {
                    UnaryOp::Neg => -u,
                    UnaryOp::Sin => u.sin(),
                    UnaryOp::Cos => u.cos(),
                    UnaryOp::Exp => u.exp(),
                    UnaryOp::Log if u <= 0.0 => return Err(domain(self, format!("log of {u}"))),
                    UnaryOp::Log => u.ln(),
                    UnaryOp::Sqrt if u < 0.0 => return Err(domain(self, format!("sqrt of {u}"))),
                    UnaryOp::Sqrt => u.sqrt(),
                }
            }
            ExprAst::Binary(op, a, b) => {
                let u = a.eval_f64(m, vals)?;
                let v = b.eval_f64(m, vals)?;
                match op {
                    BinaryOp::Add => u + v,
                    BinaryOp::Sub => u - v,
                    BinaryOp::Mul => u * v,
                    BinaryOp::Div if v == 0.0 => return Err(domain(self, "division by zero")),
                    BinaryOp::Div => u / v,
                    BinaryOp::Pow => match small_int(v) {
                        Some(n) if n >= 0 => powi_f64(u, n as u32),
                        Some(_) if u == 0.0 => {
                            return Err(domain(self, "negative power of zero"))
                        }
                        Some(n) => 1.0 / powi_f64(u, n.unsigned_abs()),
                        None if u < 0.0 => {
                            return Err(domain(self, format!("non-integer power of {u}")))
                        }
                        None if v == 0.5 => u.sqrt(),
                        None => u.powf(v),
                    },
                }
            }
        })
    }

    /// Evaluates over jets; all inputs must share one seed set.
    pub fn eval_jet(&self, m: usize, vals: &[Jet]) -> Result<Jet> {
        let space = vals
            .first()
            .map(|j| j.space().clone())
            .unwrap_or_else(|| Jet::real(0.0).space().clone());
        Ok(match self {
            ExprAst::Literal(v) => Jet::constant(&space, *v),
            ExprAst::Var(Var::X(i)) => vals[*i].clone(),
            ExprAst::Var(Var::Y(a)) => vals[m + a].clone(),
            ExprAst::Const(Constant::Pi) => Jet::constant(&space, std::f64::consts::PI),
            ExprAst::Const(Constant::E) => Jet::constant(&space, std::f64::consts::E),
            ExprAst::Unary(op, a) => {
                let u = a.eval_jet(m, vals)?;
                let v = u.value();
                match op {
                    UnaryOp::Neg => -u,
                    UnaryOp::Sin => u.sin(),
                    UnaryOp::Cos => u.cos(),
                    UnaryOp::Exp => u.exp(),
                    UnaryOp::Log if v <= 0.0 => return Err(domain(self, format!("log of {v}"))),
                    UnaryOp::Log => u.ln(),
                    UnaryOp::Sqrt if v < 0.0 || (v == 0.0 && u.order() > 0) => {
                        return Err(domain(self, format!("sqrt of {v}")))
                    }
                    UnaryOp::Sqrt => u.sqrt(),
                }
            }
            ExprAst::Binary(op, a, b) => {
                let u = a.eval_jet(m, vals)?;
                let w = b.eval_jet(m, vals)?;
                match op {
                    BinaryOp::Add => u + w,
                    BinaryOp::Sub => u - w,
                    BinaryOp::Mul => u * w,
                    BinaryOp::Div if w.value() == 0.0 => {
                        return Err(domain(self, "division by zero"))
                    }
                    BinaryOp::Div => u / w,
                    BinaryOp::Pow => self.pow_jet(&u, &w)?,
                }
            }
        })
    }

    fn pow_jet(&self, u: &Jet, w: &Jet) -> Result<Jet> {
        let base = u.value();
        if w.is_constant() {
            let c = w.value();
            return match small_int(c) {
                Some(n) if n >= 0 => Ok(u.powi(n as u32)),
                Some(_) if base == 0.0 => Err(domain(self, "negative power of zero")),
                Some(n) => {
                    let p = u.powi(n.unsigned_abs());
                    Ok(&Jet::constant(u.space(), 1.0) / &p)
                }
                None if base < 0.0 || (base == 0.0 && u.order() > 0) => {
                    Err(domain(self, format!("non-integer power of {base}")))
                }
                None => Ok(u.powf(c)),
            };
        }
        if base <= 0.0 {
            return Err(domain(self, format!("variable exponent on base {base}")));
        }
        Ok((w * &u.ln()).exp())
    }
}
