//! Parser for germ text: `f1 = <expr>; f2 = <expr>`.
//!
//! Expressions use `z`, `w`, `i`, integer, decimal and scientific literals,
//! `+ - * / ^` and parentheses.  Juxtaposition multiplies when the right
//! factor is a name or a parenthesis (`2z`, `3i`, `2(z + w)`).  Division is
//! only by constants; exponents are nonnegative integers.

use std::fmt;

use num_bigint::BigInt;
use parabolic_core::series::{gcd::POLY_TRUNC, Mode, Poly2, Rat, Scalar, C64, QC};
use parabolic_core::{Error, Germ2};

/// Highest total degree a literal germ may have.
pub const MAX_DEGREE: u32 = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct GermSource {
    pub text: String,
    /// `None`: the expressions are complete polynomials.
    pub trunc: Option<u32>,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source.
    pub pos: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
    pub message: Option<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = &self.message {
            return write!(f, "at offset {}: {m}", self.pos);
        }
        write!(
            f,
            "at offset {}: expected {}, found {}",
            self.pos,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug)]
pub enum GermError {
    Syntax(ParseError),
    Germ(Error),
}

impl fmt::Display for GermError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GermError::Syntax(e) => write!(f, "syntax error {e}"),
            GermError::Germ(e) => write!(f, "{e}"),
        }
    }
}

/// A parsed germ in the requested coefficient mode.
#[derive(Clone, Debug)]
pub enum ParsedGerm {
    Exact(Germ2<QC>),
    Float(Germ2<C64>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn show(&self) -> String {
        match self {
            Tok::Num(s) => format!("number '{s}'"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut k = 0;
    while k < b.len() {
        let c = b[k] as char;
        if c.is_ascii_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() || (c == '.' && k + 1 < b.len() && b[k + 1].is_ascii_digit()) {
            let start = k;
            while k < b.len() && (b[k].is_ascii_digit() || b[k] == b'.') {
                k += 1;
            }
            // exponent part: e or E, optional sign, digits
            if k < b.len() && (b[k] == b'e' || b[k] == b'E') {
                let mut j = k + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    while j < b.len() && b[j].is_ascii_digit() {
                        j += 1;
                    }
                    k = j;
                }
            }
            out.push((start, Tok::Num(src[start..k].to_string())));
        } else if c.is_ascii_alphabetic() {
            let start = k;
            while k < b.len() && (b[k].is_ascii_alphanumeric() || b[k] == b'_') {
                k += 1;
            }
            out.push((start, Tok::Ident(src[start..k].to_string())));
        } else if "+-*/^()=;".contains(c) {
            out.push((k, Tok::Sym(c)));
            k += 1;
        } else if c == '\u{2212}' || !c.is_ascii() {
            // the Unicode minus is common in pasted formulas
            let ch = src[k..].chars().next().unwrap();
            if ch == '\u{2212}' {
                out.push((k, Tok::Sym('-')));
                k += ch.len_utf8();
            } else {
                return Err(ParseError {
                    pos: k,
                    expected: vec![],
                    found: format!("'{ch}'"),
                    message: Some(format!("unexpected character '{ch}'")),
                });
            }
        } else {
            return Err(ParseError {
                pos: k,
                expected: vec![],
                found: format!("'{c}'"),
                message: Some(format!("unexpected character '{c}'")),
            });
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

/// Exact value of a decimal literal.
fn literal_rat(s: &str) -> Option<Rat> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(p) => (&s[..p], s[p + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = match mant.find('.') {
        Some(p) => (&mant[..p], &mant[p + 1..]),
        None => (mant, ""),
    };
    if frac.contains('.') {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = if digits.is_empty() {
        return None;
    } else {
        digits.parse().ok()?
    };
    let e = exp - frac.len() as i64;
    if e.unsigned_abs() > 4096 {
        return None;
    }
    let ten = BigInt::from(10);
    let p = num_traits::pow(ten, e.unsigned_abs() as usize);
    Some(if e >= 0 {
        Rat::from_integer(num * p)
    } else {
        Rat::new(num, p)
    })
}

struct Parser<'a, S> {
    toks: &'a [(usize, Tok)],
    k: usize,
    trunc: u32,
    _m: std::marker::PhantomData<S>,
}

type PResult<T> = Result<T, ParseError>;

impl<S: Scalar> Parser<'_, S> {
    fn peek(&self) -> &Tok {
        &self.toks[self.k].1
    }

    fn pos(&self) -> usize {
        self.toks[self.k].0
    }

    fn fail<T>(&self, expected: Vec<&'static str>) -> PResult<T> {
        Err(ParseError {
            pos: self.pos(),
            expected,
            found: self.peek().show(),
            message: None,
        })
    }

    fn fail_msg<T>(&self, pos: usize, msg: String) -> PResult<T> {
        Err(ParseError {
            pos,
            expected: vec![],
            found: String::new(),
            message: Some(msg),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.k += 1;
            true
        } else {
            false
        }
    }

    fn source(&mut self) -> PResult<(Poly2<S>, Poly2<S>)> {
        let mut f1 = None;
        let mut f2 = None;
        loop {
            let at = self.pos();
            let name = match self.peek() {
                Tok::Ident(s) if s == "f1" || s == "f2" => s.clone(),
                _ => return self.fail(vec!["'f1'", "'f2'"]),
            };
            self.k += 1;
            if !self.eat('=') {
                return self.fail(vec!["'='"]);
            }
            let e = self.expr()?;
            let slot = if name == "f1" { &mut f1 } else { &mut f2 };
            if slot.is_some() {
                return self.fail_msg(at, format!("{name} is defined twice"));
            }
            *slot = Some(e);
            let more = self.eat(';');
            if *self.peek() == Tok::End {
                break;
            }
            if !more {
                return self.fail(vec!["';'", "an operator"]);
            }
        }
        match (f1, f2) {
            (Some(a), Some(b)) => Ok((a, b)),
            (None, _) => self.fail_msg(self.pos(), "f1 is missing".into()),
            (_, None) => self.fail_msg(self.pos(), "f2 is missing".into()),
        }
    }

    fn expr(&mut self) -> PResult<Poly2<S>> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> PResult<Poly2<S>> {
        let mut acc = self.unary()?;
        loop {
            let at = self.pos();
            if self.eat('*') {
                let rhs = self.unary()?;
                acc = self.product(&acc, &rhs, at)?;
            } else if self.eat('/') {
                let rhs = self.unary()?;
                if rhs.degree().unwrap_or(0) > 0 {
                    return self.fail_msg(at, "division by a non-constant expression".into());
                }
                let Some(inv) = rhs.constant_term().inv() else {
                    return self.fail_msg(at, "division by zero".into());
                };
                acc = acc.scale(&inv);
            } else if matches!(self.peek(), Tok::Ident(_) | Tok::Sym('(')) {
                let rhs = self.power()?;
                acc = self.product(&acc, &rhs, at)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&self, a: &Poly2<S>, b: &Poly2<S>, at: usize) -> PResult<Poly2<S>> {
        let d = a.degree().unwrap_or(0) + b.degree().unwrap_or(0);
        if d > MAX_DEGREE {
            return self.fail_msg(at, format!("degree {d} exceeds the limit {MAX_DEGREE}"));
        }
        Ok(a.mul(b))
    }

    fn unary(&mut self) -> PResult<Poly2<S>> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Poly2<S>> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let at = self.pos();
        let e: u32 = match self.peek() {
            Tok::Num(s) => match s.parse() {
                Ok(e) => e,
                Err(_) => return self.fail_msg(at, format!("exponent '{s}' is not a nonnegative integer")),
            },
            Tok::Sym('(') => return self.fail_msg(at, "exponents must be integer literals".into()),
            _ => return self.fail(vec!["an integer exponent"]),
        };
        self.k += 1;
        let d = base.degree().unwrap_or(0) as u64 * e as u64;
        if d > MAX_DEGREE as u64 {
            return self.fail_msg(at, format!("degree {d} exceeds the limit {MAX_DEGREE}"));
        }
        let mut acc = Poly2::one(self.trunc);
        for _ in 0..e {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    fn primary(&mut self) -> PResult<Poly2<S>> {
        let at = self.pos();
        let t = self.trunc;
        let out = match self.peek().clone() {
            Tok::Num(s) => {
                let c = match S::MODE {
                    Mode::Exact => literal_rat(&s).map(|q| S::from_rat(&q)),
                    Mode::Float => s.parse::<f64>().ok().and_then(|x| S::from_c64(C64::new(x, 0.0))),
                };
                match c {
                    Some(c) => Poly2::constant(c, t),
                    None => return self.fail_msg(at, format!("malformed number '{s}'")),
                }
            }
            Tok::Ident(s) => match s.as_str() {
                "z" => Poly2::z(t),
                "w" => Poly2::w(t),
                "i" => Poly2::constant(S::imag_unit(), t),
                _ => return self.fail(vec!["'z'", "'w'", "'i'", "a number", "'('"]),
            },
            Tok::Sym('(') => {
                self.k += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.fail(vec!["')'"]);
                }
                return Ok(e);
            }
            _ => return self.fail(vec!["'z'", "'w'", "'i'", "a number", "'('"]),
        };
        self.k += 1;
        Ok(out)
    }
}

fn parse_pair<S: Scalar>(src: &GermSource) -> Result<(Poly2<S>, Poly2<S>), GermError> {
    let toks = lex(&src.text).map_err(GermError::Syntax)?;
    let mut p = Parser::<S> {
        toks: &toks,
        k: 0,
        trunc: src.trunc.unwrap_or(POLY_TRUNC),
        _m: std::marker::PhantomData,
    };
    p.source().map_err(GermError::Syntax)
}

fn build<S: Scalar>(src: &GermSource) -> Result<Germ2<S>, GermError> {
    let (f1, f2) = parse_pair::<S>(src)?;
    match src.trunc {
        None => Germ2::polynomial(f1, f2),
        Some(n) => Germ2::new(f1.truncate(n), f2.truncate(n)),
    }
    .map_err(GermError::Germ)
}

pub fn parse_germ(src: &GermSource) -> Result<ParsedGerm, GermError> {
    Ok(match src.mode {
        Mode::Exact => ParsedGerm::Exact(build::<QC>(src)?),
        Mode::Float => ParsedGerm::Float(build::<C64>(src)?),
    })
}

/// Germ text that parses back to the same pair of polynomials.
pub fn print_germ<S: Scalar>(g: &Germ2<S>) -> String {
    format!("f1 = {}; f2 = {}", g.f1.to_expr(), g.f2.to_expr())
}

/// `[a:b]` with `a`, `b` constant expressions; `[1:c]` and `[0:1]`
/// normalizations follow.
pub fn parse_direction<S: Scalar>(text: &str) -> Result<parabolic_core::Proj<S>, GermError> {
    let t = text.trim();
    let bad = |m: &str| {
        GermError::Syntax(ParseError {
            pos: 0,
            expected: vec!["'[a:b]'"],
            found: format!("'{t}'"),
            message: Some(m.to_string()),
        })
    };
    let inner = t
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| bad("a direction is written [a:b]"))?;
    let (a, b) = inner
        .split_once(':')
        .ok_or_else(|| bad("a direction is written [a:b]"))?;
    let constant = |e: &str| -> Result<S, GermError> {
        let toks = lex(e).map_err(GermError::Syntax)?;
        let mut p = Parser::<S> {
            toks: &toks,
            k: 0,
            trunc: POLY_TRUNC,
            _m: std::marker::PhantomData,
        };
        let v = p.expr().map_err(GermError::Syntax)?;
        if *p.peek() != Tok::End || v.degree().unwrap_or(0) > 0 {
            return Err(bad("direction coordinates must be constants"));
        }
        Ok(v.constant_term())
    };
    let (a, b) = (constant(a)?, constant(b)?);
    parabolic_core::Proj::from_coords(&a, &b).ok_or_else(|| bad("[0:0] is not a direction"))
}
