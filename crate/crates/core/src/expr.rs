//! Expression language for complex rational functions of `z`.
//!
//! Grammar (precedence climbing, low to high: `+ -`, `* /`, unary `-`, `^`):
//!
//! ```text
//! form  := sum
//! sum   := prod (('+' | '-') prod)*
//! prod  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' uint)?
//! atom  := number | 'i' | 'z' | '(' sum ')'
//! ```
//!
//! Numbers are decimals with an optional exponent; `3i` and `3*i` both
//! denote the same imaginary literal. Exponents are nonnegative integers.

use num_complex::Complex64;
use thiserror::Error;

use crate::rational::{Polynomial, RationalError, RationalForm};

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("number at offset {offset} does not fit a finite f64")]
    NumberOverflow { offset: usize },
    #[error("exponent at offset {offset} must be a nonnegative integer <= {max}")]
    BadExponent { offset: usize, max: u32 },
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Rational(#[from] RationalError),
}

/// Parsed syntax tree. Parentheses disappear during parsing.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Literal(Complex64),
    Z,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

const MAX_EXPONENT: u32 = 64;

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Number(f64),
    /// A number with a directly attached `i`, e.g. `3i`.
    Imaginary(f64),
    ImagUnit,
    Z,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number(_) => "number".into(),
            Tok::Imaginary(_) => "imaginary number".into(),
            Tok::ImagUnit => "`i`".into(),
            Tok::Z => "`z`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let start = lx.pos;
            if lx.pos >= lx.src.len() {
                out.push((Tok::Eof, start));
                return Ok(out);
            }
            let tok = lx.next_token(start)?;
            out.push((tok, start));
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_token(&mut self, start: usize) -> Result<Tok, ExprError> {
        let b = self.src[self.pos];
        let simple = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'z' => Some(Tok::Z),
            b'i' => Some(Tok::ImagUnit),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok(t);
        }
        if b.is_ascii_digit() || b == b'.' {
            return self.lex_number(start);
        }
        Err(ExprError::Syntax {
            offset: start,
            expected: "number, `i`, `z`, operator, or parenthesis".into(),
            found: format!("`{}`", self.src[start] as char),
        })
    }

    fn lex_number(&mut self, start: usize) -> Result<Tok, ExprError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        // Exponent part, only when actually followed by digits.
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mut probe = self.pos + 1;
            if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: "number".into(),
            found: format!("`{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ExprError::NumberOverflow { offset: start });
        }
        // `3i` is an imaginary literal when the `i` is directly attached.
        if self.pos < self.src.len() && self.src[self.pos] == b'i' {
            self.pos += 1;
            return Ok(Tok::Imaginary(value));
        }
        Ok(Tok::Number(value))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.prod()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.prod()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.prod()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn prod(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !matches!(self.peek(), Tok::Caret) {
            return Ok(base);
        }
        self.bump();
        let off = self.offset();
        match self.bump() {
            Tok::Number(x) => {
                if x < 0.0 || x.fract() != 0.0 || x > MAX_EXPONENT as f64 {
                    return Err(ExprError::BadExponent {
                        offset: off,
                        max: MAX_EXPONENT,
                    });
                }
                Ok(Expr::Pow(Box::new(base), x as u32))
            }
            other => Err(ExprError::Syntax {
                offset: off,
                expected: "nonnegative integer exponent".into(),
                found: other.describe(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Number(x) => {
                self.bump();
                Ok(Expr::Literal(Complex64::new(x, 0.0)))
            }
            Tok::Imaginary(x) => {
                self.bump();
                Ok(Expr::Literal(Complex64::new(0.0, x)))
            }
            Tok::ImagUnit => {
                self.bump();
                Ok(Expr::Literal(Complex64::new(0.0, 1.0)))
            }
            Tok::Z => {
                self.bump();
                Ok(Expr::Z)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.sum()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(self.error("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error("number, `i`, `z`, or `(`")),
        }
    }
}

/// Parses `src` into a syntax tree without evaluating it.
pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    if src.trim().is_empty() {
        return Err(ExprError::Empty);
    }
    let toks = Lexer::tokenize(src)?;
    let mut parser = Parser { toks, pos: 0 };
    let expr = parser.sum()?;
    if !matches!(parser.peek(), Tok::Eof) {
        return Err(parser.error("operator or end of input"));
    }
    Ok(expr)
}

/// Parses and evaluates `src` into a normalized rational function.
pub fn parse_form(src: &str) -> Result<RationalForm, ExprError> {
    let expr = parse_expr(src)?;
    Ok(eval(&expr)?)
}

fn eval(expr: &Expr) -> Result<RationalForm, RationalError> {
    match expr {
        Expr::Literal(c) => Ok(RationalForm::constant(*c)),
        Expr::Z => Ok(RationalForm::from_poly(Polynomial::new(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]))),
        Expr::Neg(e) => Ok(eval(e)?.neg()),
        Expr::Add(a, b) => eval(a)?.add(&eval(b)?),
        Expr::Sub(a, b) => eval(a)?.sub(&eval(b)?),
        Expr::Mul(a, b) => eval(a)?.mul(&eval(b)?),
        Expr::Div(a, b) => eval(a)?.div(&eval(b)?),
        Expr::Pow(e, k) => eval(e)?.pow(*k),
    }
}

/// Parses a complex constant such as `i`, `-1.5+0.3i` or `2e-3`.
///
/// Any expression is accepted as long as it evaluates to a constant; `z` in
/// the input is an error.
pub fn parse_complex(src: &str) -> Result<Complex64, ExprError> {
    let form = parse_form(src)?;
    if form.numerator().degree() > 0 || form.denominator().degree() > 0 {
        return Err(ExprError::Syntax {
            offset: 0,
            expected: "constant expression".into(),
            found: "expression involving `z`".into(),
        });
    }
    Ok(form.eval(Complex64::new(0.0, 0.0)))
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

/// Canonical text form; `parse_form(print_form(f))` recovers `f` exactly
/// because coefficients are printed with round-trip precision.
pub fn print_form(f: &RationalForm) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    let num = print_poly(f.numerator());
    if f.denominator().degree() == 0 {
        // After normalization a constant denominator is exactly 1.
        return num;
    }
    format!("({})/({})", num, print_poly(f.denominator()))
}

fn print_poly(p: &Polynomial) -> String {
    let mut out = String::new();
    let mut first = true;
    for deg in (0..=p.degree()).rev() {
        let c = p.coeffs()[deg];
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let (negative, body) = term_body(c, deg);
        if first {
            if negative == Some(true) {
                out.push('-');
            }
            out.push_str(&body);
            first = false;
        } else {
            match negative {
                Some(true) => out.push_str(" - "),
                _ => out.push_str(" + "),
            }
            out.push_str(&body);
        }
    }
    if first {
        out.push('0');
    }
    out
}

/// Returns `(Some(is_negative), body)` for coefficients whose sign can be
/// pulled into the separator, or `(None, "(a+b*i)...")` for mixed ones.
fn term_body(c: Complex64, deg: usize) -> (Option<bool>, String) {
    let var = match deg {
        0 => String::new(),
        1 => "z".to_string(),
        d => format!("z^{d}"),
    };
    let attach = |coeff: String| {
        if var.is_empty() {
            coeff
        } else if coeff.is_empty() {
            var.clone()
        } else {
            format!("{coeff}*{var}")
        }
    };
    if c.im == 0.0 {
        let mag = c.re.abs();
        let coeff = if mag == 1.0 && deg > 0 {
            String::new()
        } else {
            fmt_f64(mag)
        };
        (Some(c.re < 0.0), attach(coeff))
    } else if c.re == 0.0 {
        let mag = c.im.abs();
        let coeff = if mag == 1.0 {
            "i".to_string()
        } else {
            format!("{}*i", fmt_f64(mag))
        };
        (Some(c.im < 0.0), attach(coeff))
    } else {
        let im_part = if c.im.abs() == 1.0 {
            "i".to_string()
        } else {
            format!("{}*i", fmt_f64(c.im.abs()))
        };
        let inner = format!(
            "{}{}{}",
            fmt_f64(c.re),
            if c.im < 0.0 { "-" } else { "+" },
            im_part
        );
        (None, attach(format!("({inner})")))
    }
}

/// Shortest representation that parses back to the same f64.
fn fmt_f64(x: f64) -> String {
    format!("{x}")
}
