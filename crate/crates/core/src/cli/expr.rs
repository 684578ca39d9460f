//! Boundary data as polynomials in `x`, `y`.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary ("*" unary)*
//! unary := ("+" | "-") unary | power
//! power := atom ("^" integer)?
//! atom  := number | "x" | "y" | "(" expr ")" | "re(" integer ")" | "im(" integer ")"
//! ```
//!
//! `re(k)` and `im(k)` are `Re z^k` and `Im z^k` with `z = x + iy`.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("boundary data at offset {pos}: {msg}")]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

const MAX_DEGREE: u32 = 64;

/// Polynomial `Σ c_{ij} x^i y^j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: f64, i: u32, j: u32) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert((i, j), c);
        }
        Poly { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    fn add(mut self, other: &Poly, sign: f64) -> Poly {
        for (&k, &c) in &other.terms {
            *self.terms.entry(k).or_insert(0.0) += sign * c;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (&(i, j), &a) in &self.terms {
            for (&(k, l), &b) in &other.terms {
                *out.terms.entry((i + k, j + l)).or_insert(0.0) += a * b;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(1.0), |acc, _| acc.mul(self))
    }

    pub fn laplacian(&self) -> Poly {
        let mut out = Poly::default();
        for (&(i, j), &c) in &self.terms {
            if i >= 2 {
                *out.terms.entry((i - 2, j)).or_insert(0.0) += c * (i * (i - 1)) as f64;
            }
            if j >= 2 {
                *out.terms.entry((i, j - 2)).or_insert(0.0) += c * (j * (j - 1)) as f64;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    /// Exact up to rounding relative to the largest coefficient.
    pub fn is_harmonic(&self) -> bool {
        let scale = self.terms.values().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
        self.laplacian().terms.values().all(|c| c.abs() <= 1e-12 * scale)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (&(i, j), c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            if i > 0 {
                write!(f, "*x^{i}")?;
            }
            if j > 0 {
                write!(f, "*y^{j}")?;
            }
        }
        Ok(())
    }
}

/// `Re z^k` and `Im z^k` by the binomial expansion of `(x + iy)^k`.
fn harmonic_pair(k: u32) -> (Poly, Poly) {
    let (mut re, mut im) = (Poly::default(), Poly::default());
    let mut binom = 1.0;
    for m in 0..=k {
        // i^m cycles 1, i, −1, −i
        let term = Poly::monomial(binom, k - m, m);
        match m % 4 {
            0 => re = re.add(&term, 1.0),
            1 => im = im.add(&term, 1.0),
            2 => re = re.add(&term, -1.0),
            _ => im = im.add(&term, -1.0),
        }
        binom = binom * (k - m) as f64 / (m + 1) as f64;
    }
    (re, im)
}

pub fn parse(text: &str) -> Result<Poly, ExprError> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = acc.add(&self.term()?, 1.0);
            } else if self.eat(b'-') {
                acc = acc.add(&self.term()?, -1.0);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly, ExprError> {
        let mut acc = self.unary()?;
        while self.eat(b'*') {
            acc = acc.mul(&self.unary()?);
            self.check_degree(&acc)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Poly, ExprError> {
        if self.eat(b'-') {
            return Ok(Poly::default().add(&self.unary()?, -1.0));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Poly, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let k = self.integer()?;
            let out = base.pow(k);
            self.check_degree(&out)?;
            return Ok(out);
        }
        Ok(base)
    }

    fn check_degree(&self, p: &Poly) -> Result<(), ExprError> {
        if p.degree() > MAX_DEGREE {
            return Err(self.err(&format!("degree exceeds {MAX_DEGREE}")));
        }
        Ok(())
    }

    fn integer(&mut self) -> Result<u32, ExprError> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        match digits.parse::<u32>() {
            Ok(k) if k <= MAX_DEGREE => Ok(k),
            Ok(_) => Err(self.err(&format!("exponent exceeds {MAX_DEGREE}"))),
            Err(_) => Err(ExprError { pos: start, msg: "expected a nonnegative integer".into() }),
        }
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        let start = self.pos;
        let s = self.s;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let before = self.pos;
            digits(&mut self.pos);
            if self.pos == before {
                self.pos = mark;
            }
        }
        std::str::from_utf8(&s[start..self.pos])
            .ok()
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or(ExprError { pos: start, msg: "malformed number".into() })
    }

    fn atom(&mut self) -> Result<Poly, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Poly::constant(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                match &self.s[start..self.pos] {
                    b"x" => Ok(Poly::monomial(1.0, 1, 0)),
                    b"y" => Ok(Poly::monomial(1.0, 0, 1)),
                    tag @ (b"re" | b"im") => {
                        let re = tag == b"re";
                        self.expect(b'(')?;
                        self.skip_ws();
                        let k = self.integer()?;
                        self.expect(b')')?;
                        let (r, i) = harmonic_pair(k);
                        Ok(if re { r } else { i })
                    }
                    _ => Err(ExprError { pos: start, msg: "unknown identifier (expected x, y, re, im)".into() }),
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}
