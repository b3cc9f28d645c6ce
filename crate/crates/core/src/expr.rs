//! Closed-form expressions in one variable `t`.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | 't' | '(' expr ')'
//!          | ('log' | 'exp' | 'sqrt') ('(' expr ')' | power)
//!          | ('max' | 'min') '(' expr ',' expr ')'
//! ```
//!
//! A function name followed by something other than `(` applies to the next
//! power expression, so `log t^2` is `log(t^2)` and `t/(log t)^2` reads as
//! expected.

use std::fmt;

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Num(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Log(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse_expression(text)
    }

    /// Evaluates at `t`. Domain violations surface as NaN or infinities.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Var => t,
            Expr::Num(v) => *v,
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, b) => pow(a.eval(t), b.eval(t)),
            Expr::Log(a) => a.eval(t).ln(),
            Expr::Exp(a) => a.eval(t).exp(),
            Expr::Sqrt(a) => a.eval(t).sqrt(),
            Expr::Max(a, b) => a.eval(t).max(b.eval(t)),
            Expr::Min(a, b) => a.eval(t).min(b.eval(t)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Var => f.write_str("t")?,
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_at(f, 3)?;
            }
            Expr::Add(a, b) => binary(f, a, " + ", b, 1, 2)?,
            Expr::Sub(a, b) => binary(f, a, " - ", b, 1, 2)?,
            Expr::Mul(a, b) => binary(f, a, " * ", b, 2, 3)?,
            Expr::Div(a, b) => binary(f, a, " / ", b, 2, 3)?,
            Expr::Pow(a, b) => binary(f, a, "^", b, 5, 3)?,
            Expr::Log(a) => call(f, "log", &[a])?,
            Expr::Exp(a) => call(f, "exp", &[a])?,
            Expr::Sqrt(a) => call(f, "sqrt", &[a])?,
            Expr::Max(a, b) => call(f, "max", &[a, b])?,
            Expr::Min(a, b) => call(f, "min", &[a, b])?,
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= 64.0 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

fn binary(
    f: &mut fmt::Formatter<'_>,
    a: &Expr,
    op: &str,
    b: &Expr,
    left: u8,
    right: u8,
) -> fmt::Result {
    a.write_at(f, left)?;
    f.write_str(op)?;
    b.write_at(f, right)
}

fn call(f: &mut fmt::Formatter<'_>, name: &str, args: &[&Expr]) -> fmt::Result {
    f.write_str(name)?;
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        a.write_at(f, 0)?;
    }
    f.write_str(")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&mut self, expected: &[&str]) -> ParseError {
        self.skip_ws();
        let found = match self.src.get(self.pos) {
            None => "end of input".to_string(),
            Some(c) => format!("'{}'", *c as char),
        };
        ParseError {
            offset: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let want = format!("'{}'", c as char);
            Err(self.error(&[want.as_str()]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        const START: &[&str] = &["number", "'t'", "'('", "'-'", "function"];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "t" => Ok(Expr::Var),
                    "log" | "ln" => Ok(Expr::Log(Box::new(self.unary_arg()?))),
                    "exp" => Ok(Expr::Exp(Box::new(self.unary_arg()?))),
                    "sqrt" => Ok(Expr::Sqrt(Box::new(self.unary_arg()?))),
                    "max" | "min" => {
                        self.expect(b'(')?;
                        let a = self.expr()?;
                        self.expect(b',')?;
                        let b = self.expr()?;
                        self.expect(b')')?;
                        let (a, b) = (Box::new(a), Box::new(b));
                        Ok(if name == "max" { Expr::Max(a, b) } else { Expr::Min(a, b) })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(START))
                    }
                }
            }
            _ => Err(self.error(START)),
        }
    }

    fn unary_arg(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            Ok(e)
        } else {
            self.power()
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.error(&["digit"]));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => {
                self.pos = start;
                Err(self.error(&["finite number"]))
            }
        }
    }
}
