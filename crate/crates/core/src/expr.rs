//! Restricted arithmetic expressions for scenario files.
//!
//! Grammar: `+ - * /`, unary minus, `min(a,b)`, `max(a,b)`, `abs(a)`,
//! `pow(a,b)`, numeric literals, and coordinates `x1..x3`. This is the whole
//! surface; anything else is a parse error.

use crate::error::{Error, Result};
use crate::space::VecN;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input at token {} in '{src}'",
                p.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &VecN) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Min(a, b) => a.eval(x).min(b.eval(x)),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
            Expr::Abs(a) => a.eval(x).abs(),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Coord(usize),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] == b'-'
                            || bytes[i + 1] == b'+')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number '{text}' in '{src}'")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric()) {
                    i += 1;
                }
                let name = &src[start..i];
                match name {
                    "x1" => out.push(Tok::Coord(0)),
                    "x2" => out.push(Tok::Coord(1)),
                    "x3" => out.push(Tok::Coord(2)),
                    "min" | "max" | "abs" | "pow" => out.push(Tok::Ident(name.to_string())),
                    _ => {
                        return Err(Error::Parse(format!(
                            "unknown identifier '{name}' in '{src}'"
                        )))
                    }
                }
            }
            _ => return Err(Error::Parse(format!("unexpected character '{c}' in '{src}'"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            other => Err(Error::Parse(format!(
                "expected {t:?}, got {other:?} in '{}'",
                self.src
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::Coord(i)) => Ok(Expr::Coord(i)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.expect(Tok::LParen)?;
                let a = self.expr()?;
                let e = match name.as_str() {
                    "abs" => Expr::Abs(Box::new(a)),
                    _ => {
                        self.expect(Tok::Comma)?;
                        let b = self.expr()?;
                        match name.as_str() {
                            "min" => Expr::Min(Box::new(a), Box::new(b)),
                            "max" => Expr::Max(Box::new(a), Box::new(b)),
                            "pow" => Expr::Pow(Box::new(a), Box::new(b)),
                            _ => unreachable!(),
                        }
                    }
                };
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(Error::Parse(format!(
                "unexpected token {other:?} in '{}'",
                self.src
            ))),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Coord(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
            Expr::Abs(a) => write!(f, "abs({a})"),
            Expr::Pow(a, b) => write!(f, "pow({a}, {b})"),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Expr::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(&VecN::from_slice(x))
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("-x1 + 4 / 2", &[3.0]), -1.0);
    }

    #[test]
    fn functions() {
        assert_eq!(ev("min(x1, 1)", &[2.5]), 1.0);
        assert_eq!(ev("max(abs(x1), x2)", &[-3.0, 1.0]), 3.0);
        assert_eq!(ev("pow(abs(x1), 0.5)", &[4.0]), 2.0);
        assert_eq!(ev("1 + min(x1*x1 + x2*x2, 1)", &[0.5, 0.5]), 1.5);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Expr::parse("sin(x1)").is_err());
        assert!(Expr::parse("x4 + 1").is_err());
        assert!(Expr::parse("1 +").is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let e = Expr::parse("1 + min(x1*x1, 2)").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        let back: Expr = serde_json::from_str(&json).unwrap();
        assert_eq!(back.eval(&VecN::new2(0.7, 0.0)), e.eval(&VecN::new2(0.7, 0.0)));
    }
}
