//! A small infix syntax for polynomials, e.g. `(n^2+n)*e1 - 2*h1*n*[1,-1]`.
//!
//! Variables: `n`, `h1`, `h2`, … when `L = 1`; `n1…nL` and `h1_1…` (block
//! `j`, coordinate `r`) otherwise. `e1…ed` are standard basis vectors and
//! `[a,b,…]` is a literal rational vector. Division is only by constants.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exactmath::{parse_rat, QVec, Rat};
use crate::polyalg::{Mono, VPoly};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Tok::Num(cs[st..i].iter().collect()));
        } else if c.is_ascii_alphabetic() {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()[],".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?} at offset {i}")));
        }
    }
    Ok(out)
}

enum Val {
    Scalar(VPoly),
    Vector(VPoly),
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    l: usize,
    s: usize,
    d: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} (token {} in {:?})", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn constant(&self, r: Rat) -> VPoly {
        let mut p = VPoly::zero(self.l, self.s, 1);
        p.add_term(Mono(vec![0; self.l * (self.s + 1)]), &QVec(vec![r]));
        p
    }

    fn variable(&self, idx: usize) -> VPoly {
        let mut m = vec![0; self.l * (self.s + 1)];
        m[idx] = 1;
        let mut p = VPoly::zero(self.l, self.s, 1);
        p.add_term(Mono(m), &QVec(vec![Rat::from_integer(1.into())]));
        p
    }

    fn vector(&self, v: QVec) -> VPoly {
        let mut p = VPoly::zero(self.l, self.s, self.d);
        p.add_term(Mono(vec![0; self.l * (self.s + 1)]), &v);
        p
    }

    fn expr(&mut self) -> Result<Val> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                let t = self.term()?;
                acc = self.combine(acc, t, false)?;
            } else if self.eat('-') {
                let t = self.term()?;
                acc = self.combine(acc, t, true)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn combine(&self, a: Val, b: Val, minus: bool) -> Result<Val> {
        let f = |x: &VPoly, y: &VPoly| if minus { x.sub(y) } else { x.add(y) };
        match (a, b) {
            (Val::Scalar(x), Val::Scalar(y)) => Ok(Val::Scalar(f(&x, &y)?)),
            (Val::Vector(x), Val::Vector(y)) => Ok(Val::Vector(f(&x, &y)?)),
            _ => Err(self.err("cannot add a scalar and a vector")),
        }
    }

    fn term(&mut self) -> Result<Val> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                let b = self.unary()?;
                acc = match (acc, b) {
                    (Val::Scalar(x), Val::Scalar(y)) => Val::Scalar(x.mul_scalar(&y)?),
                    (Val::Scalar(x), Val::Vector(y)) | (Val::Vector(y), Val::Scalar(x)) => Val::Vector(x.mul_scalar(&y)?),
                    _ => return Err(self.err("cannot multiply two vectors")),
                };
            } else if self.eat('/') {
                let b = self.unary()?;
                let c = match b {
                    Val::Scalar(p) if p.total_degree() == 0 && !p.is_zero() => p.monos().next().unwrap().1 .0[0].clone(),
                    _ => return Err(self.err("division only by nonzero constants")),
                };
                let inv = Rat::from_integer(1.into()) / c;
                acc = match acc {
                    Val::Scalar(x) => Val::Scalar(x.scale(&inv)),
                    Val::Vector(x) => Val::Vector(x.scale(&inv)),
                };
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Val> {
        if self.eat('-') {
            return Ok(match self.unary()? {
                Val::Scalar(x) => Val::Scalar(x.neg()),
                Val::Vector(x) => Val::Vector(x.neg()),
            });
        }
        let base = self.atom()?;
        if self.eat('^') {
            let e: u32 = match self.toks.get(self.pos) {
                Some(Tok::Num(n)) => n.parse().map_err(|_| self.err("bad exponent"))?,
                _ => return Err(self.err("expected exponent")),
            };
            self.pos += 1;
            let Val::Scalar(x) = base else {
                return Err(self.err("cannot raise a vector to a power"));
            };
            let mut acc = self.constant(Rat::from_integer(1.into()));
            for _ in 0..e {
                acc = acc.mul_scalar(&x)?;
            }
            return Ok(Val::Scalar(acc));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Val> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Val::Scalar(self.constant(parse_rat(&n)?)))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(v)
            }
            Some(Tok::Sym('[')) => {
                self.pos += 1;
                let mut entries = Vec::new();
                loop {
                    let neg = self.eat('-');
                    let mut r = match self.peek().cloned() {
                        Some(Tok::Num(n)) => {
                            self.pos += 1;
                            parse_rat(&n)?
                        }
                        _ => return Err(self.err("expected number in vector literal")),
                    };
                    if self.eat('/') {
                        match self.peek().cloned() {
                            Some(Tok::Num(n)) => {
                                self.pos += 1;
                                let den = parse_rat(&n)?;
                                if den.is_zero() {
                                    return Err(self.err("zero denominator"));
                                }
                                r /= den;
                            }
                            _ => return Err(self.err("expected denominator")),
                        }
                    }
                    entries.push(if neg { -r } else { r });
                    if self.eat(']') {
                        break;
                    }
                    if !self.eat(',') {
                        return Err(self.err("expected ',' or ']'"));
                    }
                }
                if entries.len() != self.d {
                    return Err(self.err(&format!("vector literal must have {} entries", self.d)));
                }
                Ok(Val::Vector(self.vector(QVec(entries))))
            }
            Some(Tok::Ident(id)) => {
                self.pos += 1;
                self.ident(&id)
            }
            _ => Err(self.err("unexpected end of expression")),
        }
    }

    fn ident(&self, id: &str) -> Result<Val> {
        let num = |t: &str| t.parse::<usize>().ok().filter(|&x| x >= 1);
        let unknown = || self.err(&format!("unknown identifier {id:?}"));
        if let Some(rest) = id.strip_prefix('e') {
            let i = num(rest).filter(|&i| i <= self.d).ok_or_else(unknown)?;
            return Ok(Val::Vector(self.vector(QVec::unit(self.d, i - 1))));
        }
        if let Some(rest) = id.strip_prefix('n') {
            let r = if self.l == 1 && rest.is_empty() { 1 } else { num(rest).ok_or_else(unknown)? };
            if r > self.l {
                return Err(unknown());
            }
            return Ok(Val::Scalar(self.variable(r - 1)));
        }
        if let Some(rest) = id.strip_prefix('h') {
            let (j, r) = match rest.split_once('_') {
                Some((j, r)) => (num(j).ok_or_else(unknown)?, num(r).ok_or_else(unknown)?),
                None if self.l == 1 => (num(rest).ok_or_else(unknown)?, 1),
                None => return Err(unknown()),
            };
            if j > self.s || r > self.l {
                return Err(unknown());
            }
            return Ok(Val::Scalar(self.variable(self.l * j + r - 1)));
        }
        Err(unknown())
    }
}

/// Parses an infix polynomial expression with the given shape.
pub fn parse_poly(src: &str, l: usize, s: usize, d: usize) -> Result<VPoly> {
    if l == 0 || d == 0 {
        return Err(Error::Shape("L and d must be positive".into()));
    }
    let mut p = Parser { toks: tokenize(src)?, pos: 0, l, s, d, src };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    match v {
        Val::Vector(x) => Ok(x),
        Val::Scalar(x) if d == 1 => Ok(x),
        Val::Scalar(x) if x.is_zero() => Ok(VPoly::zero(l, s, d)),
        Val::Scalar(_) => Err(Error::Parse(format!("{src:?} is scalar but d = {d}"))),
    }
}
