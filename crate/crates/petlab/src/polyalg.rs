//! Sparse vector-valued polynomials `q(n; h_1, …, h_s)` with `n, h_j ∈ Z^L`
//! and coefficients in `Q^d`.
//!
//! A monomial is stored as one flat exponent vector: the `L` exponents of `n`
//! followed by `L` exponents for each `h_j`. Growing `s` appends zero blocks,
//! which is what makes polynomials of different `s` interoperate.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactmath::{fmt_rat, parse_rat, QVec, Rat};

/// Flat exponent vector `[b | a_1 | … | a_s]`, ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mono(pub Vec<u32>);

impl Mono {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn n_degree(&self, l: usize) -> u32 {
        self.0[..l].iter().sum()
    }

    pub fn b(&self, l: usize) -> &[u32] {
        &self.0[..l]
    }

    /// Exponent block of `h_j`, 1-based as in the notation `h_1…h_s`.
    pub fn a(&self, l: usize, j: usize) -> &[u32] {
        &self.0[l * j..l * (j + 1)]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Self) -> Ordering {
        self.degree().cmp(&o.degree()).then_with(|| self.0.cmp(&o.0))
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Structured view of a monomial: exponent of `n` and of each `h_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpKey {
    pub b: Vec<u32>,
    pub a: Vec<Vec<u32>>,
}

impl ExpKey {
    pub fn new(b: Vec<u32>, a: Vec<Vec<u32>>) -> Self {
        ExpKey { b, a }
    }

    pub fn to_mono(&self) -> Mono {
        let mut v = self.b.clone();
        for a in &self.a {
            v.extend_from_slice(a);
        }
        Mono(v)
    }

    pub fn from_mono(m: &Mono, l: usize, s: usize) -> Self {
        ExpKey {
            b: m.b(l).to_vec(),
            a: (1..=s).map(|j| m.a(l, j).to_vec()).collect(),
        }
    }
}

pub(crate) fn binom(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn pow_big(x: &BigInt, e: u32) -> BigInt {
    num_traits::pow(x.clone(), e as usize)
}

/// Literal JSON form, see [`VPoly::to_literal`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyLiteral {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub s: usize,
    pub d: usize,
    pub terms: Vec<TermLiteral>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermLiteral {
    pub b: Vec<u32>,
    #[serde(default)]
    pub a: Vec<Vec<u32>>,
    pub coeff: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VPoly {
    l: usize,
    s: usize,
    d: usize,
    terms: BTreeMap<Mono, QVec>,
}

impl VPoly {
    pub fn zero(l: usize, s: usize, d: usize) -> Self {
        VPoly { l, s, d, terms: BTreeMap::new() }
    }

    /// `coeff · n^b · h_1^{a_1} ⋯ h_s^{a_s}`.
    pub fn monomial(l: usize, s: usize, key: &ExpKey, coeff: QVec) -> Result<Self> {
        let mut p = Self::zero(l, s, coeff.dim());
        p.check_key(key)?;
        p.add_term(key.to_mono(), &coeff);
        Ok(p)
    }

    /// `coeff · n^b` with no `h` variables (`s = 0`).
    pub fn n_term(b: &[u32], coeff: QVec) -> Self {
        let mut p = Self::zero(b.len(), 0, coeff.dim());
        p.add_term(Mono(b.to_vec()), &coeff);
        p
    }

    pub fn from_terms(l: usize, s: usize, d: usize, terms: impl IntoIterator<Item = (ExpKey, QVec)>) -> Result<Self> {
        let mut p = Self::zero(l, s, d);
        for (k, c) in terms {
            p.check_key(&k)?;
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.dim() });
            }
            p.add_term(k.to_mono(), &c);
        }
        Ok(p)
    }

    pub(crate) fn from_monos(l: usize, s: usize, d: usize, terms: impl IntoIterator<Item = (Mono, QVec)>) -> Self {
        let mut p = Self::zero(l, s, d);
        for (m, c) in terms {
            debug_assert_eq!(m.0.len(), l * (s + 1));
            p.add_term(m, &c);
        }
        p
    }

    fn check_key(&self, k: &ExpKey) -> Result<()> {
        if k.b.len() != self.l || k.a.len() != self.s || k.a.iter().any(|a| a.len() != self.l) {
            return Err(Error::Shape(format!(
                "exponent key does not match L={}, s={}",
                self.l, self.s
            )));
        }
        Ok(())
    }

    pub(crate) fn add_term(&mut self, m: Mono, c: &QVec) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                v.add_assign(c);
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c.clone());
            }
        }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn monos(&self) -> impl Iterator<Item = (&Mono, &QVec)> {
        self.terms.iter()
    }

    /// All `(key, coefficient)` pairs in canonical order.
    pub fn terms(&self) -> Vec<(ExpKey, QVec)> {
        self.terms
            .iter()
            .map(|(m, c)| (ExpKey::from_mono(m, self.l, self.s), c.clone()))
            .collect()
    }

    /// Same polynomial viewed with `s_new ≥ s` auxiliary variables.
    pub fn padded(&self, s_new: usize) -> VPoly {
        assert!(s_new >= self.s, "cannot shrink s");
        if s_new == self.s {
            return self.clone();
        }
        let extra = self.l * (s_new - self.s);
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut v = m.0.clone();
                v.extend(std::iter::repeat(0).take(extra));
                (Mono(v), c.clone())
            })
            .collect();
        VPoly { l: self.l, s: s_new, d: self.d, terms }
    }

    fn aligned(&self, o: &VPoly) -> Result<(VPoly, VPoly)> {
        if self.l != o.l {
            return Err(Error::Shape(format!("L differs: {} vs {}", self.l, o.l)));
        }
        if self.d != o.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: o.d });
        }
        let s = self.s.max(o.s);
        Ok((self.padded(s), o.padded(s)))
    }

    pub fn add(&self, o: &VPoly) -> Result<VPoly> {
        let (mut a, b) = self.aligned(o)?;
        for (m, c) in b.terms {
            a.add_term(m, &c);
        }
        Ok(a)
    }

    pub fn sub(&self, o: &VPoly) -> Result<VPoly> {
        let (mut a, b) = self.aligned(o)?;
        for (m, c) in b.terms {
            a.add_term(m, &c.neg());
        }
        Ok(a)
    }

    pub fn neg(&self) -> VPoly {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect();
        self.with_terms(terms)
    }

    pub fn scale(&self, r: &Rat) -> VPoly {
        if r.is_zero() {
            return Self::zero(self.l, self.s, self.d);
        }
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), c.scale(r))).collect();
        self.with_terms(terms)
    }

    fn with_terms(&self, terms: BTreeMap<Mono, QVec>) -> VPoly {
        VPoly { l: self.l, s: self.s, d: self.d, terms }
    }

    pub fn coeff(&self, key: &ExpKey) -> Result<QVec> {
        self.check_key(key)?;
        Ok(self.coeff_mono(&key.to_mono()))
    }

    pub fn coeff_mono(&self, m: &Mono) -> QVec {
        self.terms.get(m).cloned().unwrap_or_else(|| QVec::zeros(self.d))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Mono::degree).max().unwrap_or(0)
    }

    /// Total degree in `n`; 0 for zero and essentially constant polynomials.
    pub fn deg_n(&self) -> u32 {
        self.terms.keys().map(|m| m.n_degree(self.l)).max().unwrap_or(0)
    }

    pub fn essentially_constant(&self) -> bool {
        self.terms.keys().all(|m| m.n_degree(self.l) == 0)
    }

    pub fn essentially_equal(&self, o: &VPoly) -> Result<bool> {
        Ok(self.sub(o)?.essentially_constant())
    }

    /// The terms that involve `n`.
    pub fn n_part(&self) -> VPoly {
        self.filter(|m| m.n_degree(self.l) > 0)
    }

    /// The `h`-only terms.
    pub fn const_part(&self) -> VPoly {
        self.filter(|m| m.n_degree(self.l) == 0)
    }

    /// Terms of top `n`-degree; two entries of equal degree ≥ 1 are
    /// equivalent exactly when these parts agree.
    pub fn leading_n_part(&self) -> VPoly {
        let deg = self.deg_n();
        self.filter(|m| m.n_degree(self.l) == deg)
    }

    fn filter(&self, keep: impl Fn(&Mono) -> bool) -> VPoly {
        let terms = self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect();
        self.with_terms(terms)
    }

    /// Product of a scalar polynomial (`d = 1`) with `o`.
    pub fn mul_scalar(&self, o: &VPoly) -> Result<VPoly> {
        if self.d != 1 {
            return Err(Error::Shape("left factor must be scalar".into()));
        }
        let (a, b) = (self, o);
        if a.l != b.l {
            return Err(Error::Shape(format!("L differs: {} vs {}", a.l, b.l)));
        }
        let s = a.s.max(b.s);
        let (a, b) = (a.padded(s), b.padded(s));
        let mut out = VPoly::zero(a.l, s, b.d);
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                let m = Mono(ma.0.iter().zip(&mb.0).map(|(x, y)| x + y).collect());
                out.add_term(m, &cb.scale(&ca.0[0]));
            }
        }
        Ok(out)
    }

    /// Scalar polynomial of coordinate `j` (0-based).
    pub fn component(&self, j: usize) -> VPoly {
        let mut p = VPoly::zero(self.l, self.s, 1);
        for (m, c) in &self.terms {
            p.add_term(m.clone(), &QVec(vec![c.0[j].clone()]));
        }
        p
    }

    /// Replaces `n` by `n + h_{s+1}`, so `s` grows by one.
    pub fn shift_n(&self) -> VPoly {
        let l = self.l;
        let mut out = VPoly::zero(l, self.s + 1, self.d);
        for (m, u) in &self.terms {
            let b = m.b(l).to_vec();
            let mut c = vec![0u32; l];
            loop {
                let mut factor = BigInt::one();
                for r in 0..l {
                    factor *= binom(b[r], c[r]);
                }
                let mut v: Vec<u32> = b.iter().zip(&c).map(|(x, y)| x - y).collect();
                v.extend_from_slice(&m.0[l..]);
                v.extend_from_slice(&c);
                out.add_term(Mono(v), &u.scale(&Rat::from_integer(factor)));
                // Next c ≤ b in mixed radix.
                let mut r = 0;
                while r < l {
                    if c[r] < b[r] {
                        c[r] += 1;
                        break;
                    }
                    c[r] = 0;
                    r += 1;
                }
                if r == l {
                    break;
                }
            }
        }
        out
    }

    /// Rebuilds the polynomial over new variables: `l_new`, `s_new`, with every
    /// monomial sent through `f`.
    pub fn remap(&self, l_new: usize, s_new: usize, f: impl Fn(&Mono) -> Mono) -> VPoly {
        VPoly::from_monos(l_new, s_new, self.d, self.terms.iter().map(|(m, c)| (f(m), c.clone())))
    }

    fn check_args(&self, n: &[BigInt], h: &[Vec<BigInt>]) -> Result<()> {
        if n.len() != self.l || h.len() != self.s || h.iter().any(|x| x.len() != self.l) {
            return Err(Error::Shape(format!(
                "evaluation point does not match L={}, s={}",
                self.l, self.s
            )));
        }
        Ok(())
    }

    pub fn eval_rat(&self, n: &[BigInt], h: &[Vec<BigInt>]) -> Result<QVec> {
        self.check_args(n, h)?;
        let point: Vec<&BigInt> = n.iter().chain(h.iter().flatten()).collect();
        let mut acc = QVec::zeros(self.d);
        for (m, c) in &self.terms {
            let mut v = BigInt::one();
            for (x, &e) in point.iter().zip(&m.0) {
                if e > 0 {
                    v *= pow_big(x, e);
                }
            }
            acc.add_assign(&c.scale(&Rat::from_integer(v)));
        }
        Ok(acc)
    }

    /// Exact integer value; errors if the value is not integral.
    pub fn eval(&self, n: &[BigInt], h: &[Vec<BigInt>]) -> Result<Vec<BigInt>> {
        let v = self.eval_rat(n, h)?;
        v.to_integers().ok_or_else(|| Error::NonIntegral(v.to_string()))
    }

    /// Decides integer-valuedness exactly. A polynomial of total degree `D` is
    /// integer-valued iff its Newton (binomial-basis) coefficients are
    /// integers, and those are determined by the values on the simplex
    /// `{x ∈ N^vars : |x| ≤ D}`, a subset of the grid `{0..D}^vars`.
    pub fn integer_valued(&self) -> bool {
        if self.terms.values().all(|c| c.to_integers().is_some()) {
            return true;
        }
        let deg = self.total_degree();
        let nvars = self.l * (self.s + 1);
        let mut x = vec![0u32; nvars];
        loop {
            let big: Vec<BigInt> = x.iter().map(|&v| BigInt::from(v)).collect();
            let n = big[..self.l].to_vec();
            let h: Vec<Vec<BigInt>> = big[self.l..].chunks(self.l).map(|c| c.to_vec()).collect();
            if self.eval(&n, &h).is_err() {
                return false;
            }
            // Next point of the simplex.
            let mut i = 0;
            loop {
                if i == nvars {
                    return true;
                }
                x[i] += 1;
                if x.iter().sum::<u32>() <= deg {
                    break;
                }
                x[i] = 0;
                i += 1;
            }
        }
    }

    pub fn to_literal(&self) -> PolyLiteral {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| TermLiteral {
                b: m.b(self.l).to_vec(),
                a: (1..=self.s).map(|j| m.a(self.l, j).to_vec()).collect(),
                coeff: c.to_strings(),
            })
            .collect();
        PolyLiteral { l: self.l, s: self.s, d: self.d, terms }
    }

    pub fn from_literal(lit: &PolyLiteral) -> Result<VPoly> {
        if lit.l == 0 || lit.d == 0 {
            return Err(Error::Shape("L and d must be positive".into()));
        }
        let mut p = VPoly::zero(lit.l, lit.s, lit.d);
        for t in &lit.terms {
            let key = ExpKey::new(t.b.clone(), t.a.clone());
            p.check_key(&key)?;
            if t.coeff.len() != lit.d {
                return Err(Error::DimensionMismatch { expected: lit.d, found: t.coeff.len() });
            }
            let c = QVec(t.coeff.iter().map(|s| parse_rat(s)).collect::<Result<_>>()?);
            p.add_term(key.to_mono(), &c);
        }
        Ok(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_literal()).expect("literal serializes")
    }

    fn var_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let block = |base: &str, names: &mut Vec<String>| {
            if self.l == 1 {
                names.push(base.to_string());
            } else {
                for r in 1..=self.l {
                    names.push(format!("{base}_{r}"));
                }
            }
        };
        block("n", &mut names);
        for j in 1..=self.s {
            block(&format!("h{j}"), &mut names);
        }
        names
    }
}

impl fmt::Display for VPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = self.var_names();
        let mut parts = Vec::new();
        for (m, c) in self.terms.iter().rev() {
            let coeff = if self.d == 1 { fmt_rat(&c.0[0]) } else { c.to_string() };
            let mut factors = vec![coeff];
            for (name, &e) in names.iter().zip(&m.0) {
                match e {
                    0 => {}
                    1 => factors.push(name.clone()),
                    _ => factors.push(format!("{name}^{e}")),
                }
            }
            parts.push(factors.join("*"));
        }
        write!(f, "{}", parts.join(" + "))
    }
}
