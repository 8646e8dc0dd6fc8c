//! Exact rationals, rational vectors and saturated integer lattices.
//!
//! Lattices are always stored saturated (`span_Q(basis) ∩ Z^d`) with a
//! canonical column Hermite normal form basis, so structural equality is
//! semantic equality.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"p"`, `"-p"` or `"p/q"` with `q != 0`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Parse(format!("malformed fraction {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rat::new(n, d))
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// JSON form of a big integer: a number when it fits in `i64`, else a string.
pub(crate) fn bigint_json(v: &BigInt) -> serde_json::Value {
    match v.to_i64() {
        Some(x) => serde_json::Value::from(x),
        None => serde_json::Value::from(v.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QVec(pub Vec<Rat>);

impl QVec {
    pub fn zeros(d: usize) -> Self {
        QVec(vec![Rat::zero(); d])
    }

    /// The `i`-th standard basis vector (0-based).
    pub fn unit(d: usize, i: usize) -> Self {
        let mut v = Self::zeros(d);
        v.0[i] = Rat::one();
        v
    }

    pub fn from_ints(xs: &[i64]) -> Self {
        QVec(xs.iter().map(|&x| int(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn add(&self, o: &QVec) -> QVec {
        debug_assert_eq!(self.dim(), o.dim());
        QVec(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &QVec) -> QVec {
        debug_assert_eq!(self.dim(), o.dim());
        QVec(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> QVec {
        QVec(self.0.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, r: &Rat) -> QVec {
        QVec(self.0.iter().map(|a| a * r).collect())
    }

    pub fn add_assign(&mut self, o: &QVec) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a += b;
        }
    }

    pub fn denominator_lcm(&self) -> BigInt {
        self.0.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
    }

    /// The vector scaled by the lcm of its denominators.
    pub fn cleared(&self) -> Vec<BigInt> {
        let l = self.denominator_lcm();
        self.0
            .iter()
            .map(|x| x.numer() * (&l / x.denom()))
            .collect()
    }

    pub fn to_integers(&self) -> Option<Vec<BigInt>> {
        self.0
            .iter()
            .map(|x| x.is_integer().then(|| x.to_integer()))
            .collect()
    }

    /// `Some(r)` with `self = r·other` when `other` is nonzero and parallel.
    pub fn ratio_to(&self, other: &QVec) -> Option<Rat> {
        let k = other.0.iter().position(|x| !x.is_zero())?;
        let r = &self.0[k] / &other.0[k];
        (other.scale(&r) == *self).then_some(r)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(fmt_rat).collect()
    }
}

impl fmt::Display for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(","))
    }
}

/// A saturated subgroup of `Z^d` with canonical column-HNF basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lattice {
    dim: usize,
    basis: Vec<Vec<BigInt>>,
}

impl Lattice {
    pub fn zero(dim: usize) -> Self {
        Lattice { dim, basis: Vec::new() }
    }

    pub fn full(dim: usize) -> Self {
        let basis = (0..dim)
            .map(|i| (0..dim).map(|j| BigInt::from((i == j) as i64)).collect())
            .collect();
        Lattice { dim, basis }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<BigInt>] {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.rank() == self.dim
    }

    pub fn to_json(&self) -> serde_json::Value {
        let basis: Vec<serde_json::Value> = self
            .basis
            .iter()
            .map(|v| v.iter().map(bigint_json).collect())
            .collect();
        serde_json::json!({ "dim": self.dim, "basis": basis })
    }
}

impl Serialize for Lattice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let basis: Vec<Vec<serde_json::Value>> = self
            .basis
            .iter()
            .map(|v| v.iter().map(bigint_json).collect())
            .collect();
        let mut st = s.serialize_struct("Lattice", 2)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("basis", &basis)?;
        st.end()
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &Vec<BigInt>| {
            let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("({})", parts.join(","))
        };
        match self.rank() {
            0 => write!(f, "{{0}}"),
            r if r == self.dim => write!(f, "Z^{}", self.dim),
            1 => write!(f, "Z{}", show(&self.basis[0])),
            _ => {
                let parts: Vec<String> = self.basis.iter().map(show).collect();
                write!(f, "Z<{}>", parts.join(","))
            }
        }
    }
}

fn sub_mul(target: &mut [BigInt], q: &BigInt, src: &[BigInt]) {
    if q.is_zero() {
        return;
    }
    for (t, s) in target.iter_mut().zip(src) {
        if !s.is_zero() {
            *t -= q * s;
        }
    }
}

/// Column echelon elimination on the first `rows` coordinates by unimodular
/// column operations. Returns the pivot columns with their pivot rows and the
/// remaining columns, which vanish on the first `rows` coordinates.
fn eliminate(mut cols: Vec<Vec<BigInt>>, rows: usize) -> (Vec<(usize, Vec<BigInt>)>, Vec<Vec<BigInt>>) {
    let mut pivots = Vec::new();
    for r in 0..rows {
        loop {
            let nz: Vec<usize> = (0..cols.len()).filter(|&j| !cols[j][r].is_zero()).collect();
            if nz.len() <= 1 {
                break;
            }
            let p = *nz.iter().min_by_key(|&&j| cols[j][r].abs()).unwrap();
            let pcol = cols[p].clone();
            for &j in &nz {
                if j != p {
                    let q = cols[j][r].div_floor(&pcol[r]);
                    sub_mul(&mut cols[j], &q, &pcol);
                }
            }
        }
        if let Some(j) = (0..cols.len()).find(|&j| !cols[j][r].is_zero()) {
            let mut c = cols.swap_remove(j);
            if c[r].is_negative() {
                c.iter_mut().for_each(|x| *x = -&*x);
            }
            pivots.push((r, c));
        }
    }
    (pivots, cols)
}

/// Canonical column HNF of the group generated by `cols` in `Z^dim`:
/// pivot rows strictly increase, pivots are positive and each entry in a later
/// pivot row is reduced into `[0, pivot)`.
pub fn hnf(dim: usize, cols: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let cols: Vec<Vec<BigInt>> = cols.iter().filter(|c| c.iter().any(|x| !x.is_zero())).cloned().collect();
    let (pivots, _) = eliminate(cols, dim);
    let rows: Vec<usize> = pivots.iter().map(|(r, _)| *r).collect();
    let mut basis: Vec<Vec<BigInt>> = pivots.into_iter().map(|(_, c)| c).collect();
    for j in 0..basis.len() {
        for k in j + 1..basis.len() {
            let pk = rows[k];
            let q = basis[j][pk].div_floor(&basis[k][pk]);
            if !q.is_zero() {
                let colk = basis[k].clone();
                sub_mul(&mut basis[j], &q, &colk);
            }
        }
    }
    basis
}

/// Basis of `{x ∈ Z^ncols : A x = 0}` for the integer matrix with the given rows,
/// in canonical HNF. The kernel of an integer matrix is always saturated.
pub fn integer_kernel(rows: &[Vec<BigInt>], ncols: usize) -> Vec<Vec<BigInt>> {
    let m = rows.len();
    let cols: Vec<Vec<BigInt>> = (0..ncols)
        .map(|j| {
            let mut c: Vec<BigInt> = rows.iter().map(|r| r[j].clone()).collect();
            c.extend((0..ncols).map(|i| BigInt::from((i == j) as i64)));
            c
        })
        .collect();
    let (_, rest) = eliminate(cols, m);
    let kernel: Vec<Vec<BigInt>> = rest.into_iter().map(|c| c[m..].to_vec()).collect();
    hnf(ncols, &kernel)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `span_Q(vectors) ∩ Z^dim` for integer generators.
pub fn saturate_int(dim: usize, vectors: &[Vec<BigInt>]) -> Result<Lattice> {
    for v in vectors {
        check_dim(dim, v.len())?;
    }
    let gens: Vec<Vec<BigInt>> = vectors.iter().filter(|v| v.iter().any(|x| !x.is_zero())).cloned().collect();
    if gens.is_empty() {
        return Ok(Lattice::zero(dim));
    }
    // The annihilator of the annihilator is the rational span.
    let ann = integer_kernel(&gens, dim);
    if ann.is_empty() {
        return Ok(Lattice::full(dim));
    }
    let sat = integer_kernel(&ann, dim);
    Ok(Lattice { dim, basis: hnf(dim, &sat) })
}

/// `span_Q(vectors) ∩ Z^dim`. Empty or all-zero input gives the zero lattice.
pub fn saturate(dim: usize, vectors: &[QVec]) -> Result<Lattice> {
    for v in vectors {
        check_dim(dim, v.dim())?;
    }
    let ints: Vec<Vec<BigInt>> = vectors.iter().map(QVec::cleared).collect();
    saturate_int(dim, &ints)
}

pub fn lattice_member(l: &Lattice, v: &[BigInt]) -> Result<bool> {
    check_dim(l.dim, v.len())?;
    let mut w = v.to_vec();
    for col in &l.basis {
        let p = col.iter().position(|x| !x.is_zero()).expect("basis vectors are nonzero");
        let (q, r) = w[p].div_rem(&col[p]);
        if !r.is_zero() {
            return Ok(false);
        }
        sub_mul(&mut w, &q, col);
    }
    Ok(w.iter().all(Zero::is_zero))
}

pub fn lattice_contains(outer: &Lattice, inner: &Lattice) -> Result<bool> {
    check_dim(outer.dim, inner.dim)?;
    for b in &inner.basis {
        if !lattice_member(outer, b)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Saturated closure of `a + b`.
pub fn lattice_sum(a: &Lattice, b: &Lattice) -> Result<Lattice> {
    check_dim(a.dim, b.dim)?;
    let gens: Vec<Vec<BigInt>> = a.basis.iter().chain(&b.basis).cloned().collect();
    saturate_int(a.dim, &gens)
}

pub fn is_finite_index(sub: &Lattice, sup: &Lattice) -> Result<bool> {
    if !lattice_contains(sup, sub)? {
        return Err(Error::Precondition("sub is not contained in super".into()));
    }
    Ok(sub.rank() == sup.rank())
}
