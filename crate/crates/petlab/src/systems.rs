//! Symbolic torus rotations and exact ergodicity and uniformity tests.
//!
//! A [`TorusSystem`] is a `Z^d` action on `T^m` by translations whose
//! rotation entries lie in `Q ⊕ Qξ_1 ⊕ …`, with the declared irrationals
//! `ξ_k` rationally independent together with 1. Under that contract every
//! test here is decided exactly.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exactmath::{bigint_json, fmt_rat, integer_kernel, parse_rat, saturate_int, Lattice, Rat};
use crate::factors::{certificate, Certificate, ConditionKind, ConditionStatus};
use crate::petcore::check_family_nondegenerate;
use crate::polyalg::VPoly;

fn frac(r: &Rat) -> Rat {
    r - r.floor()
}

/// A phase `a ∈ R/Z` as a rational part in `[0, 1)` plus exact coefficients
/// of the declared irrationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SymPhase {
    rational: Rat,
    irrational: BTreeMap<String, Rat>,
}

impl SymPhase {
    pub fn new(rational: Rat, irrational: impl IntoIterator<Item = (String, Rat)>) -> Self {
        let mut irr = BTreeMap::new();
        for (k, v) in irrational {
            if !v.is_zero() {
                irr.insert(k, v);
            }
        }
        SymPhase { rational: frac(&rational), irrational: irr }
    }

    pub fn zero() -> Self {
        SymPhase::default()
    }

    pub fn rational(r: Rat) -> Self {
        SymPhase::new(r, [])
    }

    pub fn symbol(name: &str) -> Self {
        SymPhase::new(Rat::zero(), [(name.to_string(), Rat::one())])
    }

    pub fn rational_part(&self) -> &Rat {
        &self.rational
    }

    pub fn irrational_part(&self) -> &BTreeMap<String, Rat> {
        &self.irrational
    }

    pub fn is_rational(&self) -> bool {
        self.irrational.is_empty()
    }

    /// `λ = e^{2πia} = 1`.
    pub fn is_zero(&self) -> bool {
        self.is_rational() && self.rational.is_zero()
    }

    pub fn add(&self, o: &SymPhase) -> SymPhase {
        let mut irr = self.irrational.clone();
        for (k, v) in &o.irrational {
            *irr.entry(k.clone()).or_insert_with(Rat::zero) += v;
        }
        SymPhase::new(&self.rational + &o.rational, irr)
    }

    pub fn neg(&self) -> SymPhase {
        self.scale(&Rat::from_integer(-BigInt::one()))
    }

    /// `r·a`; only meaningful on `R/Z` for integer `r`, but rational scaling
    /// of the representative is used when expanding polynomials.
    pub fn scale(&self, r: &Rat) -> SymPhase {
        SymPhase::new(&self.rational * r, self.irrational.iter().map(|(k, v)| (k.clone(), v * r)))
    }

    pub fn to_literal(&self) -> PhaseLiteral {
        PhaseLiteral {
            rat: fmt_rat(&self.rational),
            irr: self.irrational.iter().map(|(k, v)| (k.clone(), fmt_rat(v))).collect(),
        }
    }
}

impl fmt::Display for SymPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.rational.is_zero() || self.irrational.is_empty() {
            parts.push(fmt_rat(&self.rational));
        }
        for (k, v) in &self.irrational {
            if v.is_one() {
                parts.push(k.clone());
            } else {
                parts.push(format!("{}*{k}", fmt_rat(v)));
            }
        }
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLiteral {
    #[serde(default = "zero_string")]
    pub rat: String,
    #[serde(default)]
    pub irr: BTreeMap<String, String>,
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLiteral {
    pub torus_dim: usize,
    pub action_dim: usize,
    #[serde(default)]
    pub irrationals: Vec<String>,
    pub alpha: Vec<Vec<PhaseLiteral>>,
}

/// `T_{e_j} x = x + α_j` on `T^m`, `j = 1…d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusSystem {
    torus_dim: usize,
    action_dim: usize,
    irrationals: Vec<String>,
    alpha: Vec<Vec<SymPhase>>,
}

impl TorusSystem {
    pub fn new(irrationals: Vec<String>, alpha: Vec<Vec<SymPhase>>) -> Result<Self> {
        let action_dim = alpha.len();
        let torus_dim = alpha.first().map_or(0, Vec::len);
        if action_dim == 0 || torus_dim == 0 {
            return Err(Error::Shape("torus and action dimensions must be positive".into()));
        }
        for row in &alpha {
            if row.len() != torus_dim {
                return Err(Error::DimensionMismatch { expected: torus_dim, found: row.len() });
            }
            for ph in row {
                if let Some(k) = ph.irrational.keys().find(|k| !irrationals.contains(k)) {
                    return Err(Error::Parse(format!("undeclared irrational {k:?}")));
                }
            }
        }
        Ok(TorusSystem { torus_dim, action_dim, irrationals, alpha })
    }

    /// One-dimensional torus with `T_j x = x + α_j`.
    pub fn circle(irrationals: &[&str], alpha: Vec<SymPhase>) -> Result<Self> {
        TorusSystem::new(irrationals.iter().map(|s| s.to_string()).collect(), alpha.into_iter().map(|a| vec![a]).collect())
    }

    pub fn from_literal(lit: &SystemLiteral) -> Result<Self> {
        let alpha = lit
            .alpha
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| {
                        let irr = p.irr.iter().map(|(k, v)| Ok((k.clone(), parse_rat(v)?))).collect::<Result<Vec<_>>>()?;
                        Ok(SymPhase::new(parse_rat(&p.rat)?, irr))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let sys = TorusSystem::new(lit.irrationals.clone(), alpha)?;
        if sys.torus_dim != lit.torus_dim || sys.action_dim != lit.action_dim {
            return Err(Error::Shape(format!(
                "alpha is {}x{} but declared {}x{}",
                sys.action_dim, sys.torus_dim, lit.action_dim, lit.torus_dim
            )));
        }
        Ok(sys)
    }

    pub fn to_literal(&self) -> SystemLiteral {
        SystemLiteral {
            torus_dim: self.torus_dim,
            action_dim: self.action_dim,
            irrationals: self.irrationals.clone(),
            alpha: self.alpha.iter().map(|r| r.iter().map(SymPhase::to_literal).collect()).collect(),
        }
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn irrationals(&self) -> &[String] {
        &self.irrationals
    }

    /// Rotation vector of generator `j` (0-based).
    pub fn alpha(&self, j: usize) -> &[SymPhase] {
        &self.alpha[j]
    }

    /// Rotation vector `g·α` of `T_g`.
    pub fn rotation(&self, g: &[BigInt]) -> Result<Vec<SymPhase>> {
        if g.len() != self.action_dim {
            return Err(Error::DimensionMismatch { expected: self.action_dim, found: g.len() });
        }
        Ok((0..self.torus_dim)
            .map(|t| {
                g.iter().zip(&self.alpha).fold(SymPhase::zero(), |acc, (gj, row)| {
                    acc.add(&row[t].scale(&Rat::from_integer(gj.clone())))
                })
            })
            .collect())
    }
}

/// Phase of the eigenvalue of `T_g` on the character `x ↦ e(k·x)`.
pub fn eigenvalue_phase(sys: &TorusSystem, k: &[BigInt], g: &[BigInt]) -> Result<SymPhase> {
    if k.len() != sys.torus_dim {
        return Err(Error::DimensionMismatch { expected: sys.torus_dim, found: k.len() });
    }
    let rot = sys.rotation(g)?;
    Ok(k.iter().zip(&rot).fold(SymPhase::zero(), |acc, (kt, a)| acc.add(&a.scale(&Rat::from_integer(kt.clone())))))
}

/// Integer rows (denominators cleared) expressing "irrational part of the
/// linear form vanishes" for forms `x ↦ Σ_t x_t φ_t`.
fn irrational_rows(names: &[String], forms: &[Vec<SymPhase>]) -> Vec<Vec<BigInt>> {
    let mut rows = Vec::new();
    for form in forms {
        for name in names {
            let row: Vec<Rat> = form.iter().map(|ph| ph.irrational.get(name).cloned().unwrap_or_else(Rat::zero)).collect();
            if row.iter().all(Zero::is_zero) {
                continue;
            }
            let den = row.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
            rows.push(row.iter().map(|r| (r * Rat::from_integer(den.clone())).to_integer()).collect());
        }
    }
    rows
}

fn lcm_denominators<'a>(rs: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    rs.into_iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// `x ↦ Σ_t x_t φ_t` evaluated on an integer vector.
fn apply_form(form: &[SymPhase], x: &[BigInt]) -> SymPhase {
    form.iter().zip(x).fold(SymPhase::zero(), |acc, (ph, xi)| acc.add(&ph.scale(&Rat::from_integer(xi.clone()))))
}

/// Whether `(T_g)_{g ∈ H}` is ergodic, with a nonzero invariant character as
/// witness otherwise.
pub fn subgroup_action_ergodic_witness(sys: &TorusSystem, h: &Lattice) -> Result<(bool, Option<Vec<BigInt>>)> {
    if h.dim() != sys.action_dim {
        return Err(Error::DimensionMismatch { expected: sys.action_dim, found: h.dim() });
    }
    if h.is_zero() {
        return Err(Error::Precondition("subgroup action of the zero lattice".into()));
    }
    let forms: Vec<Vec<SymPhase>> = h.basis().iter().map(|g| sys.rotation(g)).collect::<Result<_>>()?;
    let kernel = integer_kernel(&irrational_rows(&sys.irrationals, &forms), sys.torus_dim);
    let Some(k) = kernel.first() else {
        return Ok((true, None));
    };
    // Clearing the rational phases of a kernel vector gives an invariant character.
    let phases: Vec<SymPhase> = forms.iter().map(|f| apply_form(f, k)).collect();
    let q = lcm_denominators(phases.iter().map(|p| &p.rational));
    Ok((false, Some(k.iter().map(|x| x * &q).collect())))
}

pub fn subgroup_action_ergodic(sys: &TorusSystem, h: &Lattice) -> Result<bool> {
    Ok(subgroup_action_ergodic_witness(sys, h)?.0)
}

/// `Φ_n` with integer coefficients, lowest degree first.
pub fn cyclotomic(n: u64) -> Vec<BigInt> {
    assert!(n >= 1);
    let mut p: Vec<BigInt> = vec![BigInt::zero(); n as usize + 1];
    p[0] = -BigInt::one();
    p[n as usize] = BigInt::one();
    for e in (1..n).filter(|e| n % e == 0) {
        p = poly_div_exact(&p, &cyclotomic(e));
    }
    p
}

/// Quotient of `a` by the monic `b`; the remainder must vanish.
fn poly_div_exact(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let (q, r) = poly_divrem(a, b);
    debug_assert!(r.iter().all(Zero::is_zero));
    q
}

fn poly_divrem(a: &[BigInt], b: &[BigInt]) -> (Vec<BigInt>, Vec<BigInt>) {
    let db = b.len() - 1;
    debug_assert!(b[db].is_one());
    let mut r = a.to_vec();
    if r.len() <= db {
        return (vec![BigInt::zero()], r);
    }
    let mut q = vec![BigInt::zero(); r.len() - db];
    for i in (0..q.len()).rev() {
        let c = r[i + db].clone();
        if c.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            r[i + j] -= &c * bj;
        }
        q[i] = c;
    }
    r.truncate(db);
    (q, r)
}

/// `p = N/den` with integer coefficients `N`.
struct IntegerForm {
    l: usize,
    den: BigInt,
    terms: Vec<(Vec<u32>, BigInt)>,
}

fn integer_form(p: &VPoly) -> Result<IntegerForm> {
    if p.d() != 1 || p.s() != 0 {
        return Err(Error::Shape("expected a scalar polynomial in n only".into()));
    }
    if !p.integer_valued() {
        return Err(Error::NotIntegerValued);
    }
    let l = p.l();
    let den = lcm_denominators(p.monos().map(|(_, c)| &c.0[0]));
    let terms = p
        .monos()
        .map(|(m, c)| (m.b(l).to_vec(), (&c.0[0] * Rat::from_integer(den.clone())).to_integer()))
        .collect();
    Ok(IntegerForm { l, den, terms })
}

/// Size `P^L` of the period box used to decide uniformity of `e(c/q)`.
pub fn period_box_size(q: &BigInt, p: &VPoly) -> Result<BigInt> {
    let f = integer_form(p)?;
    Ok(num_traits::pow(q * &f.den, f.l))
}

/// Residue counts of `p(n) mod q` over `n ∈ [0, q·den)^L`.
fn residue_counts(f: &IntegerForm, q: u64) -> Result<Vec<BigInt>> {
    let modulus = BigInt::from(q) * &f.den;
    let m = modulus
        .to_u64()
        .filter(|&m| m < (1 << 31))
        .ok_or_else(|| Error::Precondition(format!("period {modulus} too large for exact residue counting")))?;
    let den = f.den.to_u64().unwrap();
    let coeffs: Vec<(Vec<u32>, u64)> = f
        .terms
        .iter()
        .map(|(b, c)| (b.clone(), c.mod_floor(&modulus).to_u64().unwrap()))
        .collect();
    let mut counts = vec![BigInt::zero(); q as usize];
    let mut n = vec![0u64; f.l];
    loop {
        let mut acc = 0u64;
        for (b, c) in &coeffs {
            let mut t = *c;
            for (ni, &e) in n.iter().zip(b) {
                for _ in 0..e {
                    t = t * ni % m;
                }
            }
            acc = (acc + t) % m;
        }
        debug_assert_eq!(acc % den, 0);
        counts[((acc / den) % q) as usize] += 1;
        let mut r = 0;
        while r < f.l {
            n[r] += 1;
            if n[r] < m {
                break;
            }
            n[r] = 0;
            r += 1;
        }
        if r == f.l {
            break;
        }
    }
    Ok(counts)
}

/// Whether `E_{n ∈ Z^L} λ^{p(n)} = 0`.
///
/// Irrational phases are uniform for every non-constant `p`. A rational
/// phase `c/q` (lowest terms) is uniform iff the residue-count polynomial
/// `Σ_r N_r x^r` over one period box is divisible by `Φ_q`.
pub fn uniform_for(lambda: &SymPhase, p: &VPoly) -> Result<bool> {
    let f = integer_form(p)?;
    if !lambda.is_rational() {
        return Ok(p.total_degree() > 0);
    }
    let q = lambda.rational.denom().clone();
    if q.is_one() {
        return Ok(false);
    }
    let c = lambda.rational.numer().to_u64().unwrap();
    let q = q.to_u64().ok_or_else(|| Error::Precondition("phase denominator too large".into()))?;
    let counts = residue_counts(&f, q)?;
    // λ^r = ζ^{c·r} with ζ = e(1/q); gather by exponent of ζ.
    let mut poly = vec![BigInt::zero(); q as usize];
    for (r, nr) in counts.iter().enumerate() {
        poly[(c * r as u64 % q) as usize] += nr;
    }
    let (_, rem) = poly_divrem(&poly, &cyclotomic(q));
    Ok(rem.iter().all(Zero::is_zero))
}

/// An eigenvalue of the product system with the character that realizes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigenWitness {
    pub phase: SymPhase,
    /// `(k_1, …, k_d)` flattened, each `k_i ∈ Z^m`.
    pub character: Vec<BigInt>,
    pub uniform: bool,
}

impl EigenWitness {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "phase": self.phase.to_string(),
            "character": self.character.iter().map(bigint_json).collect::<Vec<_>>(),
            "uniform": self.uniform,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductVerdict {
    pub ergodic: bool,
    /// Order of the group of rational phases reached with no irrational part.
    pub rational_order: BigInt,
    /// Non-uniform eigenvalues found, most informative first.
    pub witnesses: Vec<EigenWitness>,
}

/// The linear form `(k_1…k_d) ↦ Σ_i k_i·α_i` on `Z^{md}` and the lattice of
/// character tuples on which it has no irrational part.
fn product_kernel(sys: &TorusSystem) -> (Vec<SymPhase>, Vec<Vec<BigInt>>) {
    let form: Vec<SymPhase> = (0..sys.action_dim).flat_map(|i| sys.alpha[i].iter().cloned()).collect();
    let kernel = integer_kernel(&irrational_rows(&sys.irrationals, std::slice::from_ref(&form)), form.len());
    (form, kernel)
}

/// Order of the cyclic group of rational eigenvalue phases of
/// `T_1×⋯×T_d` (1 when every nonzero character has an irrational phase).
pub fn product_rational_order(sys: &TorusSystem) -> BigInt {
    let (form, kernel) = product_kernel(sys);
    lcm_denominators(&kernel.iter().map(|k| apply_form(&form, k).rational).collect::<Vec<_>>())
}

/// Eigenvalue-uniformity criterion for `((T_1×⋯×T_d)^{p(n)})`: every
/// eigenvalue `e(Σ_i k_i·α_i)` of the product, `(k_i) ≠ 0`, must be uniform
/// for `p`.
pub fn product_polynomial_ergodic(sys: &TorusSystem, p: &VPoly) -> Result<ProductVerdict> {
    integer_form(p)?;
    let (m, d) = (sys.torus_dim, sys.action_dim);
    let (form, kernel) = product_kernel(sys);
    if kernel.is_empty() {
        let ergodic = p.total_degree() > 0;
        let mut witnesses = Vec::new();
        if !ergodic {
            let mut k = vec![BigInt::zero(); m * d];
            k[0] = BigInt::one();
            witnesses.push(EigenWitness { phase: apply_form(&form, &k), character: k, uniform: false });
        }
        return Ok(ProductVerdict { ergodic, rational_order: BigInt::one(), witnesses });
    }
    // Rational phases a_j/q_j of the kernel basis generate (1/Q)Z/Z.
    let phases: Vec<Rat> = kernel.iter().map(|k| apply_form(&form, k).rational).collect();
    let q_order = lcm_denominators(&phases);
    let nums: Vec<BigInt> = phases.iter().map(|r| (r * Rat::from_integer(q_order.clone())).to_integer()).collect();
    // Σ c_j·nums_j ≡ 1 (mod Q) by iterated extended gcd.
    let mut g = q_order.clone();
    let mut cs = vec![BigInt::zero(); nums.len()];
    for (j, nj) in nums.iter().enumerate() {
        let e = g.extended_gcd(nj);
        for c in cs.iter_mut() {
            *c *= &e.x;
        }
        cs[j] = e.y;
        g = e.gcd;
    }
    debug_assert!(g.is_one());
    let generator: Vec<BigInt> =
        (0..m * d).map(|t| kernel.iter().zip(&cs).map(|(k, c)| &k[t] * c).sum()).collect();
    let mut witnesses = Vec::new();
    let q_small = q_order.to_u64().ok_or_else(|| Error::Precondition("rational phase order too large".into()))?;
    for j in 1..q_small {
        let phase = SymPhase::rational(Rat::new(BigInt::from(j), q_order.clone()));
        if !uniform_for(&phase, p)? {
            let character: Vec<BigInt> = generator.iter().map(|x| x * BigInt::from(j)).collect();
            debug_assert_eq!(apply_form(&form, &character), phase);
            witnesses.push(EigenWitness { phase, character, uniform: false });
        }
    }
    // Q·κ is a nonzero character with eigenvalue 1, never uniform.
    let character: Vec<BigInt> = kernel[0].iter().map(|x| x * &q_order).collect();
    witnesses.push(EigenWitness { phase: SymPhase::zero(), character, uniform: false });
    Ok(ProductVerdict { ergodic: false, rational_order: q_order, witnesses })
}

/// One evaluated condition of a joint-ergodicity theorem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    pub detail: String,
    pub witness: Option<serde_json::Value>,
}

impl Verdict {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "name": self.name, "holds": self.holds, "detail": self.detail });
        if let Some(w) = &self.witness {
            v["witness"] = w.clone();
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct T1Report {
    pub conditions: Vec<Verdict>,
    pub jointly_ergodic: bool,
}

impl T1Report {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "theorem": "t1",
            "conditions": self.conditions.iter().map(Verdict::to_json).collect::<Vec<_>>(),
            "conclusion": if self.jointly_ergodic { "jointly ergodic" } else { "not jointly ergodic" },
        })
    }
}

fn unit_difference(d: usize, i: usize, j: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); d];
    v[i] = BigInt::one();
    v[j] = -BigInt::one();
    v
}

fn ints_json(v: &[BigInt]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(bigint_json).collect())
}

/// `(T_1^{p(n)}, …, T_d^{p(n)})` is jointly ergodic iff every `T_iT_j^{-1}`
/// is ergodic and `(T_1×⋯×T_d)^{p(n)}` is ergodic.
pub fn check_t1(sys: &TorusSystem, p: &VPoly) -> Result<T1Report> {
    let d = sys.action_dim;
    let mut conditions = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let h = saturate_int(d, &[unit_difference(d, i, j)])?;
            let (holds, w) = subgroup_action_ergodic_witness(sys, &h)?;
            conditions.push(Verdict {
                name: format!("(i) T{}T{}^-1 ergodic", i + 1, j + 1),
                holds,
                detail: format!("action of {h}"),
                witness: w.map(|k| json!({ "invariant_character": ints_json(&k) })),
            });
        }
    }
    let prod = product_polynomial_ergodic(sys, p)?;
    let detail = if prod.ergodic {
        "every eigenvalue of the product is uniform".to_string()
    } else {
        format!("non-uniform eigenvalue e({})", prod.witnesses[0].phase)
    };
    conditions.push(Verdict {
        name: "(ii) (T1x...xTd)^p(n) ergodic".into(),
        holds: prod.ergodic,
        detail,
        witness: (!prod.ergodic).then(|| {
            json!({
                "rational_order": bigint_json(&prod.rational_order),
                "eigenvalues": prod.witnesses.iter().map(EigenWitness::to_json).collect::<Vec<_>>(),
            })
        }),
    });
    let jointly_ergodic = conditions.iter().all(|c| c.holds);
    Ok(T1Report { conditions, jointly_ergodic })
}

/// Characters `(k_1…k_k)` of `(T^m)^k` whose phase along
/// `T_{p_1(n)}×⋯×T_{p_k(n)}` has no `n`-dependent irrational part. The
/// product sequence is ergodic on rotations iff this lattice is `{0}`.
pub fn product_family_kernel(sys: &TorusSystem, family: &[VPoly]) -> Result<Vec<Vec<BigInt>>> {
    let m = sys.torus_dim;
    let k = family.len();
    let mut forms: Vec<Vec<SymPhase>> = Vec::new();
    let keys: std::collections::BTreeSet<_> =
        family.iter().flat_map(|p| p.monos().map(|(mo, _)| mo.clone())).filter(|mo| !mo.is_zero()).collect();
    for key in keys {
        let mut form = Vec::with_capacity(m * k);
        for p in family {
            if p.d() != sys.action_dim {
                return Err(Error::DimensionMismatch { expected: sys.action_dim, found: p.d() });
            }
            let b = p.coeff_mono(&key);
            for t in 0..m {
                let ph = (0..sys.action_dim)
                    .fold(SymPhase::zero(), |acc, g| acc.add(&sys.alpha[g][t].scale(&b.0[g])));
                form.push(ph);
            }
        }
        forms.push(form);
    }
    Ok(integer_kernel(&irrational_rows(&sys.irrationals, &forms), m * k))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct T2Report {
    pub certificate: Certificate,
    pub jointly_ergodic: bool,
    pub witnesses: Vec<Option<serde_json::Value>>,
}

impl T2Report {
    pub fn conclusion(&self) -> &'static str {
        if self.jointly_ergodic {
            "jointly ergodic (sufficient conditions met)"
        } else {
            "inconclusive"
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut conds = Vec::new();
        for (c, w) in self.certificate.conditions.iter().zip(&self.witnesses) {
            let mut v = c.to_json();
            if let Some(w) = w {
                v["witness"] = w.clone();
            }
            conds.push(v);
        }
        json!({
            "theorem": "t2",
            "R_lattices": self.certificate.r_lattices.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            "conditions": conds,
            "failures": self.certificate.conditions.iter().filter(|c| c.status == ConditionStatus::Failed).map(|c| c.name()).collect::<Vec<_>>(),
            "conclusion": self.conclusion(),
        })
    }
}

/// Evaluates the sufficient conditions for joint ergodicity of
/// `(T_{p_1(n)}, …, T_{p_k(n)})` on the rotation system.
pub fn check_t2(sys: &TorusSystem, family: &[VPoly]) -> Result<T2Report> {
    check_family_nondegenerate(family)?;
    let mut cert = certificate(family)?;
    if cert.d != sys.action_dim {
        return Err(Error::DimensionMismatch { expected: sys.action_dim, found: cert.d });
    }
    let mut witnesses = Vec::new();
    for cond in cert.conditions.iter_mut() {
        match &cond.kind {
            ConditionKind::SubgroupErgodic(h) => {
                let (holds, w) = subgroup_action_ergodic_witness(sys, h)?;
                cond.status = if holds { ConditionStatus::Verified } else { ConditionStatus::Failed };
                witnesses.push(w.map(|k| json!({ "invariant_character": ints_json(&k) })));
            }
            ConditionKind::ProductErgodic => {
                let kernel = product_family_kernel(sys, family)?;
                cond.status = if kernel.is_empty() { ConditionStatus::Verified } else { ConditionStatus::Failed };
                cond.detail = Some("rotation-system criterion".into());
                witnesses.push(kernel.first().map(|k| json!({ "non_equidistributed_character": ints_json(k) })));
            }
        }
    }
    let jointly_ergodic = cert.conditions.iter().all(|c| c.status == ConditionStatus::Verified);
    Ok(T2Report { certificate: cert, jointly_ergodic, witnesses })
}

/// Exact average of `λ^{p(n)}` over one period box, as a complex number;
/// used to cross-check the cyclotomic test numerically.
pub fn periodic_average(lambda: &SymPhase, p: &VPoly) -> Result<(f64, f64)> {
    if !lambda.is_rational() {
        return Err(Error::Precondition("periodic average needs a rational phase".into()));
    }
    let f = integer_form(p)?;
    let q = lambda.rational.denom().to_u64().unwrap();
    let c = lambda.rational.numer().to_u64().unwrap();
    let counts = residue_counts(&f, q)?;
    let total: f64 = counts.iter().map(|x| x.to_f64().unwrap()).sum();
    let (mut re, mut im) = (0.0, 0.0);
    for (r, nr) in counts.iter().enumerate() {
        let a = 2.0 * std::f64::consts::PI * ((c * r as u64 % q) as f64) / q as f64;
        let w = nr.to_f64().unwrap() / total;
        re += w * a.cos();
        im += w * a.sin();
    }
    Ok((re, im))
}
