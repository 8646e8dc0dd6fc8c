//! Numerical checks of multiple ergodic averages on rotation systems.
//!
//! Irrationals are bound to doubles; every phase `x·n^v mod 1` is then
//! computed exactly for the bound double (rational parts exactly over `Q`),
//! so the only rounding is in `cos`/`sin` and the compensated summation.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::exactmath::Rat;
use crate::polyalg::VPoly;
use crate::systems::{SymPhase, TorusSystem};

/// Default values for the declared irrationals: `√2, √3, √5, √7, …`.
pub fn default_value(index: usize) -> f64 {
    const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (PRIMES[index % PRIMES.len()] as f64).sqrt() + (index / PRIMES.len()) as f64
}

/// Parses a binding value: a decimal, `sqrtK` or `pi`.
pub fn parse_value(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(k) = s.strip_prefix("sqrt") {
        let k: f64 = k.parse().map_err(|_| Error::Parse(format!("bad value {s:?}")))?;
        return Ok(k.sqrt());
    }
    if s == "pi" {
        return Ok(std::f64::consts::PI);
    }
    s.parse().map_err(|_| Error::Parse(format!("bad value {s:?}")))
}

/// A Følner box `[start, end)^L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxRange {
    pub start: i64,
    pub end: i64,
}

impl BoxRange {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end <= start {
            return Err(Error::Precondition(format!("empty box [{start}, {end})")));
        }
        Ok(BoxRange { start, end })
    }

    pub fn size(&self, l: usize) -> f64 {
        ((self.end - self.start) as f64).powi(l as i32)
    }

    fn for_each(&self, l: usize, mut f: impl FnMut(&[i64])) {
        let mut n = vec![self.start; l];
        loop {
            f(&n);
            let mut r = 0;
            while r < l {
                n[r] += 1;
                if n[r] < self.end {
                    break;
                }
                n[r] = self.start;
                r += 1;
            }
            if r == l {
                return;
            }
        }
    }
}

/// Irrational values plus the averaging box and Monte-Carlo parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericBinding {
    pub values: BTreeMap<String, f64>,
    pub range: BoxRange,
    pub samples: usize,
    pub seed: u64,
}

impl NumericBinding {
    /// Binds every irrational of `sys` to its default unless overridden.
    pub fn for_system(sys: &TorusSystem, overrides: &BTreeMap<String, f64>, range: BoxRange) -> Result<Self> {
        if let Some(k) = overrides.keys().find(|k| !sys.irrationals().contains(k)) {
            return Err(Error::Parse(format!("binding for undeclared irrational {k:?}")));
        }
        let values = sys
            .irrationals()
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), overrides.get(k).copied().unwrap_or_else(|| default_value(i))))
            .collect();
        Ok(NumericBinding { values, range, samples: 64, seed: 0 })
    }

    fn real(&self, ph: &SymPhase) -> f64 {
        ph.irrational_part().iter().map(|(k, v)| v.to_f64().unwrap() * self.values[k]).sum()
    }
}

/// `x·N mod 1` for the exact binary value of `x`, given `N mod 2^64`
/// as `wrapped` and `N` itself as `exact` (used only for tiny `x`).
fn frac_times(x: f64, wrapped: u64, exact: impl FnOnce() -> BigInt) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return 0.0;
    }
    let bits = x.abs().to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let (mant, e) = if exp == 0 { (bits & ((1 << 52) - 1), -1074) } else { ((bits & ((1 << 52) - 1)) | (1 << 52), exp - 1075) };
    if e >= 0 {
        return 0.0;
    }
    let shift = (-e) as u32;
    let r = if shift <= 64 {
        let mask: u128 = if shift == 64 { u64::MAX as u128 } else { (1u128 << shift) - 1 };
        let w = (wrapped as u128) & mask;
        let prod = (mant as u128 * w) & mask;
        prod as f64 / (1u128 << shift) as f64
    } else {
        let modulus = BigInt::one() << shift;
        let prod = (BigInt::from(mant) * exact()).mod_floor(&modulus);
        Rat::new(prod, modulus).to_f64().unwrap()
    };
    if x < 0.0 {
        (1.0 - r) % 1.0
    } else {
        r
    }
}

/// A real polynomial phase `φ(n) = Σ_v (ρ_v + ι_v)·n^v` with exact
/// rational parts `ρ_v` and double parts `ι_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoly {
    l: usize,
    /// Common denominator and numerators of the rational parts.
    den: i128,
    rational: Vec<(Vec<u32>, i128)>,
    real: Vec<(Vec<u32>, f64)>,
}

impl PhasePoly {
    pub fn new(l: usize, rational: Vec<(Vec<u32>, Rat)>, real: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        let den = rational.iter().fold(BigInt::one(), |acc, (_, r)| acc.lcm(r.denom()));
        let den_i = den
            .to_i128()
            .filter(|&d| d < (1 << 62))
            .ok_or_else(|| Error::Precondition("rational phase denominator too large".into()))?;
        let rational = rational
            .into_iter()
            .filter(|(_, r)| !r.is_zero())
            .map(|(v, r)| {
                let num = (r * Rat::from_integer(den.clone())).to_integer().mod_floor(&den);
                (v, num.to_i128().unwrap())
            })
            .collect();
        let real = real.into_iter().filter(|(_, x)| *x != 0.0).collect();
        Ok(PhasePoly { l, den: den_i, rational, real })
    }

    /// `φ(n) mod 1` in `[0, 1)`.
    pub fn frac_at(&self, n: &[i64]) -> f64 {
        let mut acc = 0i128;
        for (v, a) in &self.rational {
            let mut t = *a;
            for (&ni, &e) in n.iter().zip(v) {
                let nm = (ni as i128).rem_euclid(self.den);
                for _ in 0..e {
                    t = t * nm % self.den;
                }
            }
            acc = (acc + t) % self.den;
        }
        let mut total = acc as f64 / self.den as f64;
        for (v, x) in &self.real {
            let mut w: u64 = 1;
            for (&ni, &e) in n.iter().zip(v) {
                for _ in 0..e {
                    w = w.wrapping_mul(ni as u64);
                }
            }
            let exact = || n.iter().zip(v).map(|(&ni, &e)| num_traits::pow(BigInt::from(ni), e as usize)).product();
            total += frac_times(*x, w, exact);
        }
        total - total.floor()
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
struct Accumulator {
    sum: [f64; 2],
    comp: [f64; 2],
}

impl Accumulator {
    fn add(&mut self, z: Complex64) {
        for (i, x) in [z.re, z.im].into_iter().enumerate() {
            let s = self.sum[i];
            let t = s + x;
            self.comp[i] += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
            self.sum[i] = t;
        }
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.sum[0] + self.comp[0], self.sum[1] + self.comp[1])
    }
}

fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * t)
}

/// `(1/|box|) Σ_{n ∈ box} e(φ(n))`.
pub fn exp_sum(phi: &PhasePoly, range: &BoxRange) -> Result<Complex64> {
    if range.end <= range.start {
        return Err(Error::Precondition("empty box".into()));
    }
    let mut acc = Accumulator::default();
    range.for_each(phi.l, |n| acc.add(e(phi.frac_at(n))));
    Ok(acc.value() / range.size(phi.l))
}

/// `p(n)·θ` with `p` scalar rational and `θ` symbolic, split into the
/// rational and bound real coefficients of each `n^v`.
fn add_scaled(
    rational: &mut BTreeMap<Vec<u32>, Rat>,
    real: &mut BTreeMap<Vec<u32>, f64>,
    p: &VPoly,
    coord: usize,
    theta: &SymPhase,
    binding: &NumericBinding,
) {
    let l = p.l();
    let x = binding.real(theta);
    for (m, c) in p.monos() {
        let b = &c.0[coord];
        if b.is_zero() {
            continue;
        }
        let v = m.b(l).to_vec();
        *rational.entry(v.clone()).or_insert_with(Rat::zero) += b * theta.rational_part();
        if x != 0.0 {
            *real.entry(v).or_insert(0.0) += b.to_f64().unwrap() * x;
        }
    }
}

fn check_shapes(sys: &TorusSystem, family: &[VPoly], characters: &[Vec<i64>]) -> Result<()> {
    if family.is_empty() {
        return Err(Error::Precondition("empty family".into()));
    }
    if characters.len() != family.len() {
        return Err(Error::Shape(format!("{} characters for {} functions", characters.len(), family.len())));
    }
    for p in family {
        if p.d() != sys.action_dim() {
            return Err(Error::DimensionMismatch { expected: sys.action_dim(), found: p.d() });
        }
        if p.s() != 0 || p.l() != family[0].l() {
            return Err(Error::Shape("family members must share L and not depend on h".into()));
        }
    }
    for k in characters {
        if k.len() != sys.torus_dim() {
            return Err(Error::DimensionMismatch { expected: sys.torus_dim(), found: k.len() });
        }
    }
    Ok(())
}

/// Phase of `∏_i f_i(T_{p_i(n)} x) / e((Σk_i)·x)` for characters `f_i = e(k_i·x)`.
pub fn family_phase(sys: &TorusSystem, binding: &NumericBinding, family: &[VPoly], characters: &[Vec<i64>]) -> Result<PhasePoly> {
    check_shapes(sys, family, characters)?;
    let mut rational = BTreeMap::new();
    let mut real = BTreeMap::new();
    for (p, k) in family.iter().zip(characters) {
        for g in 0..sys.action_dim() {
            let theta = sys
                .alpha(g)
                .iter()
                .zip(k)
                .fold(SymPhase::zero(), |acc, (a, &kt)| acc.add(&a.scale(&Rat::from_integer(kt.into()))));
            add_scaled(&mut rational, &mut real, p, g, &theta, binding);
        }
    }
    PhasePoly::new(family[0].l(), rational.into_iter().collect(), real.into_iter().collect())
}

/// Orbit displacement `p(n)·α` on `T^m`, one phase polynomial per coordinate.
fn displacement(sys: &TorusSystem, binding: &NumericBinding, p: &VPoly) -> Result<Vec<PhasePoly>> {
    (0..sys.torus_dim())
        .map(|t| {
            let mut rational = BTreeMap::new();
            let mut real = BTreeMap::new();
            for g in 0..sys.action_dim() {
                add_scaled(&mut rational, &mut real, p, g, &sys.alpha(g)[t], binding);
            }
            PhasePoly::new(p.l(), rational.into_iter().collect(), real.into_iter().collect())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Closed form: the average is `c_box·e((Σk_i)·x)`.
    Fourier,
    /// Explicit orbit averages at sampled points, squared deviation
    /// integrated empirically.
    MonteCarlo,
}

fn all_zero(characters: &[Vec<i64>]) -> bool {
    characters.iter().all(|k| k.iter().all(|&x| x == 0))
}

/// `‖E_{n∈box} ∏ T_{p_i(n)} f_i − ∏ ∫ f_i‖_{L²}` for characters `f_i`.
pub fn multi_average_norm(
    sys: &TorusSystem,
    binding: &NumericBinding,
    family: &[VPoly],
    characters: &[Vec<i64>],
    mode: Mode,
) -> Result<f64> {
    check_shapes(sys, family, characters)?;
    match mode {
        Mode::Fourier => {
            if all_zero(characters) {
                return Ok(0.0);
            }
            let phi = family_phase(sys, binding, family, characters)?;
            Ok(exp_sum(&phi, &binding.range)?.norm())
        }
        Mode::MonteCarlo => monte_carlo(sys, binding, family, characters),
    }
}

fn monte_carlo(sys: &TorusSystem, binding: &NumericBinding, family: &[VPoly], characters: &[Vec<i64>]) -> Result<f64> {
    if binding.samples == 0 {
        return Err(Error::Precondition("at least one sample is required".into()));
    }
    let m = sys.torus_dim();
    let l = family[0].l();
    let shifts: Vec<Vec<PhasePoly>> = family.iter().map(|p| displacement(sys, binding, p)).collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(binding.seed);
    let xs: Vec<Vec<f64>> = (0..binding.samples).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut sums = vec![Accumulator::default(); xs.len()];
    let mut y = vec![vec![0.0; m]; family.len()];
    binding.range.for_each(l, |n| {
        for (yi, sh) in y.iter_mut().zip(&shifts) {
            for (yt, ph) in yi.iter_mut().zip(sh) {
                *yt = ph.frac_at(n);
            }
        }
        for (x, acc) in xs.iter().zip(sums.iter_mut()) {
            let mut t = 0.0;
            for (yi, k) in y.iter().zip(characters) {
                for ((xt, yt), &kt) in x.iter().zip(yi).zip(k) {
                    t += kt as f64 * ((xt + yt) % 1.0);
                }
            }
            acc.add(e(t - t.floor()));
        }
    });
    let target = if all_zero(characters) { Complex64::new(1.0, 0.0) } else { Complex64::zero() };
    let size = binding.range.size(l);
    let mean_sq: f64 = sums.iter().map(|a| (a.value() / size - target).norm_sqr()).sum::<f64>() / xs.len() as f64;
    Ok(mean_sq.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow {
    pub n: i64,
    pub fourier: f64,
    pub montecarlo: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSeries {
    pub characters: Vec<Vec<i64>>,
    pub start: i64,
    pub seed: u64,
    pub samples: usize,
    pub rows: Vec<ProbeRow>,
}

impl ProbeSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,norm_fourier,norm_mc,seed\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.12e},{:.12e},{}\n", r.n, r.fourier, r.montecarlo, self.seed));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "characters": self.characters,
            "box_start": self.start,
            "seed": self.seed,
            "samples": self.samples,
            "boxes": "boxes [M, M+N)^L; only box Følner sequences are probed",
            "series": self.rows.iter().map(|r| json!({ "N": r.n, "norm_fourier": r.fourier, "norm_mc": r.montecarlo })).collect::<Vec<_>>(),
        })
    }
}

/// Both norms over the boxes `[M, M+N)^L` for each `N` of the schedule.
pub fn convergence_probe(
    sys: &TorusSystem,
    binding: &NumericBinding,
    family: &[VPoly],
    characters: &[Vec<i64>],
    schedule: &[i64],
) -> Result<ProbeSeries> {
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("schedule must be increasing".into()));
    }
    let start = binding.range.start;
    let mut rows = Vec::new();
    for &n in schedule {
        let b = NumericBinding { range: BoxRange::new(start, start + n)?, ..binding.clone() };
        rows.push(ProbeRow {
            n,
            fourier: multi_average_norm(sys, &b, family, characters, Mode::Fourier)?,
            montecarlo: multi_average_norm(sys, &b, family, characters, Mode::MonteCarlo)?,
        });
    }
    Ok(ProbeSeries { characters: characters.to_vec(), start, seed: binding.seed, samples: binding.samples, rows })
}
