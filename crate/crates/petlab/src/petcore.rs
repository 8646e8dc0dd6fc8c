//! PET-tuples, the van der Corput operation `∂_ρ`, the weight ordering and
//! selection rule that make PET induction terminate, dimension increment, and
//! the coefficient-set relations `~` and `≲`.
//!
//! Indices (`ρ`, slots, base functions) are 0-based throughout the library;
//! reports add one when printing.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde_json::json;

use crate::error::{Error, Result};
use crate::exactmath::QVec;
use crate::polyalg::{ExpKey, Mono, VPoly};

/// One factor `T_{shift(h)} f_base` of a function slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SlotFactor {
    pub base: usize,
    /// `h`-only polynomial with values in `Z^d`.
    pub shift: VPoly,
}

/// Product of shifted copies of original functions occupying one iterate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FSlot {
    pub factors: Vec<SlotFactor>,
}

impl FSlot {
    pub fn pure(base: usize, l: usize, s: usize, d: usize) -> Self {
        FSlot { factors: vec![SlotFactor { base, shift: VPoly::zero(l, s, d) }] }
    }

    /// `Some(i)` when the slot is exactly `f_i` with no shift.
    pub fn pure_base(&self) -> Option<usize> {
        match self.factors.as_slice() {
            [f] if f.shift.is_zero() => Some(f.base),
            _ => None,
        }
    }

    fn padded(&self, s: usize) -> FSlot {
        let factors = self
            .factors
            .iter()
            .map(|f| SlotFactor { base: f.base, shift: f.shift.padded(s) })
            .collect();
        FSlot { factors }
    }

    fn shifted(&self, offset: &VPoly) -> Result<FSlot> {
        let factors = self
            .factors
            .iter()
            .map(|f| Ok(SlotFactor { base: f.base, shift: f.shift.add(offset)? }))
            .collect::<Result<_>>()?;
        Ok(FSlot { factors })
    }

    fn remap(&self, l_new: usize, s_new: usize, f: &impl Fn(&Mono) -> Mono) -> FSlot {
        let factors = self
            .factors
            .iter()
            .map(|x| SlotFactor { base: x.base, shift: x.shift.remap(l_new, s_new, f) })
            .collect();
        FSlot { factors }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let fs: Vec<_> = self
            .factors
            .iter()
            .map(|f| json!({ "base": f.base + 1, "shift": f.shift.to_json() }))
            .collect();
        serde_json::Value::Array(fs)
    }
}

impl fmt::Display for FSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| {
                if x.shift.is_zero() {
                    format!("f{}", x.base + 1)
                } else {
                    format!("T[{}]f{}", x.shift, x.base + 1)
                }
            })
            .collect();
        write!(f, "{}", parts.join("·"))
    }
}

/// A PET-tuple `(L, s, ℓ, g, q)`; `ℓ = polys.len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetTuple {
    pub l: usize,
    pub s: usize,
    pub d: usize,
    pub polys: Vec<VPoly>,
    pub slots: Vec<FSlot>,
    /// Base function of the pure slot whose iterate the latest vdC step
    /// subtracted (and so moved to iterate 0), if that slot was pure.
    pub vanished: Option<usize>,
}

impl PetTuple {
    /// The initial tuple `(L, 0, k, (f_1…f_k), (p_1…p_k))`.
    pub fn from_family(family: &[VPoly]) -> Result<Self> {
        let first = family.first().ok_or_else(|| Error::Precondition("empty family".into()))?;
        let (l, s, d) = (first.l(), first.s(), first.d());
        for p in family {
            if p.l() != l || p.s() != s {
                return Err(Error::Shape("family members must share L and s".into()));
            }
            if p.d() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.d() });
            }
        }
        let slots = (0..family.len()).map(|i| FSlot::pure(i, l, s, d)).collect();
        Ok(PetTuple { l, s, d, polys: family.to_vec(), slots, vanished: None })
    }

    pub fn ell(&self) -> usize {
        self.polys.len()
    }

    pub fn degree(&self) -> u32 {
        self.polys.iter().map(VPoly::deg_n).max().unwrap_or(0)
    }

    /// Errors (1-based indices) unless every iterate is essentially
    /// non-constant and all iterates are pairwise essentially distinct.
    pub fn check_nondegenerate(&self) -> Result<()> {
        check_family_nondegenerate(&self.polys)
    }

    pub fn pure_slots(&self, base: usize) -> Vec<usize> {
        (0..self.ell()).filter(|&m| self.slots[m].pure_base() == Some(base)).collect()
    }

    /// Smallest pure slot of `base` whose iterate has maximal degree.
    pub fn standard_slot(&self, base: usize) -> Option<usize> {
        let deg = self.degree();
        self.pure_slots(base).into_iter().find(|&m| self.polys[m].deg_n() == deg)
    }

    pub fn is_standard_for(&self, base: usize) -> bool {
        self.standard_slot(base).is_some()
    }

    pub fn is_semistandard_for(&self, base: usize) -> bool {
        !self.pure_slots(base).is_empty()
    }

    /// Scalar entry matrix `q_{m,j}` with columns in the order `perm`.
    pub fn matrix(&self, perm: &[usize]) -> Vec<Vec<VPoly>> {
        self.polys
            .iter()
            .map(|p| perm.iter().map(|&j| p.component(j)).collect())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "L": self.l,
            "s": self.s,
            "ell": self.ell(),
            "degree": self.degree(),
            "polys": self.polys.iter().map(VPoly::to_json).collect::<Vec<_>>(),
            "slots": self.slots.iter().map(FSlot::to_json).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for PetTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "L={} s={} ell={} deg={}", self.l, self.s, self.ell(), self.degree())?;
        for (m, (p, g)) in self.polys.iter().zip(&self.slots).enumerate() {
            writeln!(f, "  q{} = {}    [{}]", m + 1, p, g)?;
        }
        Ok(())
    }
}

pub fn check_family_nondegenerate(polys: &[VPoly]) -> Result<()> {
    for (i, p) in polys.iter().enumerate() {
        if p.essentially_constant() {
            return Err(Error::DegenerateConstant(i + 1));
        }
    }
    let mut seen: HashMap<VPoly, usize> = HashMap::new();
    for (i, p) in polys.iter().enumerate() {
        if let Some(&j) = seen.get(&p.n_part()) {
            return Err(Error::DegeneratePair(j + 1, i + 1));
        }
        seen.insert(p.n_part(), i);
    }
    Ok(())
}

/// Result of one vdC operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Tuple(PetTuple),
    /// Every iterate was essentially constant.
    Exhausted,
}

/// The vdC operation `∂_ρ` (Steps 1–3).
///
/// Step 1 forms `q_m − q_ρ` and `q_m(n + h_{s+1}) − q_ρ` with duplicated
/// slots; Step 2 drops essentially constant iterates and groups essentially
/// equal ones, groups ordered by first appearance with the first member as
/// representative; Step 3 merges each group into one slot, shifting member
/// factors by their offset from the representative.
pub fn vdc_step(a: &PetTuple, rho: usize) -> Result<StepOutcome> {
    let ell = a.ell();
    if rho >= ell {
        return Err(Error::IndexOutOfRange { index: rho + 1, len: ell });
    }
    let s1 = a.s + 1;
    let q_rho = a.polys[rho].padded(s1);
    let mut cand: Vec<(VPoly, FSlot)> = Vec::with_capacity(2 * ell);
    for m in 0..ell {
        cand.push((a.polys[m].padded(s1).sub(&q_rho)?, a.slots[m].padded(s1)));
    }
    for m in 0..ell {
        cand.push((a.polys[m].shift_n().sub(&q_rho)?, a.slots[m].padded(s1)));
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<VPoly, usize> = HashMap::new();
    for (i, (p, _)) in cand.iter().enumerate() {
        if p.essentially_constant() {
            continue;
        }
        let key = p.n_part();
        match index.get(&key) {
            Some(&g) => groups[g].push(i),
            None => {
                index.insert(key, groups.len());
                groups.push(vec![i]);
            }
        }
    }
    if groups.is_empty() {
        return Ok(StepOutcome::Exhausted);
    }

    let mut polys = Vec::with_capacity(groups.len());
    let mut slots = Vec::with_capacity(groups.len());
    for g in &groups {
        let rep = &cand[g[0]].0;
        let mut factors = cand[g[0]].1.factors.clone();
        for &j in &g[1..] {
            let offset = cand[j].0.sub(rep)?;
            factors.extend(cand[j].1.shifted(&offset)?.factors);
        }
        polys.push(rep.clone());
        slots.push(FSlot { factors });
    }
    let vanished = a.slots[rho].pure_base();
    Ok(StepOutcome::Tuple(PetTuple { l: a.l, s: s1, d: a.d, polys, slots, vanished }))
}

/// How an entry counts as zero in a k-reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroTest {
    /// Only the identically zero polynomial.
    Literal,
    /// Any polynomial independent of `n`.
    Essential,
}

fn is_zero_entry(p: &VPoly, test: ZeroTest) -> bool {
    match test {
        ZeroTest::Literal => p.is_zero(),
        ZeroTest::Essential => p.essentially_constant(),
    }
}

/// Rows whose first `k` entries are zero, with those entries removed.
/// `R_0(M) = M` and `R_k(M) = ∅` once `k` reaches the number of columns.
pub fn k_reduction(m: &[Vec<VPoly>], k: usize, test: ZeroTest) -> Vec<Vec<VPoly>> {
    let ncols = m.first().map_or(0, Vec::len);
    if k == 0 {
        return m.to_vec();
    }
    if k >= ncols {
        return Vec::new();
    }
    m.iter()
        .filter(|row| row[..k].iter().all(|p| is_zero_entry(p, test)))
        .map(|row| row[k..].to_vec())
        .collect()
}

/// `p ~ q`: equal `n`-degree and the difference has lower degree. Entries
/// independent of `n` are all equivalent to each other.
pub fn equivalent(p: &VPoly, q: &VPoly) -> bool {
    let (dp, dq) = (p.deg_n(), q.deg_n());
    dp == dq && (dp == 0 || p.leading_n_part() == q.leading_n_part())
}

/// Column weight: index `k−1` holds the number of `~`-classes of degree `k`.
pub fn column_weight(entries: &[&VPoly], d_bound: u32) -> Vec<u32> {
    let mut classes: Vec<BTreeSet<String>> = vec![BTreeSet::new(); d_bound as usize];
    for p in entries {
        let deg = p.deg_n();
        if deg >= 1 {
            assert!(deg <= d_bound, "degree bound {d_bound} below entry degree {deg}");
            classes[deg as usize - 1].insert(serde_json::to_string(&p.leading_n_part().to_literal()).unwrap());
        }
    }
    classes.iter().map(|c| c.len() as u32).collect()
}

/// `levels[k][j]` is the column weight of column `j` of the `k`-reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weight {
    pub d_bound: u32,
    pub levels: Vec<Vec<Vec<u32>>>,
}

impl Weight {
    /// Comparison sequence: column-major over (column `J`, level `K`), each
    /// column weight read from the highest degree down.
    fn sequence(&self, ncols: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let zeros = vec![0; self.d_bound as usize];
        for j in 0..ncols {
            for k in 0..ncols {
                let w = self.levels.get(k).and_then(|lv| lv.get(j)).unwrap_or(&zeros);
                out.extend(w.iter().rev());
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "D": self.d_bound, "levels": self.levels })
    }
}

pub fn weight_of_matrix(m: &[Vec<VPoly>], ncols: usize, d_bound: u32) -> Weight {
    let levels = (0..ncols)
        .map(|k| {
            let r = k_reduction(m, k, ZeroTest::Essential);
            (0..ncols - k)
                .map(|j| {
                    let col: Vec<&VPoly> = r.iter().map(|row| &row[j]).collect();
                    column_weight(&col, d_bound)
                })
                .collect()
        })
        .collect();
    Weight { d_bound, levels }
}

/// Weight with the natural column order.
pub fn weight(a: &PetTuple, d_bound: u32) -> Weight {
    let perm: Vec<usize> = (0..a.d).collect();
    weight_with_order(a, d_bound, &perm)
}

pub fn weight_with_order(a: &PetTuple, d_bound: u32, perm: &[usize]) -> Weight {
    weight_of_matrix(&a.matrix(perm), perm.len(), d_bound)
}

/// `W1 < W2` in the PET ordering.
pub fn weight_less(w1: &Weight, w2: &Weight) -> bool {
    let ncols = w1.levels.len().max(w2.levels.len());
    let (a, b) = (w1.sequence(ncols), w2.sequence(ncols));
    if w1.d_bound == w2.d_bound {
        return a < b;
    }
    // Different bounds: pad the shorter column weights with leading zeros.
    let dmax = w1.d_bound.max(w2.d_bound) as usize;
    let pad = |w: &Weight| {
        let mut out = Vec::new();
        for chunk in w.sequence(ncols).chunks(w.d_bound as usize) {
            out.extend(std::iter::repeat(0).take(dmax - chunk.len()));
            out.extend_from_slice(chunk);
        }
        out
    };
    pad(w1) < pad(w2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    C1a,
    C1b,
    C1c,
    C2a,
    C2b,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Case::C1a => "1a",
            Case::C1b => "1b",
            Case::C1c => "1c",
            Case::C2a => "2a",
            Case::C2b => "2b",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Finished,
    Step { rho: usize, case: Case },
}

/// The relabeling used by the selection rule and the weight comparison: the
/// target row, and the column order putting the target's first maximal-degree
/// coordinate first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub target_slot: usize,
    pub perm: Vec<usize>,
}

pub fn frame(a: &PetTuple, base: usize) -> Result<Frame> {
    let t = a
        .standard_slot(base)
        .ok_or_else(|| Error::Precondition(format!("tuple is not standard for f{}", base + 1)))?;
    let deg = a.degree();
    let lead = (0..a.d)
        .find(|&j| a.polys[t].component(j).deg_n() == deg)
        .expect("target iterate attains the tuple degree");
    let perm = std::iter::once(lead).chain((0..a.d).filter(|&j| j != lead)).collect();
    Ok(Frame { target_slot: t, perm })
}

/// Chooses `ρ` such that `∂_ρ A` stays standard for `f_base` with smaller
/// weight, or reports that the tuple is already linear.
///
/// Cases follow the termination proof; where the proof's choice does not
/// force a decrease, an entry of minimal degree is chosen instead (cases 1a
/// and 2), with ties broken by smallest index.
pub fn select_rho(a: &PetTuple, base: usize) -> Result<Selection> {
    let fr = frame(a, base)?;
    let deg_a = a.degree();
    if deg_a <= 1 {
        return Ok(Selection::Finished);
    }
    let t = fr.target_slot;
    let m = a.matrix(&fr.perm);
    let d = a.d;
    let j0 = (0..=d)
        .find(|&j| k_reduction(&m, j + 1, ZeroTest::Essential).is_empty())
        .expect("R_d is empty");

    if j0 == 0 {
        let lead = &m[t][0];
        let inequiv = (0..a.ell()).filter(|&i| i != t && !equivalent(&m[i][0], lead));
        if let Some(rho) = inequiv.min_by_key(|&i| (m[i][0].deg_n(), i)) {
            return Ok(Selection::Step { rho, case: Case::C1a });
        }
        let top = |p: &VPoly| p.deg_n() == deg_a;
        let rho_b = (0..a.ell()).filter(|&i| i != t).find(|&i| {
            (0..d).any(|j| !equivalent(&m[i][j], &m[t][j]) && (top(&m[i][j]) || top(&m[t][j])))
        });
        if let Some(rho) = rho_b {
            return Ok(Selection::Step { rho, case: Case::C1b });
        }
        return Ok(Selection::Step { rho: t, case: Case::C1c });
    }

    let rows: Vec<usize> = (0..a.ell())
        .filter(|&i| m[i][..j0].iter().all(VPoly::essentially_constant))
        .collect();
    let col = |i: usize| &m[i][j0];
    let rho = *rows.iter().min_by_key(|&&i| (col(i).deg_n(), i)).expect("R_j0 is nonempty");
    let all_equiv = rows.iter().all(|&i| equivalent(col(i), col(rows[0])));
    let case = if all_equiv { Case::C2b } else { Case::C2a };
    Ok(Selection::Step { rho, case })
}

/// Doubles the variables (`Z^L → Z^{2L}`) to make a semi-standard tuple
/// standard: `q'_m(n,n') = q_m(n) − q_M(n')` for all `m` and
/// `q'_{m+ℓ}(n,n') = q_m(n') − q_M(n')` for `m ≠ M`, where `q_M` is the first
/// iterate of maximal degree.
pub fn dimension_increment(a: &PetTuple, base: usize) -> Result<PetTuple> {
    a.check_nondegenerate()?;
    if a.pure_slots(base).is_empty() {
        return Err(Error::Precondition(format!("tuple is not semi-standard for f{}", base + 1)));
    }
    if a.is_standard_for(base) {
        return Err(Error::Precondition(format!("tuple is already standard for f{}", base + 1)));
    }
    let (l, s) = (a.l, a.s);
    let l2 = 2 * l;
    let deg = a.degree();
    let big = (0..a.ell()).find(|&m| a.polys[m].deg_n() == deg).unwrap();
    // Block layout: n ↦ (n, 0) or (0, n'); each h_j ↦ (h_j, 0).
    let place = move |m: &Mono, primed: bool| {
        let mut v = vec![0u32; l2 * (s + 1)];
        let off = if primed { l } else { 0 };
        v[off..off + l].copy_from_slice(m.b(l));
        for j in 1..=s {
            v[l2 * j..l2 * j + l].copy_from_slice(m.a(l, j));
        }
        Mono(v)
    };
    let unprimed = |m: &Mono| place(m, false);
    let primed = |m: &Mono| place(m, true);
    let q_big = a.polys[big].remap(l2, s, primed);
    let mut polys = Vec::new();
    let mut slots = Vec::new();
    for m in 0..a.ell() {
        polys.push(a.polys[m].remap(l2, s, unprimed).sub(&q_big)?);
        slots.push(a.slots[m].remap(l2, s, &unprimed));
    }
    for m in (0..a.ell()).filter(|&m| m != big) {
        polys.push(a.polys[m].remap(l2, s, primed).sub(&q_big)?);
        slots.push(a.slots[m].remap(l2, s, &unprimed));
    }
    let out = PetTuple { l: l2, s, d: a.d, polys, slots, vanished: None };
    out.check_nondegenerate()
        .map_err(|e| Error::Invariant(format!("dimension increment produced a degenerate tuple: {e}")))?;
    if !out.is_standard_for(base) {
        return Err(Error::Invariant("dimension increment did not produce a standard tuple".into()));
    }
    Ok(out)
}

/// Finite subset of `Q^d` containing `0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoeffSet {
    vectors: BTreeSet<QVec>,
}

impl CoeffSet {
    pub fn new(d: usize, vs: impl IntoIterator<Item = QVec>) -> Self {
        let mut vectors: BTreeSet<QVec> = vs.into_iter().collect();
        vectors.insert(QVec::zeros(d));
        CoeffSet { vectors }
    }

    pub fn vectors(&self) -> impl Iterator<Item = &QVec> {
        self.vectors.iter()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.vectors.len() == 1
    }

    pub fn contains(&self, v: &QVec) -> bool {
        self.vectors.contains(v)
    }

    fn nonzero(&self) -> impl Iterator<Item = &QVec> {
        self.vectors.iter().filter(|v| !v.is_zero())
    }

    /// `r·(self − u)` as a set.
    fn affine(&self, u: &QVec, r: &crate::exactmath::Rat) -> BTreeSet<QVec> {
        self.vectors.iter().map(|v| v.sub(u).scale(r)).collect()
    }
}

impl fmt::Display for CoeffSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vectors.iter().map(QVec::to_string).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// `R_q(b; a_1…a_s)`: the level-`(b; a)` coefficients of all iterates, plus 0.
pub fn coeff_set(a: &PetTuple, key: &ExpKey) -> Result<CoeffSet> {
    let vs = a.polys.iter().map(|p| p.coeff(key)).collect::<Result<Vec<_>>>()?;
    Ok(CoeffSet::new(a.d, vs))
}

/// `R1 ~ R2`: `R2 = r·(R1 − u)` for some `u ∈ R1` and rational `r ≠ 0`.
pub fn equiv_sets(r1: &CoeffSet, r2: &CoeffSet) -> bool {
    if r1.len() != r2.len() {
        return false;
    }
    if r1.is_trivial() {
        return true;
    }
    for u in r1.vectors() {
        let shifted: Vec<QVec> = r1.vectors().map(|v| v.sub(u)).collect();
        let w = shifted.iter().find(|v| !v.is_zero()).expect("set has a nonzero element");
        for x in r2.nonzero() {
            if let Some(r) = x.ratio_to(w) {
                if r1.affine(u, &r) == r2.vectors {
                    return true;
                }
            }
        }
    }
    false
}

/// `R1 ≲ R2`: `R1 ⊆ R3` for some `R3` with `R2 ~ R3`.
pub fn lesssim(r1: &CoeffSet, r2: &CoeffSet) -> bool {
    let Some(x) = r1.nonzero().next() else {
        return true;
    };
    for u in r2.vectors() {
        for v in r2.vectors() {
            let w = v.sub(u);
            if w.is_zero() {
                continue;
            }
            if let Some(r) = x.ratio_to(&w) {
                let r3 = r2.affine(u, &r);
                if r1.vectors.is_subset(&r3) {
                    return true;
                }
            }
        }
    }
    false
}

fn coeff_index(a: &PetTuple) -> HashMap<Mono, Vec<QVec>> {
    let mut idx: HashMap<Mono, Vec<QVec>> = HashMap::new();
    for p in &a.polys {
        for (m, c) in p.monos() {
            idx.entry(m.clone()).or_default().push(c.clone());
        }
    }
    idx
}

/// Checks `R_{A*}(b; a_1…a_{s+1}) ≲ R_A(b + a_{s+1}; a_1…a_s)` for every key of
/// `A* = ∂_ρ A` with not all exponents zero. Returns the first failing key.
pub fn check_coefficient_tracking(a: &PetTuple, a_star: &PetTuple) -> Result<()> {
    let l = a.l;
    let s = a.s;
    if a_star.s != s + 1 || a_star.l != l {
        return Err(Error::Shape("A* must come from one vdC step on A".into()));
    }
    let before = coeff_index(a);
    let after = coeff_index(a_star);
    for (m, vs) in &after {
        if m.is_zero() {
            continue;
        }
        let mut src = m.0[..l * (s + 1)].to_vec();
        for r in 0..l {
            src[r] += m.0[l * (s + 1) + r];
        }
        let r_star = CoeffSet::new(a.d, vs.iter().cloned());
        let r = CoeffSet::new(a.d, before.get(&Mono(src)).into_iter().flatten().cloned());
        if !lesssim(&r_star, &r) {
            let key = ExpKey::from_mono(m, l, s + 1);
            return Err(Error::Invariant(format!(
                "coefficient tracking fails at b={:?} a={:?}: {r_star} is not ≲ {r}",
                key.b, key.a
            )));
        }
    }
    Ok(())
}

/// One step of a PET run; `rho` is 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub rho: usize,
    pub case: Option<Case>,
    pub tuple: PetTuple,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetRun {
    pub target: usize,
    pub initial: PetTuple,
    /// The tuple after dimension increment, when one was needed.
    pub incremented: Option<PetTuple>,
    pub trace: Vec<TraceStep>,
    pub final_tuple: PetTuple,
}

impl PetRun {
    pub fn rhos(&self) -> Vec<usize> {
        self.trace.iter().map(|t| t.rho).collect()
    }

    pub fn case_1c_fired(&self) -> bool {
        self.trace.iter().any(|t| t.case == Some(Case::C1c))
    }

    pub fn trace_json(&self) -> serde_json::Value {
        let steps: Vec<_> = self
            .trace
            .iter()
            .map(|t| {
                let mut v = json!({ "rho": t.rho + 1, "tuple": t.tuple.to_json() });
                if let Some(c) = t.case {
                    v["case"] = json!(c.to_string());
                }
                v
            })
            .collect();
        serde_json::Value::Array(steps)
    }
}

#[derive(Clone, Debug)]
pub struct PetOptions<'a> {
    /// Caller-chosen `ρ` sequence (0-based); automatic selection continues
    /// if the tuple is still nonlinear afterwards.
    pub manual: Option<&'a [usize]>,
    pub step_cap: usize,
    /// Largest admissible `ℓ`. Tuples roughly double with every step, so
    /// families needing many steps are out of reach of exact computation.
    pub size_cap: usize,
}

impl Default for PetOptions<'_> {
    fn default() -> Self {
        PetOptions { manual: None, step_cap: 64, size_cap: 8192 }
    }
}

fn check_size(t: &PetTuple, step: usize, opts: &PetOptions<'_>) -> Result<()> {
    if t.ell() > opts.size_cap {
        return Err(Error::SizeCapExceeded { cap: opts.size_cap, step, ell: t.ell() });
    }
    Ok(())
}

fn step_checked(cur: &PetTuple, rho: usize, base: usize) -> Result<PetTuple> {
    let next = match vdc_step(cur, rho)? {
        StepOutcome::Tuple(t) => t,
        StepOutcome::Exhausted => {
            return Err(Error::Precondition(format!("∂_{} removes every iterate", rho + 1)));
        }
    };
    next.check_nondegenerate()
        .map_err(|e| Error::Invariant(format!("vdC step produced a degenerate tuple: {e}")))?;
    check_coefficient_tracking(cur, &next)?;
    if !next.is_standard_for(base) {
        return Err(Error::Precondition(format!(
            "∂_{} does not leave the tuple standard for f{}",
            rho + 1,
            base + 1
        )));
    }
    Ok(next)
}

/// PET induction for the function `f_base`: dimension increment if the
/// tuple is only semi-standard, then vdC steps until the degree is 1.
///
/// Every step is checked for non-degeneracy, standardness and coefficient
/// tracking; automatic steps must also strictly decrease the weight.
pub fn run_pet(a: &PetTuple, base: usize, opts: &PetOptions<'_>) -> Result<PetRun> {
    a.check_nondegenerate()?;
    if !a.is_semistandard_for(base) {
        return Err(Error::Precondition(format!("tuple is not semi-standard for f{}", base + 1)));
    }
    let incremented = if a.is_standard_for(base) { None } else { Some(dimension_increment(a, base)?) };
    let mut cur = incremented.clone().unwrap_or_else(|| a.clone());
    let mut trace = Vec::new();

    if let Some(manual) = opts.manual {
        for &rho in manual {
            if cur.degree() <= 1 {
                return Err(Error::Precondition("manual ρ sequence continues past degree 1".into()));
            }
            cur = step_checked(&cur, rho, base)?;
            check_size(&cur, trace.len() + 1, opts)?;
            trace.push(TraceStep { rho, case: None, tuple: cur.clone() });
        }
    }

    while cur.degree() > 1 {
        if trace.len() >= opts.step_cap {
            return Err(Error::StepCapExceeded(opts.step_cap));
        }
        let Selection::Step { rho, case } = select_rho(&cur, base)? else {
            break;
        };
        let fr = frame(&cur, base)?;
        let d_bound = cur.degree();
        let before = weight_with_order(&cur, d_bound, &fr.perm);
        let next = step_checked(&cur, rho, base)
            .map_err(|e| Error::Invariant(format!("automatic step ∂_{} (case {case}): {e}", rho + 1)))?;
        let after = weight_with_order(&next, d_bound, &fr.perm);
        if !weight_less(&after, &before) {
            return Err(Error::Invariant(format!(
                "weight did not decrease at automatic step ∂_{} (case {case})",
                rho + 1
            )));
        }
        check_size(&next, trace.len() + 1, opts)?;
        cur = next;
        trace.push(TraceStep { rho, case: Some(case), tuple: cur.clone() });
    }

    Ok(PetRun { target: base, initial: a.clone(), incremented, trace, final_tuple: cur })
}

/// Canonical form for comparing tuples up to essential equality: the sorted
/// multiset of `n`-parts (h-only additive constants discarded).
pub fn essential_signature(polys: &[VPoly]) -> Vec<String> {
    let mut v: Vec<String> = polys
        .iter()
        .map(|p| serde_json::to_string(&p.n_part().to_literal()).unwrap())
        .collect();
    v.sort();
    v
}
