//! From a linear PET-tuple to characteristic-factor descriptors: the linear
//! stage `c_{i,m}(h)`, the groups `G(c(h))` and their spans `H_{i,m}`, the
//! condition set `R`, seminorm descriptors and joint-ergodicity certificates.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde_json::json;

use crate::error::{Error, Result};
use crate::exactmath::{lattice_contains, lattice_sum, saturate, Lattice, QVec};
use crate::petcore::{check_family_nondegenerate, lesssim, equiv_sets, run_pet, CoeffSet, PetOptions, PetRun, PetTuple};
use crate::polyalg::{ExpKey, Mono, VPoly};

/// `c(h)`: the `L` coefficient columns (each an `h`-only `Q^d` polynomial) of
/// a linear iterate `c(h)·n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCoeff {
    pub columns: Vec<VPoly>,
}

impl LinearCoeff {
    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(VPoly::is_zero)
    }

    fn neg(&self) -> LinearCoeff {
        LinearCoeff { columns: self.columns.iter().map(VPoly::neg).collect() }
    }

    fn sub(&self, o: &LinearCoeff) -> Result<LinearCoeff> {
        let columns = self.columns.iter().zip(&o.columns).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(LinearCoeff { columns })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.columns.iter().map(VPoly::to_json).collect())
    }
}

impl fmt::Display for LinearCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.columns.len() == 1 {
            return write!(f, "{}", self.columns[0]);
        }
        let cols: Vec<String> = self.columns.iter().map(|c| format!("[{c}]")).collect();
        write!(f, "({})", cols.join(", "))
    }
}

/// The linear stage for one target: `t_i = ℓ` coefficients `c_{i,m}` and the
/// offsets `r_m(h)` of the final tuple's iterates `d_m(h)·n + r_m(h)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearStage {
    pub target: usize,
    pub l: usize,
    pub s: usize,
    pub d: usize,
    pub cs: Vec<LinearCoeff>,
    pub offsets: Vec<VPoly>,
    /// Slot whose iterate anchors the differences, or `None` when the target
    /// already sits at iterate 0 and `c_m = d_m`.
    pub anchor: Option<usize>,
}

impl LinearStage {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "target": self.target + 1,
            "anchor": self.anchor.map(|m| m + 1),
            "c": self.cs.iter().map(LinearCoeff::to_json).collect::<Vec<_>>(),
            "offsets": self.offsets.iter().map(VPoly::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Splits `q(n; h) = Σ_r n_r·d_r(h) + r(h)` into its `n`-linear columns.
fn linear_columns(q: &VPoly) -> Result<LinearCoeff> {
    let l = q.l();
    let mut columns: Vec<Vec<(Mono, QVec)>> = vec![Vec::new(); l];
    for (m, c) in q.monos() {
        match m.n_degree(l) {
            0 => {}
            1 => {
                let r = m.b(l).iter().position(|&x| x == 1).unwrap();
                let mut h = m.0.clone();
                h[..l].iter_mut().for_each(|x| *x = 0);
                columns[r].push((Mono(h), c.clone()));
            }
            _ => return Err(Error::Precondition("tuple is not linear".into())),
        }
    }
    let columns = columns
        .into_iter()
        .map(|ts| {
            let terms = ts.into_iter().map(|(m, c)| (ExpKey::from_mono(&m, l, q.s()), c));
            VPoly::from_terms(l, q.s(), q.d(), terms)
        })
        .collect::<Result<_>>()?;
    Ok(LinearCoeff { columns })
}

/// Writes each final iterate as `d_m(h)·n + r_m(h)` and forms the `c_{i,m}`.
///
/// When the latest vdC step subtracted a pure slot of the target, the target
/// occupies iterate 0 and the linear averages are controlled by `c_m = d_m`.
/// Otherwise the differences are taken against the first pure target slot
/// `m₀`: `c_{m₀} = −d_{m₀}` and `c_m = d_m − d_{m₀}`.
pub fn extract_linear(fin: &PetTuple, target: usize) -> Result<LinearStage> {
    if fin.degree() > 1 {
        return Err(Error::Precondition(format!("final tuple has degree {} > 1", fin.degree())));
    }
    let ds = fin.polys.iter().map(linear_columns).collect::<Result<Vec<_>>>()?;
    let offsets: Vec<VPoly> = fin.polys.iter().map(VPoly::const_part).collect();
    let (cs, anchor) = if fin.vanished == Some(target) {
        (ds, None)
    } else {
        let m0 = *fin
            .pure_slots(target)
            .first()
            .ok_or_else(|| Error::Precondition(format!("no pure slot for f{}", target + 1)))?;
        let cs = ds
            .iter()
            .enumerate()
            .map(|(m, dm)| if m == m0 { Ok(dm.neg()) } else { dm.sub(&ds[m0]) })
            .collect::<Result<Vec<_>>>()?;
        (cs, Some(m0))
    };
    if let Some(m) = cs.iter().position(LinearCoeff::is_zero) {
        return Err(Error::Invariant(format!("c_{} vanishes identically", m + 1)));
    }
    Ok(LinearStage { target, l: fin.l, s: fin.s, d: fin.d, cs, offsets, anchor })
}

/// `G(c(h))`: saturation of the evaluated columns.
pub fn group_at(c: &LinearCoeff, h: &[Vec<BigInt>]) -> Result<Lattice> {
    let d = c.columns.first().map_or(0, VPoly::d);
    let vs: Vec<QVec> = c
        .columns
        .iter()
        .map(|col| {
            let l = col.l();
            let v = col.eval(&vec![BigInt::from(0); l], h)?;
            Ok(QVec(v.into_iter().map(crate::exactmath::Rat::from_integer).collect()))
        })
        .collect::<Result<_>>()?;
    saturate(d, &vs)
}

/// `H = span_Q{G(c(h)) : h} ∩ Z^d`, computed from the coefficient vectors of
/// every column.
pub fn span_h(c: &LinearCoeff) -> Result<Lattice> {
    if c.is_zero() {
        return Err(Error::Precondition("span of the zero coefficient".into()));
    }
    let d = c.columns[0].d();
    let vs: Vec<QVec> = c.columns.iter().flat_map(|col| col.monos().map(|(_, v)| v.clone())).collect();
    saturate(d, &vs)
}

/// The vectors `b_{i,v}` and `b_{i,v} − b_{i',v}` (nonzero, `|v| > 0`).
pub fn condition_vectors(family: &[VPoly]) -> Result<BTreeSet<QVec>> {
    if family.iter().any(|p| p.s() != 0) {
        return Err(Error::Shape("family members must not depend on h".into()));
    }
    check_family_nondegenerate(family)?;
    let keys: BTreeSet<Mono> = family.iter().flat_map(|p| p.monos().map(|(m, _)| m.clone())).collect();
    let mut out = BTreeSet::new();
    for m in keys.iter().filter(|m| !m.is_zero()) {
        let bs: Vec<QVec> = family.iter().map(|p| p.coeff_mono(m)).collect();
        for (i, bi) in bs.iter().enumerate() {
            out.insert(bi.clone());
            for bj in &bs[i + 1..] {
                out.insert(bi.sub(bj));
                out.insert(bj.sub(bi));
            }
        }
    }
    out.retain(|v| !v.is_zero());
    Ok(out)
}

/// Lattice view of `R`: `{G(r) : r ∈ R}` without repetitions.
pub fn condition_lattices(r: &BTreeSet<QVec>) -> Result<Vec<Lattice>> {
    let mut out: Vec<Lattice> = Vec::new();
    for v in r {
        let g = saturate(v.dim(), std::slice::from_ref(v))?;
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Multiplicity {
    Finite(u32),
    Infinite,
}

impl Multiplicity {
    fn merge(self, o: Multiplicity) -> Multiplicity {
        match (self, o) {
            (Multiplicity::Finite(a), Multiplicity::Finite(b)) => Multiplicity::Finite(a + b),
            _ => Multiplicity::Infinite,
        }
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplicity::Finite(n) => write!(f, "^{n}"),
            Multiplicity::Infinite => write!(f, "^inf"),
        }
    }
}

/// `Z_{H_1^{×n_1}, …}` as a deduplicated list of lattices with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeminormDescriptor {
    pub target: usize,
    pub factors: Vec<(Lattice, Multiplicity)>,
}

impl SeminormDescriptor {
    pub fn new(target: usize, items: impl IntoIterator<Item = (Lattice, Multiplicity)>) -> Result<Self> {
        let mut factors: Vec<(Lattice, Multiplicity)> = Vec::new();
        for (h, mult) in items {
            if h.is_zero() {
                return Err(Error::Invariant("descriptor lattices must be nonzero".into()));
            }
            match factors.iter_mut().find(|(g, _)| *g == h) {
                Some((_, m)) => *m = m.merge(mult),
                None => factors.push((h, mult)),
            }
        }
        Ok(SeminormDescriptor { target, factors })
    }

    pub fn lattices(&self) -> Vec<&Lattice> {
        self.factors.iter().map(|(h, _)| h).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let fs: Vec<_> = self
            .factors
            .iter()
            .map(|(h, m)| json!({ "lattice": h.to_json(), "text": h.to_string(), "multiplicity": m.to_string() }))
            .collect();
        json!({ "target": self.target + 1, "text": self.to_string(), "factors": fs })
    }
}

impl fmt::Display for SeminormDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|(h, m)| format!("{h}{m}")).collect();
        write!(f, "Z_{{{}}}", parts.join(", "))
    }
}

/// A full-rank factor removed because two other listed factors already sum
/// to the full lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simplification {
    pub removed: Lattice,
    pub witnesses: (Lattice, Lattice),
}

impl Simplification {
    pub fn reason(&self) -> String {
        format!(
            "dropped {} since {} + {} = {}",
            self.removed, self.witnesses.0, self.witnesses.1, self.removed
        )
    }
}

/// Drops each full-rank factor for which two non-full-rank factors of the
/// descriptor sum to full rank; every removal is reported.
pub fn simplify(desc: &SeminormDescriptor) -> Result<(SeminormDescriptor, Vec<Simplification>)> {
    let small: Vec<&Lattice> = desc.factors.iter().map(|(h, _)| h).filter(|h| !h.is_full()).collect();
    let mut kept = Vec::new();
    let mut notes = Vec::new();
    'outer: for (h, m) in &desc.factors {
        if h.is_full() {
            for (i, a) in small.iter().enumerate() {
                for b in &small[i + 1..] {
                    if lattice_sum(a, b)?.is_full() {
                        notes.push(Simplification { removed: h.clone(), witnesses: ((*a).clone(), (*b).clone()) });
                        continue 'outer;
                    }
                }
            }
        }
        kept.push((h.clone(), *m));
    }
    Ok((SeminormDescriptor::new(desc.target, kept)?, notes))
}

/// Prop-style coefficient control for one key `(r; a)` of the linear stage:
/// the set `U` of column-`r` coefficients of `h^a`, and every original
/// monomial `v` with `U ≲ R_v` (and whether even `U ~ R_v`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientCheck {
    pub column: usize,
    pub a: Vec<Vec<u32>>,
    pub u: CoeffSet,
    /// `(v, R_v, U ~ R_v)` for each `v` with `U ≲ R_v`.
    pub controlled_by: Vec<(Vec<u32>, CoeffSet, bool)>,
}

impl CoefficientCheck {
    pub fn holds(&self) -> bool {
        self.controlled_by.iter().any(|(v, _, _)| v.iter().any(|&x| x > 0))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let by: Vec<_> = self
            .controlled_by
            .iter()
            .map(|(v, r, eq)| json!({ "v": v, "R": r.to_string(), "relation": if *eq { "~" } else { "≲" } }))
            .collect();
        json!({ "column": self.column + 1, "a": self.a, "U": self.u.to_string(), "controlled_by": by })
    }
}

/// Coefficient sets of `start` (an `h`-free tuple) by `n`-exponent.
fn coefficient_sets_by_degree(start: &[VPoly]) -> Vec<(Vec<u32>, CoeffSet)> {
    let d = start[0].d();
    let l = start[0].l();
    let keys: BTreeSet<Mono> = start.iter().flat_map(|p| p.monos().map(|(m, _)| m.clone())).collect();
    keys.iter()
        .filter(|m| !m.is_zero())
        .map(|m| (m.b(l).to_vec(), CoeffSet::new(d, start.iter().map(|p| p.coeff_mono(m)))))
        .collect()
}

/// Checks every key of the linear stage against the coefficient sets of the
/// tuple the PET run started from.
pub fn coefficient_control(stage: &LinearStage, start: &[VPoly]) -> Vec<CoefficientCheck> {
    let sets = coefficient_sets_by_degree(start);
    let mut out = Vec::new();
    for r in 0..stage.l {
        let keys: BTreeSet<Mono> =
            stage.cs.iter().flat_map(|c| c.columns[r].monos().map(|(m, _)| m.clone())).collect();
        for key in keys {
            let u = CoeffSet::new(stage.d, stage.cs.iter().map(|c| c.columns[r].coeff_mono(&key)));
            let controlled_by = sets
                .iter()
                .filter(|(_, rv)| lesssim(&u, rv))
                .map(|(v, rv)| (v.clone(), rv.clone(), equiv_sets(&u, rv)))
                .collect();
            let a = ExpKey::from_mono(&key, stage.l, stage.s).a;
            out.push(CoefficientCheck { column: r, a, u, controlled_by });
        }
    }
    out
}

/// Everything derived for one target function.
#[derive(Clone, Debug)]
pub struct TargetReport {
    pub run: PetRun,
    pub stage: LinearStage,
    /// `H_{i,m}` for each slot of the final tuple.
    pub h: Vec<Lattice>,
    pub raw: SeminormDescriptor,
    pub simplified: SeminormDescriptor,
    pub simplifications: Vec<Simplification>,
    pub control: Vec<CoefficientCheck>,
    /// Present when the run needed a dimension increment and some `H` is
    /// only of finite index over a smaller group (single-factor caveat).
    pub notes: Vec<String>,
}

impl TargetReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "target": self.stage.target + 1,
            "dimension_increment": self.run.incremented.is_some(),
            "rho": self.run.rhos().iter().map(|r| r + 1).collect::<Vec<_>>(),
            "trace": self.run.trace_json(),
            "linear_stage": self.stage.to_json(),
            "H": self.h.iter().map(|h| json!({ "lattice": h.to_json(), "text": h.to_string() })).collect::<Vec<_>>(),
            "descriptor_raw": self.raw.to_json(),
            "descriptor_simplified": self.simplified.to_json(),
            "simplifications": self.simplifications.iter().map(Simplification::reason).collect::<Vec<_>>(),
            "coefficient_control": self.control.iter().map(CoefficientCheck::to_json).collect::<Vec<_>>(),
            "notes": self.notes,
        })
    }
}

/// Runs PET for `target`, extracts the linear stage and builds descriptors.
pub fn analyze_target(family: &[VPoly], target: usize, opts: &PetOptions<'_>) -> Result<TargetReport> {
    if target >= family.len() {
        return Err(Error::IndexOutOfRange { index: target + 1, len: family.len() });
    }
    let a = PetTuple::from_family(family)?;
    let run = run_pet(&a, target, opts)?;
    let stage = extract_linear(&run.final_tuple, target)?;
    let h = stage.cs.iter().map(span_h).collect::<Result<Vec<_>>>()?;
    let raw = SeminormDescriptor::new(target, h.iter().map(|x| (x.clone(), Multiplicity::Infinite)))?;
    let (simplified, simplifications) = simplify(&raw)?;
    let start = run.incremented.as_ref().unwrap_or(&run.initial);
    let control = coefficient_control(&stage, &start.polys);
    if let Some(bad) = control.iter().find(|c| !c.holds()) {
        return Err(Error::Invariant(format!(
            "coefficient control fails for column {} at a={:?}: U = {}",
            bad.column + 1,
            bad.a,
            bad.u
        )));
    }
    let mut notes = Vec::new();
    if h.len() == 1 {
        notes.push("single-factor descriptor: replacing H by a finite-index subgroup is not justified here".into());
    }
    Ok(TargetReport { run, stage, h, raw, simplified, simplifications, control, notes })
}

/// Sharpened descriptors are sound when each of their lattices contains some
/// `G(r)`, `r ∈ R`.
pub fn descriptor_sound(desc: &SeminormDescriptor, r_lattices: &[Lattice]) -> Result<bool> {
    for h in desc.lattices() {
        let mut ok = false;
        for g in r_lattices {
            if lattice_contains(h, g)? {
                ok = true;
                break;
            }
        }
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionStatus {
    Required,
    Verified,
    Failed,
    UnverifiableSymbolically,
}

impl fmt::Display for ConditionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionStatus::Required => "required",
            ConditionStatus::Verified => "verified",
            ConditionStatus::Failed => "failed",
            ConditionStatus::UnverifiableSymbolically => "unverifiable-symbolically",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    /// The action of `(T_g)_{g ∈ H}` is ergodic.
    SubgroupErgodic(Lattice),
    /// The product system along the family is ergodic.
    ProductErgodic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condition {
    pub kind: ConditionKind,
    pub status: ConditionStatus,
    pub detail: Option<String>,
}

impl Condition {
    pub fn name(&self) -> String {
        match &self.kind {
            ConditionKind::SubgroupErgodic(h) => format!("(i) action of {h} ergodic"),
            ConditionKind::ProductErgodic => "(ii) product system ergodic".to_string(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "name": self.name(), "status": self.status.to_string() });
        if let ConditionKind::SubgroupErgodic(h) = &self.kind {
            v["lattice"] = h.to_json();
        }
        if let Some(d) = &self.detail {
            v["detail"] = json!(d);
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub k: usize,
    pub l: usize,
    pub d: usize,
    pub r_vectors: BTreeSet<QVec>,
    pub r_lattices: Vec<Lattice>,
    pub conditions: Vec<Condition>,
}

impl Certificate {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "k": self.k,
            "L": self.l,
            "d": self.d,
            "R_vectors": self.r_vectors.iter().map(QVec::to_strings).collect::<Vec<_>>(),
            "R_lattices": self.r_lattices.iter().map(|h| json!({ "lattice": h.to_json(), "text": h.to_string() })).collect::<Vec<_>>(),
            "conditions": self.conditions.iter().map(Condition::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Sufficient conditions for joint ergodicity of the family, all `Required`.
pub fn certificate(family: &[VPoly]) -> Result<Certificate> {
    let r_vectors = condition_vectors(family)?;
    let r_lattices = condition_lattices(&r_vectors)?;
    let mut conditions: Vec<Condition> = r_lattices
        .iter()
        .map(|h| Condition { kind: ConditionKind::SubgroupErgodic(h.clone()), status: ConditionStatus::Required, detail: None })
        .collect();
    conditions.push(Condition { kind: ConditionKind::ProductErgodic, status: ConditionStatus::Required, detail: None });
    let p = &family[0];
    Ok(Certificate { k: family.len(), l: p.l(), d: p.d(), r_vectors, r_lattices, conditions })
}

/// Coarse descriptor `{G(r)^{×∞} : r ∈ R}` shared by all targets.
pub fn coarse_descriptor(target: usize, r_lattices: &[Lattice]) -> Result<SeminormDescriptor> {
    SeminormDescriptor::new(target, r_lattices.iter().map(|h| (h.clone(), Multiplicity::Infinite)))
}

/// The complete factors report for a family.
#[derive(Clone, Debug)]
pub struct FactorsReport {
    pub targets: Vec<TargetReport>,
    pub coarse: SeminormDescriptor,
    pub certificate: Certificate,
}

impl FactorsReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "targets": self.targets.iter().map(TargetReport::to_json).collect::<Vec<_>>(),
            "descriptor_coarse": self.coarse.to_json(),
            "certificate": self.certificate.to_json(),
        })
    }
}

pub fn analyze_family(family: &[VPoly]) -> Result<FactorsReport> {
    analyze_family_with(family, &PetOptions::default())
}

/// [`analyze_family`] with explicit PET options for every target.
pub fn analyze_family_with(family: &[VPoly], opts: &PetOptions<'_>) -> Result<FactorsReport> {
    let certificate = certificate(family)?;
    let targets = (0..family.len())
        .map(|i| analyze_target(family, i, opts))
        .collect::<Result<Vec<_>>>()?;
    for t in &targets {
        if !descriptor_sound(&t.simplified, &certificate.r_lattices)? {
            return Err(Error::Invariant(format!("descriptor for f{} is not controlled by R", t.stage.target + 1)));
        }
    }
    let coarse = coarse_descriptor(0, &certificate.r_lattices)?;
    Ok(FactorsReport { targets, coarse, certificate })
}
