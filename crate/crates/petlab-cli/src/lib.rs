//! Job specifications, the batch runner and report serialization behind the
//! `petlab` binary.
//!
//! All indices in job files and reports (targets, `ρ`) are 1-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use petlab::factors::{analyze_family_with, analyze_target};
use petlab::petcore::{check_family_nondegenerate, run_pet, PetOptions, PetTuple};
use petlab::polyalg::{PolyLiteral, VPoly};
use petlab::polyexpr::parse_poly;
use petlab::simulate::{convergence_probe, parse_value, BoxRange, NumericBinding};
use petlab::systems::{check_t1, check_t2, period_box_size, product_rational_order, SystemLiteral, TorusSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Pet,
    Factors,
    Check,
    Simulate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Theorem {
    T1,
    T2,
}

/// One family member: an infix expression or a polynomial literal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolyEntry {
    Expr(String),
    Literal(PolyLiteral),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
    pub polys: Vec<PolyEntry>,
}

impl FamilySpec {
    pub fn polys(&self) -> Result<Vec<VPoly>> {
        if self.polys.is_empty() {
            bail!("family is empty");
        }
        self.polys
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let p = match e {
                    PolyEntry::Expr(s) => parse_poly(s, self.l, 0, self.d)?,
                    PolyEntry::Literal(lit) => VPoly::from_literal(lit)?,
                };
                if p.l() != self.l || p.d() != self.d || p.s() != 0 {
                    bail!("polynomial {} does not have shape L={}, s=0, d={}", i + 1, self.l, self.d);
                }
                if !p.integer_valued() {
                    bail!("polynomial {} is not integer-valued", i + 1);
                }
                Ok(p)
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_rho: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<Theorem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_start: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bind: BTreeMap<String, String>,
    /// Character panel: each entry gives `k_1…k_k`, each `k_i ∈ Z^m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characters: Option<Vec<Vec<Vec<i64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: Command,
    pub family: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemLiteral>,
    #[serde(default)]
    pub options: JobOptions,
}

impl JobSpec {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("job specs serialize")
    }

    fn system(&self) -> Result<TorusSystem> {
        let lit = self.system.as_ref().ok_or_else(|| anyhow!("command {:?} needs a system", self.command))?;
        Ok(TorusSystem::from_literal(lit)?)
    }
}

fn json_error(what: &str, e: serde_json::Error) -> anyhow::Error {
    anyhow!("{what}: line {}, column {}: {e}", e.line(), e.column())
}

/// Parses and validates a job: schema, integer-valuedness, and
/// non-degeneracy for the commands that need it.
pub fn parse_jobspec(text: &str) -> Result<JobSpec> {
    let spec: JobSpec = serde_json::from_str(text).map_err(|e| json_error("invalid job spec", e))?;
    validate(&spec)?;
    Ok(spec)
}

pub fn parse_family(text: &str) -> Result<FamilySpec> {
    let fam: FamilySpec = serde_json::from_str(text).map_err(|e| json_error("invalid family file", e))?;
    fam.polys()?;
    Ok(fam)
}

pub fn parse_system(text: &str) -> Result<SystemLiteral> {
    let lit: SystemLiteral = serde_json::from_str(text).map_err(|e| json_error("invalid system file", e))?;
    TorusSystem::from_literal(&lit)?;
    Ok(lit)
}

pub fn validate(spec: &JobSpec) -> Result<()> {
    let polys = spec.family.polys()?;
    if spec.command != Command::Simulate {
        check_family_nondegenerate(&polys)?;
    }
    let o = &spec.options;
    if let Some(t) = o.target {
        if t == 0 || t > polys.len() {
            bail!("target {t} out of range 1..={}", polys.len());
        }
    }
    if o.manual_rho.as_ref().is_some_and(|r| r.contains(&0)) {
        bail!("manual rho indices are 1-based");
    }
    match spec.command {
        Command::Check => {
            spec.system()?;
            if o.theorem.is_none() {
                bail!("check needs a theorem (t1 or t2)");
            }
        }
        Command::Simulate => {
            spec.system()?;
        }
        Command::Pet | Command::Factors => {}
    }
    Ok(())
}

/// Outcome of a job: the structured report, its text rendering and the
/// process exit code (0 success, 2 failed mathematical conditions).
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub json: Value,
    pub text: String,
    pub exit_code: i32,
    /// Side outputs such as CSV, written by the caller.
    pub csv: Option<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Canonical serialization; JSON objects have sorted keys, so identical
/// inputs give identical bytes.
pub fn emit_report(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json).expect("reports serialize");
            s.push('\n');
            s.into_bytes()
        }
        Format::Text => report.text.clone().into_bytes(),
    }
}

pub fn run(spec: &JobSpec) -> Result<Report> {
    validate(spec)?;
    match spec.command {
        Command::Pet => run_pet_job(spec),
        Command::Factors => run_factors(spec),
        Command::Check => run_check(spec),
        Command::Simulate => run_simulate(spec),
    }
}

fn family_echo(spec: &JobSpec, polys: &[VPoly]) -> Value {
    json!({
        "L": spec.family.l,
        "d": spec.family.d,
        "k": polys.len(),
        "polys": polys.iter().map(|p| json!({ "text": p.to_string(), "literal": p.to_json() })).collect::<Vec<_>>(),
    })
}

fn pet_options(o: &JobOptions) -> PetOptions<'static> {
    let d = PetOptions::default();
    PetOptions { manual: None, step_cap: o.step_cap.unwrap_or(d.step_cap), size_cap: o.size_cap.unwrap_or(d.size_cap) }
}

fn run_pet_job(spec: &JobSpec) -> Result<Report> {
    let polys = spec.family.polys()?;
    let a = PetTuple::from_family(&polys)?;
    let o = &spec.options;
    let manual: Option<Vec<usize>> = o.manual_rho.as_ref().map(|r| r.iter().map(|x| x - 1).collect());
    let targets: Vec<usize> = match o.target {
        Some(t) => vec![t - 1],
        None => (0..polys.len()).collect(),
    };
    let opts = PetOptions { manual: manual.as_deref(), ..pet_options(o) };
    let mut runs = Vec::new();
    let mut text = String::new();
    for t in targets {
        let run = run_pet(&a, t, &opts).with_context(|| format!("PET run for f{}", t + 1))?;
        writeln!(text, "target f{}: rho = {:?}", t + 1, run.rhos().iter().map(|r| r + 1).collect::<Vec<_>>())?;
        if let Some(inc) = &run.incremented {
            writeln!(text, "dimension increment:\n{inc}")?;
        }
        for st in &run.trace {
            let case = st.case.map(|c| format!(" (case {c})")).unwrap_or_default();
            writeln!(text, "d_{}{}:\n{}", st.rho + 1, case, st.tuple)?;
        }
        if run.case_1c_fired() {
            writeln!(text, "note: case 1c fired")?;
        }
        runs.push(json!({
            "target": t + 1,
            "dimension_increment": run.incremented.as_ref().map(PetTuple::to_json),
            "trace": run.trace_json(),
            "final": run.final_tuple.to_json(),
            "case_1c": run.case_1c_fired(),
        }));
    }
    let json = json!({ "command": "pet", "family": family_echo(spec, &polys), "runs": runs });
    Ok(Report { json, text, exit_code: 0, csv: None, warnings: vec![] })
}

fn run_factors(spec: &JobSpec) -> Result<Report> {
    let polys = spec.family.polys()?;
    let mut rep = analyze_family_with(&polys, &pet_options(&spec.options))?;
    if let Some(manual) = &spec.options.manual_rho {
        let t = spec.options.target.ok_or_else(|| anyhow!("manual rho needs a target"))? - 1;
        let m: Vec<usize> = manual.iter().map(|x| x - 1).collect();
        rep.targets[t] = analyze_target(&polys, t, &PetOptions { manual: Some(&m), ..pet_options(&spec.options) })?;
    }
    let mut text = String::new();
    for t in &rep.targets {
        let i = t.stage.target + 1;
        writeln!(text, "f{i}: rho = {:?}", t.run.rhos().iter().map(|r| r + 1).collect::<Vec<_>>())?;
        for (m, (c, h)) in t.stage.cs.iter().zip(&t.h).enumerate() {
            writeln!(text, "  c_{i},{} = {c}    H_{i},{} = {h}", m + 1, m + 1)?;
        }
        writeln!(text, "  raw: {}", t.raw)?;
        writeln!(text, "  simplified: {}", t.simplified)?;
        for s in &t.simplifications {
            writeln!(text, "    {}", s.reason())?;
        }
    }
    let lattices: Vec<String> = rep.certificate.r_lattices.iter().map(|h| h.to_string()).collect();
    writeln!(text, "R lattices: {}", lattices.join(", "))?;
    writeln!(text, "coarse: {}", rep.coarse)?;
    for c in &rep.certificate.conditions {
        writeln!(text, "  {}: {}", c.name(), c.status)?;
    }
    let mut json = rep.to_json();
    json["command"] = json!("factors");
    json["family"] = family_echo(spec, &polys);
    Ok(Report { json, text, exit_code: 0, csv: None, warnings: vec![] })
}

/// The common scalar `p` of a family `p·e_1, …, p·e_d` (or a single scalar).
fn t1_polynomial(polys: &[VPoly], d: usize) -> Result<VPoly> {
    if polys.len() == 1 && polys[0].d() == 1 {
        return Ok(polys[0].clone());
    }
    if polys.len() != d {
        bail!("theorem t1 needs one scalar polynomial or the family p*e_1..p*e_d");
    }
    let p = polys[0].component(0);
    for (i, q) in polys.iter().enumerate() {
        for j in 0..d {
            let c = q.component(j);
            if (i == j && c != p) || (i != j && !c.is_zero()) {
                bail!("family is not of the shape p*e_1..p*e_d");
            }
        }
    }
    Ok(p)
}

const PERIOD_WARNING: u64 = 100_000_000;

fn run_check(spec: &JobSpec) -> Result<Report> {
    let polys = spec.family.polys()?;
    let sys = spec.system()?;
    let mut warnings = Vec::new();
    let (json, text, ok) = match spec.options.theorem.unwrap() {
        Theorem::T1 => {
            let p = t1_polynomial(&polys, sys.action_dim())?;
            let size = period_box_size(&product_rational_order(&sys), &p)?;
            if size > PERIOD_WARNING.into() {
                warnings.push(format!("period box has {size} points; exact uniformity test may be slow"));
            }
            let rep = check_t1(&sys, &p)?;
            let mut text = String::new();
            for c in &rep.conditions {
                writeln!(text, "{}: {} ({})", c.name, if c.holds { "holds" } else { "FAILS" }, c.detail)?;
            }
            writeln!(text, "conclusion: {}", if rep.jointly_ergodic { "jointly ergodic" } else { "not jointly ergodic" })?;
            (rep.to_json(), text, rep.jointly_ergodic)
        }
        Theorem::T2 => {
            let rep = check_t2(&sys, &polys)?;
            let mut text = String::new();
            for c in &rep.certificate.conditions {
                let detail = c.detail.as_ref().map(|d| format!(" [{d}]")).unwrap_or_default();
                writeln!(text, "{}: {}{detail}", c.name(), c.status)?;
            }
            writeln!(text, "conclusion: {}", rep.conclusion())?;
            (rep.to_json(), text, rep.jointly_ergodic)
        }
    };
    let mut json = json;
    json["command"] = json!("check");
    json["family"] = family_echo(spec, &polys);
    json["warnings"] = json!(warnings);
    Ok(Report { json, text, exit_code: if ok { 0 } else { 2 }, csv: None, warnings })
}

/// Default panel: every function observed through the character `e(x_1)`.
fn default_characters(k: usize, m: usize) -> Vec<Vec<Vec<i64>>> {
    let mut unit = vec![0; m];
    unit[0] = 1;
    vec![vec![unit; k]]
}

fn run_simulate(spec: &JobSpec) -> Result<Report> {
    let polys = spec.family.polys()?;
    let sys = spec.system()?;
    let o = &spec.options;
    let overrides: BTreeMap<String, f64> =
        o.bind.iter().map(|(k, v)| Ok((k.clone(), parse_value(v)?))).collect::<Result<_>>()?;
    let schedule = o.schedule.clone().unwrap_or_else(|| vec![10_000, 100_000, 200_000]);
    let start = o.box_start.unwrap_or(0);
    let mut binding = NumericBinding::for_system(&sys, &overrides, BoxRange::new(start, start + 1)?)?;
    binding.seed = o.seed.unwrap_or(0);
    binding.samples = o.samples.unwrap_or(16);
    let panel = o.characters.clone().unwrap_or_else(|| default_characters(polys.len(), sys.torus_dim()));
    let mut series = Vec::new();
    let mut text = String::new();
    let mut csv = String::from("characters,N,norm_fourier,norm_mc,seed\n");
    writeln!(text, "binding: {:?}", binding.values)?;
    for ks in &panel {
        let s = convergence_probe(&sys, &binding, &polys, ks, &schedule)?;
        let label = ks.iter().map(|k| format!("{k:?}")).collect::<Vec<_>>().join(" ");
        writeln!(text, "characters {label}")?;
        for r in &s.rows {
            writeln!(text, "  N={:<10} fourier={:.6e} mc={:.6e}", r.n, r.fourier, r.montecarlo)?;
        }
        for line in s.to_csv().lines().skip(1) {
            writeln!(csv, "\"{label}\",{line}")?;
        }
        series.push(s.to_json());
    }
    let values = &binding.values;
    let json = json!({
        "command": "simulate",
        "family": family_echo(spec, &polys),
        "binding": values,
        "seed": binding.seed,
        "samples": binding.samples,
        "series": series,
    });
    Ok(Report { json, text, exit_code: 0, csv: Some(csv), warnings: vec![] })
}

/// Parses `2,3,2`.
pub fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse::<usize>().with_context(|| format!("bad index {x:?}"))).collect()
}

/// Parses `1e4,1e5,2e5` into box sizes.
pub fn parse_schedule(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|x| {
            let v: f64 = x.trim().parse().with_context(|| format!("bad box size {x:?}"))?;
            if v < 1.0 || v.fract() != 0.0 {
                bail!("box size {x:?} must be a positive integer");
            }
            Ok(v as i64)
        })
        .collect()
}

/// Parses `xi1=sqrt2,xi2=1.7320508`.
pub fn parse_bindings(s: &str) -> Result<BTreeMap<String, String>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("binding {kv:?} is not name=value"))?;
            parse_value(v)?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Parses characters `1,0;0,1` (functions separated by `;`, coordinates by
/// `,`), several tuples separated by `|`.
pub fn parse_characters(s: &str) -> Result<Vec<Vec<Vec<i64>>>> {
    s.split('|')
        .map(|tuple| {
            tuple
                .split(';')
                .map(|k| k.split(',').map(|x| x.trim().parse::<i64>().with_context(|| format!("bad character {x:?}"))).collect())
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EG: &str = r#"{"L":1,"d":2,"polys":["(n^2+n)*e1","n^2*e2"]}"#;

    fn spec(command: &str, extra: &str) -> String {
        format!(r#"{{"command":"{command}","family":{EG}{extra}}}"#)
    }

    #[test]
    fn parses_the_example_family() {
        let s = parse_jobspec(&spec("pet", "")).unwrap();
        let polys = s.family.polys().unwrap();
        assert_eq!((polys.len(), s.family.l, s.family.d), (2, 1, 2));
    }

    #[test]
    fn rejects_bad_specs() {
        let dup = r#"{"command":"factors","family":{"L":1,"d":1,"polys":["n^2","n^2"]}}"#;
        let err = parse_jobspec(dup).unwrap_err().to_string();
        assert!(err.contains("1 and 2"), "{err}");
        let frac = r#"{"command":"pet","family":{"L":1,"d":1,"polys":[{"L":1,"d":1,"terms":[{"b":[1],"coeff":["1/0"]}]}]}}"#;
        assert!(parse_jobspec(frac).unwrap_err().to_string().contains("zero denominator"));
        let half = r#"{"command":"pet","family":{"L":1,"d":1,"polys":["n/2"]}}"#;
        assert!(parse_jobspec(half).unwrap_err().to_string().contains("integer-valued"));
        let err = parse_jobspec("{\n  \"command\": \"pet\",\n  \"family\": 3\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(parse_jobspec(&spec("check", "")).is_err());
    }

    #[test]
    fn roundtrip() {
        let s = parse_jobspec(&spec("pet", r#","options":{"target":1,"manual_rho":[2,3,2]}"#)).unwrap();
        assert_eq!(parse_jobspec(&s.to_json_string()).unwrap(), s);
    }

    #[test]
    fn option_parsers() {
        assert_eq!(parse_index_list("2,3,2").unwrap(), vec![2, 3, 2]);
        assert_eq!(parse_schedule("1e4,2e5").unwrap(), vec![10_000, 200_000]);
        assert!(parse_schedule("0.5").is_err());
        assert_eq!(parse_characters("1;-1|0;2").unwrap(), vec![vec![vec![1], vec![-1]], vec![vec![0], vec![2]]]);
        assert_eq!(parse_bindings("xi1=sqrt2").unwrap()["xi1"], "sqrt2");
        assert!(parse_bindings("xi1").is_err());
    }

    #[test]
    fn empty_trace_and_stable_bytes() {
        let lin = r#"{"command":"pet","family":{"L":1,"d":1,"polys":["n"]},"options":{"target":1}}"#;
        let rep = run(&parse_jobspec(lin).unwrap()).unwrap();
        assert_eq!(rep.json["runs"][0]["trace"].to_string(), "[]");
        let s = parse_jobspec(&spec("factors", "")).unwrap();
        let a = emit_report(&run(&s).unwrap(), Format::Json);
        let b = emit_report(&run(&s).unwrap(), Format::Json);
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().contains("^inf"));
    }
}
