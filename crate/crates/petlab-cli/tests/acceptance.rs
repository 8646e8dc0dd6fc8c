//! Acceptance run: one PASS/FAIL line per criterion, each timed against its
//! budget. Exits nonzero if any criterion that is expected to hold fails;
//! the random-family PET criterion is reported but known to be out of reach
//! (see the README).

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use petlab::exactmath::{lattice_member, saturate, saturate_int, Lattice, QVec};
use petlab::factors::{analyze_target, condition_lattices, condition_vectors, span_h, LinearCoeff, TargetReport};
use petlab::petcore::{
    check_family_nondegenerate, coeff_set, dimension_increment, equiv_sets, essential_signature, frame, k_reduction,
    lesssim, select_rho, vdc_step, weight_less, weight_with_order, CoeffSet, PetOptions, PetTuple, Selection,
    StepOutcome, ZeroTest,
};
use petlab::polyalg::{ExpKey, PolyLiteral, VPoly};
use petlab::polyexpr::parse_poly;
use petlab::simulate::{exp_sum, multi_average_norm, BoxRange, Mode, NumericBinding, PhasePoly};
use petlab::systems::{check_t1, check_t2, uniform_for, SymPhase, SystemLiteral, TorusSystem};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn petlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_petlab")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Result<Value, String> {
    serde_json::from_slice(&out.stdout).map_err(|e| format!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn eg1() -> Vec<VPoly> {
    ["(n^2+n)*e1", "n^2*e2"].iter().map(|e| parse_poly(e, 1, 0, 2).unwrap()).collect()
}

fn polys(exprs: &[String], s: usize) -> Vec<VPoly> {
    exprs.iter().map(|e| parse_poly(&e.replace('E', "[1,-1]"), 1, s, 2).unwrap()).collect()
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn big(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| x.into()).collect()
}

fn lat(vs: &[&[i64]]) -> Lattice {
    saturate_int(vs[0].len(), &vs.iter().map(|v| big(v)).collect::<Vec<_>>()).unwrap()
}

fn system(name: &str) -> TorusSystem {
    let text = std::fs::read_to_string(data(name)).unwrap();
    let lit: SystemLiteral = serde_json::from_str(&text).unwrap();
    TorusSystem::from_literal(&lit).unwrap()
}

/// The two hand-computed chains: `(target, ρ sequence, tuples after each step)`.
fn worked_chains() -> Vec<(usize, [usize; 3], [Vec<VPoly>; 3])> {
    let f1 = [
        polys(&strs(&["n^2*E + n*e1", "n^2*E + (2*h1+1)*n*e1", "2*h1*n*e2"]), 1),
        polys(
            &strs(&[
                "(n^2+2*h1*n)*E + (1-2*h1)*n*e1",
                "(n^2+2*h1*n)*E + n*e1",
                "(n^2+2*(h1+h2)*n)*E + (1-2*h1)*n*e1",
                "(n^2+2*(h1+h2)*n)*E + n*e1",
            ]),
            2,
        ),
        polys(
            &strs(&[
                "-2*h1*n*e1",
                "2*h2*n*E - 2*h1*n*e1",
                "2*h2*n*E",
                "2*h3*n*E - 2*h1*n*e1",
                "2*h3*n*E",
                "2*(h2+h3)*n*E - 2*h1*n*e1",
                "2*(h2+h3)*n*E",
            ]),
            3,
        ),
    ];
    let f2 = [
        polys(&strs(&["-n^2*E - n*e1", "2*h1*n*e1", "-n^2*E - n*e1 + 2*h1*n*e2"]), 1),
        polys(
            &strs(&[
                "-n^2*E - (2*h1+1)*n*e1",
                "-(n^2+2*h1*n)*E - n*e1",
                "-(n^2+2*h2*n)*E - (2*h1+1)*n*e1",
                "-(n^2+2*(h1+h2)*n)*E - n*e1",
            ]),
            2,
        ),
        polys(
            &strs(&[
                "2*h1*n*e2",
                "-2*h2*n*E",
                "-2*h2*n*E + 2*h1*n*e2",
                "-2*h3*n*E",
                "-2*h3*n*E + 2*h1*n*e2",
                "-2*(h2+h3)*n*E",
                "-2*(h2+h3)*n*E + 2*h1*n*e2",
            ]),
            3,
        ),
    ];
    vec![(1, [2, 3, 2], f1), (2, [1, 2, 1], f2)]
}

fn golden_chains() -> Outcome {
    for (target, rhos, expect) in worked_chains() {
        let rho_arg = rhos.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",");
        let out = petlab(&["pet", "--family", &data("eg1.json"), "--target", &target.to_string(), "--manual-rho", &rho_arg]);
        ensure(out.status.code() == Some(0), format!("pet exited with {:?}", out.status.code()))?;
        let v = json_of(&out)?;
        let trace = v["runs"][0]["trace"].as_array().ok_or("no trace")?;
        ensure(trace.len() == 3, format!("trace has {} steps", trace.len()))?;
        for (k, (st, ex)) in trace.iter().zip(&expect).enumerate() {
            let got: Vec<VPoly> = st["tuple"]["polys"]
                .as_array()
                .ok_or("no polys")?
                .iter()
                .map(|p| VPoly::from_literal(&serde_json::from_value::<PolyLiteral>(p.clone()).unwrap()).unwrap())
                .collect();
            ensure(got.len() == ex.len(), format!("f{target} step {}: {} iterates, expected {}", k + 1, got.len(), ex.len()))?;
            ensure(
                essential_signature(&got) == essential_signature(ex),
                format!("f{target} step {} differs from the worked tuple", k + 1),
            )?;
        }
    }
    Ok("six tuples reproduced through `pet --manual-rho`".into())
}

fn manual(target: usize, rhos: &[usize]) -> TargetReport {
    let m: Vec<usize> = rhos.iter().map(|r| r - 1).collect();
    analyze_target(&eg1(), target, &PetOptions { manual: Some(&m), ..PetOptions::default() }).unwrap()
}

fn coeff_strings(exprs: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = exprs
        .iter()
        .map(|e| LinearCoeff { columns: vec![parse_poly(&e.replace('E', "[1,-1]"), 1, 3, 2).unwrap()] }.to_string())
        .collect();
    out.sort();
    out
}

fn sorted_cs(rep: &TargetReport) -> Vec<String> {
    let mut out: Vec<String> = rep.stage.cs.iter().map(|c| c.to_string()).collect();
    out.sort();
    out
}

fn golden_linear_stage() -> Outcome {
    let f1 = manual(0, &[2, 3, 2]);
    let f2 = manual(1, &[1, 2, 1]);
    let c1 = coeff_strings(&[
        "-2*h1*e1",
        "2*h2*E",
        "-2*h1*e1 + 2*h2*E",
        "2*h3*E",
        "-2*h1*e1 + 2*h3*E",
        "2*(h2+h3)*E",
        "-2*h1*e1 + 2*(h2+h3)*E",
    ]);
    let c2 = coeff_strings(&[
        "2*h1*e2",
        "-2*h2*E + 2*h1*e2",
        "-2*h2*E",
        "-2*h3*E + 2*h1*e2",
        "-2*h3*E",
        "-2*(h2+h3)*E + 2*h1*e2",
        "-2*(h2+h3)*E",
    ]);
    ensure(sorted_cs(&f1) == c1, "c_{1,m} list differs")?;
    ensure(sorted_cs(&f2) == c2, "c_{2,m} list differs")?;
    let v = |x: i64, y: i64| QVec::from_ints(&[x, y]);
    let table = |rep: &TargetReport| -> BTreeMap<Vec<u32>, (CoeffSet, Vec<(u32, bool)>)> {
        rep.control
            .iter()
            .map(|c| {
                let a: Vec<u32> = c.a.iter().map(|x| x[0]).collect();
                (a, (c.u.clone(), c.controlled_by.iter().map(|(w, _, eq)| (w[0], *eq)).collect()))
            })
            .collect()
    };
    let (t1, t2) = (table(&f1), table(&f2));
    let mut checks = 0;
    let e1 = vec![1, 0, 0];
    let (u, by) = t1.get(&e1).ok_or("U_11(1,0,0) missing")?;
    ensure(*u == CoeffSet::new(2, [v(-2, 0)]) && by.contains(&(1, true)), "U_11(1,0,0) ~ R_1 fails")?;
    checks += 1;
    for a in [vec![0, 1, 0], vec![0, 0, 1]] {
        let (u, by) = t1.get(&a).ok_or("U_11 entry missing")?;
        ensure(*u == CoeffSet::new(2, [v(2, -2)]) && by.contains(&(2, false)), format!("U_11{a:?} ≲ R_2 fails"))?;
        checks += 1;
    }
    let r2 = CoeffSet::new(2, [v(1, 0), v(0, 1)]);
    let (u, by) = t2.get(&e1).ok_or("U_21(1,0,0) missing")?;
    ensure(*u == CoeffSet::new(2, [v(0, 2)]) && by.iter().any(|&(w, _)| w == 2), "U_21(1,0,0) ≲ R_2 fails")?;
    ensure(lesssim(u, &r2), "U_21(1,0,0) not ≲ R_2")?;
    checks += 1;
    for a in [vec![0, 1, 0], vec![0, 0, 1]] {
        let (u, by) = t2.get(&a).ok_or("U_21 entry missing")?;
        ensure(*u == CoeffSet::new(2, [v(-2, 2)]) && by.iter().any(|&(w, _)| w == 2), format!("U_21{a:?} ≲ R_2 fails"))?;
        checks += 1;
    }
    ensure(equiv_sets(&CoeffSet::new(2, [v(-2, 2), v(0, 2)]), &r2), "{-2e, 2e2} ~ R_2 fails")?;
    Ok(format!("14 coefficients and {checks} coefficient-set verdicts"))
}

fn golden_factor_data() -> Outcome {
    let (z2, ze, ze1, ze2) = (Lattice::full(2), lat(&[&[1, -1]]), lat(&[&[1, 0]]), lat(&[&[0, 1]]));
    let f1 = manual(0, &[2, 3, 2]);
    let f2 = manual(1, &[1, 2, 1]);
    let h1 = vec![ze1.clone(), z2.clone(), ze.clone(), z2.clone(), ze.clone(), z2.clone(), ze.clone()];
    let h2 = vec![ze2.clone(), ze.clone(), z2.clone(), ze.clone(), z2.clone(), ze.clone(), z2.clone()];
    ensure(f1.h == h1, "H_{1,m} differ")?;
    ensure(f2.h == h2, "H_{2,m} differ")?;
    ensure(f1.simplified.lattices() == vec![&ze1, &ze], format!("descriptor for f1 is {}", f1.simplified))?;
    ensure(f2.simplified.lattices() == vec![&ze2, &ze], format!("descriptor for f2 is {}", f2.simplified))?;
    let mut view = condition_lattices(&condition_vectors(&eg1()).unwrap()).unwrap();
    view.sort();
    let mut expect = vec![ze1, ze2, ze];
    expect.sort();
    ensure(view == expect, "R lattice view differs")?;
    Ok(format!("H lattices; {} and {}; R view {{Ze1, Ze2, Ze}}", f1.simplified, f2.simplified))
}

fn golden_reductions() -> Outcome {
    let p: Vec<VPoly> = (1..=8).map(|i| parse_poly(&format!("{i}*n"), 1, 0, 1).unwrap()).collect();
    let z = VPoly::zero(1, 0, 1);
    let m = vec![
        vec![z.clone(), p[0].clone(), p[1].clone(), p[2].clone()],
        vec![p[3].clone(), z.clone(), z.clone(), p[4].clone()],
        vec![z.clone(), z.clone(), p[5].clone(), p[6].clone()],
        vec![z.clone(), z.clone(), z.clone(), p[7].clone()],
    ];
    let expect = [
        vec![
            vec![p[0].clone(), p[1].clone(), p[2].clone()],
            vec![z.clone(), p[5].clone(), p[6].clone()],
            vec![z.clone(), z.clone(), p[7].clone()],
        ],
        vec![vec![p[5].clone(), p[6].clone()], vec![z.clone(), p[7].clone()]],
        vec![vec![p[7].clone()]],
        vec![],
    ];
    for (i, ex) in expect.iter().enumerate() {
        ensure(k_reduction(&m, i + 1, ZeroTest::Literal) == *ex, format!("{}-reduction differs", i + 1))?;
    }
    let c = LinearCoeff {
        columns: vec![
            parse_poly("h1_1*e1 - 3*h1_1*h1_2*e2 + h1_1^2*e3 + 7*h1_1*h1_2*e4", 2, 1, 4).unwrap(),
            parse_poly("h1_1*e2 + (-h1_2-2*h1_2^2)*e3 + h1_1^2*e4", 2, 1, 4).unwrap(),
        ],
    };
    let listed = lat(&[
        &[1, 0, 0, 0],
        &[0, 1, 0, 0],
        &[0, 0, -1, 0],
        &[0, -3, 0, 7],
        &[0, 0, 1, 0],
        &[0, 0, 0, 1],
        &[0, 0, -2, 0],
    ]);
    let mut cols: Vec<Vec<BigInt>> = Vec::new();
    for x in -3i64..=3 {
        for y in -3i64..=3 {
            let h = vec![big(&[x, y])];
            for col in &c.columns {
                cols.push(col.eval(&big(&[0, 0]), &h).unwrap());
            }
        }
    }
    ensure(saturate_int(4, &cols).unwrap() == listed, "sampled columns span a different group")?;
    ensure(span_h(&c).unwrap() == listed, "symbolic span differs")?;
    Ok(format!("i-reductions 1..4; sampled span = {listed}"))
}

/// Seeded random integer-valued families with the stated shape bounds.
fn random_family(rng: &mut ChaCha8Rng) -> Vec<VPoly> {
    let l = rng.gen_range(1..=2usize);
    let d = rng.gen_range(1..=2usize);
    let k = rng.gen_range(1..=3usize);
    let vars: Vec<&str> = if l == 1 { vec!["n"] } else { vec!["n1", "n2"] };
    (0..k)
        .map(|_| {
            let terms: Vec<String> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let deg = rng.gen_range(1..=3);
                    let mono: Vec<&str> = (0..deg).map(|_| vars[rng.gen_range(0..l)]).collect();
                    let c = rng.gen_range(1..=3) * if rng.gen_bool(0.5) { 1 } else { -1 };
                    format!("{c}*{}*e{}", mono.join("*"), rng.gen_range(1..=d))
                })
                .collect();
            parse_poly(&terms.join(" + "), l, 0, d).unwrap()
        })
        .collect()
}

/// The coefficient relation between a tuple and its vdC image, recomputed
/// key by key.
fn tracking_holds(a: &PetTuple, a_star: &PetTuple) -> bool {
    let keys: BTreeSet<ExpKey> = a_star.polys.iter().flat_map(|p| p.terms().into_iter().map(|(k, _)| k)).collect();
    keys.into_iter().filter(|k| !k.to_mono().is_zero()).all(|k| {
        let last = &k.a[k.a.len() - 1];
        let b: Vec<u32> = (0..a.l).map(|r| k.b[r] + last[r]).collect();
        let src = ExpKey::new(b, k.a[..k.a.len() - 1].to_vec());
        lesssim(&coeff_set(a_star, &k).unwrap(), &coeff_set(a, &src).unwrap())
    })
}

/// Largest tuple the random-family sweep will difference further.
const SWEEP_BUDGET: usize = 64;

struct Sweep {
    families: usize,
    completed: usize,
    runs: usize,
    runs_completed: usize,
    steps: usize,
    largest_final: usize,
}

fn pet_sweep() -> Result<Sweep, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sw = Sweep { families: 0, completed: 0, runs: 0, runs_completed: 0, steps: 0, largest_final: 0 };
    let step_cap = PetOptions::default().step_cap;
    while sw.families < 200 {
        let f = random_family(&mut rng);
        if check_family_nondegenerate(&f).is_err() {
            continue;
        }
        sw.families += 1;
        let a = PetTuple::from_family(&f).unwrap();
        let mut all = true;
        for t in 0..f.len() {
            sw.runs += 1;
            let mut cur = if a.is_standard_for(t) { a.clone() } else { dimension_increment(&a, t).unwrap() };
            let mut steps = 0;
            while cur.degree() > 1 && cur.ell() <= SWEEP_BUDGET && steps < step_cap {
                let Selection::Step { rho, .. } = select_rho(&cur, t).map_err(|e| e.to_string())? else { break };
                let StepOutcome::Tuple(next) = vdc_step(&cur, rho).map_err(|e| e.to_string())? else {
                    return Err("selected step exhausted the tuple".into());
                };
                let fr = frame(&cur, t).map_err(|e| e.to_string())?;
                let deg = cur.degree();
                let fam: Vec<String> = f.iter().map(|p| p.to_string()).collect();
                ensure(tracking_holds(&cur, &next), format!("coefficient tracking fails on {fam:?}"))?;
                ensure(next.check_nondegenerate().is_ok(), format!("degenerate step on {fam:?}"))?;
                ensure(next.is_standard_for(t), format!("non-standard step on {fam:?}"))?;
                ensure(
                    weight_less(&weight_with_order(&next, deg, &fr.perm), &weight_with_order(&cur, deg, &fr.perm)),
                    format!("weight does not decrease on {fam:?}"),
                )?;
                cur = next;
                steps += 1;
                sw.steps += 1;
            }
            if cur.degree() == 1 && cur.is_standard_for(t) {
                sw.runs_completed += 1;
                sw.largest_final = sw.largest_final.max(cur.ell());
            } else {
                all = false;
            }
        }
        if all {
            sw.completed += 1;
        }
    }
    Ok(sw)
}

fn int_poly(coeffs: &[i64]) -> VPoly {
    let expr: Vec<String> = coeffs.iter().enumerate().map(|(i, c)| format!("({c})*n^{i}")).collect();
    parse_poly(&expr.join(" + "), 1, 0, 1).unwrap()
}

fn uniformity_oracle() -> Outcome {
    let half = SymPhase::rational(petlab::exactmath::rat(1, 2));
    ensure(uniform_for(&half, &int_poly(&[0, 0, 1])).unwrap(), "e(1/2) should be uniform for n^2")?;
    ensure(!uniform_for(&half, &int_poly(&[0, 1, 1])).unwrap(), "e(1/2) should not be uniform for n^2+n")?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut zero, mut max_gap) = (0, 0.0f64);
    const N: i64 = 1_000_000;
    for _ in 0..50 {
        let q = rng.gen_range(2..=12i64);
        let c = loop {
            let c = rng.gen_range(1..q);
            if num_integer::gcd(c, q) == 1 {
                break c;
            }
        };
        let deg = rng.gen_range(1..=4usize);
        let mut a: Vec<i64> = (0..=deg).map(|_| rng.gen_range(-5..=5)).collect();
        if a[deg] == 0 {
            a[deg] = 1;
        }
        let p = int_poly(&a);
        let exact = uniform_for(&SymPhase::rational(petlab::exactmath::rat(c, q)), &p).unwrap();
        let terms = a.iter().enumerate().map(|(i, &ai)| (vec![i as u32], petlab::exactmath::rat(c * ai, q))).collect();
        let z = exp_sum(&PhasePoly::new(1, terms, vec![]).unwrap(), &BoxRange::new(0, N).unwrap()).unwrap();
        let numeric_zero = z.norm() < 1e-4;
        if exact {
            zero += 1;
            max_gap = max_gap.max(z.norm());
        }
        ensure(exact == numeric_zero, format!("e({c}/{q}) with {a:?}: exact {exact}, |avg| = {:.3e}", z.norm()))?;
    }
    Ok(format!("n^2 / n^2+n exact; 50 random phases agree at N=1e6 ({zero} uniform, largest uniform |avg| {max_gap:.1e})"))
}

fn panel(d: usize, bound: i64) -> Vec<Vec<Vec<i64>>> {
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        out = out.into_iter().flat_map(|p| (-bound..=bound).map(move |k| [p.clone(), vec![k]].concat())).collect();
    }
    out.into_iter().filter(|ks| ks.iter().any(|&k| k != 0)).map(|ks| ks.into_iter().map(|k| vec![k]).collect()).collect()
}

fn worst_fourier(sys: &TorusSystem, family: &[VPoly]) -> Result<(f64, usize), String> {
    let binding = NumericBinding::for_system(sys, &BTreeMap::new(), BoxRange::new(0, 200_000).unwrap()).unwrap();
    let chars = panel(family.len(), 3);
    let mut worst: f64 = 0.0;
    for ch in &chars {
        worst = worst.max(multi_average_norm(sys, &binding, family, ch, Mode::Fourier).map_err(|e| e.to_string())?);
    }
    Ok((worst, chars.len()))
}

fn theorem_t1() -> Outcome {
    let out = petlab(&["check", "--family", &data("linear.json"), "--system", &data("independent.json"), "--theorem", "t1"]);
    ensure(out.status.code() == Some(0), "t1 on independent irrationals did not exit 0")?;
    ensure(json_of(&out)?["conclusion"] == "jointly ergodic", "t1 conclusion is not jointly ergodic")?;
    let sys = system("independent.json");
    let p = parse_poly("n", 1, 0, 1).unwrap();
    ensure(check_t1(&sys, &p).unwrap().jointly_ergodic, "library check_t1 disagrees")?;
    let family: Vec<VPoly> = ["n*e1", "n*e2"].iter().map(|e| parse_poly(e, 1, 0, 2).unwrap()).collect();
    let (worst, count) = worst_fourier(&sys, &family)?;
    ensure(worst <= 0.05, format!("largest norm {worst:.3e} > 0.05"))?;

    let out = petlab(&["check", "--family", &data("square_plus_n.json"), "--system", &data("half.json"), "--theorem", "t1"]);
    ensure(out.status.code() == Some(2), "counterexample did not exit 2")?;
    let v = json_of(&out)?;
    let cond = v["conditions"].as_array().unwrap().iter().find(|c| c["name"].as_str().unwrap().starts_with("(ii)")).ok_or("no (ii)")?;
    ensure(cond["holds"] == false, "(ii) holds on the counterexample")?;
    let witness = &cond["witness"]["eigenvalues"][0];
    ensure(witness["phase"] == "1/2", format!("witness phase {}", witness["phase"]))?;
    let out = petlab(&[
        "simulate", "--family", &data("square_plus_n.json"), "--system", &data("half.json"), "--characters", "1",
        "--schedule", "200000", "--samples", "4",
    ]);
    ensure(out.status.code() == Some(0), "simulate failed")?;
    let norm = json_of(&out)?["series"][0]["series"][0]["norm_fourier"].as_f64().ok_or("no norm")?;
    ensure((norm - 1.0).abs() < 1e-12, format!("counterexample norm {norm}"))?;
    Ok(format!("jointly ergodic; {count} characters ≤ {worst:.1e}; counterexample fails (ii) with λ = e(1/2) = −1, norm {norm}"))
}

fn theorem_t2() -> Outcome {
    let out = petlab(&["check", "--family", &data("eg1.json"), "--system", &data("independent.json"), "--theorem", "t2"]);
    ensure(out.status.code() == Some(0), "t2 on Eg1 did not exit 0")?;
    let sys = system("independent.json");
    let rep = check_t2(&sys, &eg1()).unwrap();
    ensure(rep.jointly_ergodic, "library check_t2 is not conclusive")?;
    let (worst, count) = worst_fourier(&sys, &eg1())?;
    ensure(worst <= 0.05, format!("largest norm {worst:.3e} > 0.05"))?;
    Ok(format!("all conditions verified; {count} characters ≤ {worst:.1e} at N=2e5"))
}

fn rank(rows: &[Vec<BigInt>]) -> usize {
    use num_traits::Zero;
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let (a, b) = (m[r][c].clone(), m[i][c].clone());
                for j in 0..ncols {
                    m[i][j] = &m[i][j] * &a - &m[r][j] * &b;
                }
            }
        }
        r += 1;
    }
    r
}

fn lattice_suite() -> Outcome {
    ensure(saturate_int(2, &[big(&[2, 4])]).unwrap().to_string() == "Z(1,2)", "saturate{(2,4)} is not Z(1,2)")?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut points = 0;
    for _ in 0..200 {
        let d = rng.gen_range(1..=3usize);
        let gens: Vec<Vec<BigInt>> =
            (0..rng.gen_range(0..=3)).map(|_| big(&(0..d).map(|_| rng.gen_range(-3..=3)).collect::<Vec<_>>())).collect();
        let l = saturate_int(d, &gens).unwrap();
        ensure(saturate_int(d, l.basis()).unwrap() == l, "saturation is not idempotent")?;
        let rats: Vec<QVec> = gens.iter().map(|g| QVec(g.iter().map(|x| petlab::exactmath::Rat::from_integer(x * 2) / petlab::exactmath::Rat::from_integer(3.into())).collect())).collect();
        ensure(saturate(d, &rats).unwrap() == l, "rescaled generators give another basis")?;
        let mut shuffled: Vec<Vec<BigInt>> = gens.iter().rev().map(|g| g.iter().map(|x| -x).collect()).collect();
        if gens.len() >= 2 {
            shuffled.push(gens[0].iter().zip(&gens[1]).map(|(a, b)| a + b).collect());
        }
        ensure(saturate_int(d, &shuffled).unwrap().basis() == l.basis(), "HNF is not canonical")?;
        let mut pt = vec![-2i64; d];
        loop {
            let p = big(&pt);
            let mut with = gens.clone();
            with.push(p.clone());
            ensure(lattice_member(&l, &p).unwrap() == (rank(&with) == rank(&gens)), format!("membership of {pt:?}"))?;
            points += 1;
            let mut r = 0;
            while r < d {
                pt[r] += 1;
                if pt[r] <= 2 {
                    break;
                }
                pt[r] = -2;
                r += 1;
            }
            if r == d {
                break;
            }
        }
    }
    Ok(format!("200 random lattices, {points} boxed membership checks"))
}

fn report(id: u32, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let res = f();
    let el = t0.elapsed();
    let ok = res.is_ok() && el < budget;
    let detail = match res {
        Ok(s) => s,
        Err(s) => s,
    };
    let over = if el < budget { String::new() } else { format!("; over the {:.0?} budget", budget) };
    println!("criterion {id}: {} ({detail}{over}; {:.2?})", if ok { "PASS" } else { "FAIL" }, el);
    ok
}

fn main() {
    let s = Duration::from_secs;
    let mut held = true;
    held &= report(1, s(1), golden_chains);
    held &= report(2, s(60), golden_linear_stage);
    held &= report(3, s(60), golden_factor_data);
    held &= report(4, s(60), golden_reductions);

    // Known red: tuples roughly double per step, so many random families
    // cannot reach degree 1 in feasible memory. Invariants are still checked
    // on every executed step and a violation fails the run.
    let t0 = Instant::now();
    match pet_sweep() {
        Ok(sw) => {
            let el = t0.elapsed();
            let all = sw.completed == sw.families && el < s(60);
            println!(
                "criterion 5: {} ({}/{} families completed, {}/{} target runs reached a standard degree-1 tuple, differencing only tuples with ℓ ≤ {SWEEP_BUDGET}; \
                 invariants held on all {} executed steps; largest completed tuple ℓ = {}; {:.2?})",
                if all { "PASS" } else { "FAIL" },
                sw.completed,
                sw.families,
                sw.runs_completed,
                sw.runs,
                sw.steps,
                sw.largest_final,
                el
            );
        }
        Err(e) => {
            println!("criterion 5: FAIL (invariant violated: {e}; {:.2?})", t0.elapsed());
            held = false;
        }
    }

    held &= report(6, s(30), uniformity_oracle);
    held &= report(7, s(120), theorem_t1);
    held &= report(8, s(120), theorem_t2);
    held &= report(9, s(5), lattice_suite);
    if !held {
        std::process::exit(1);
    }
}
