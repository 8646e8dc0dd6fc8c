//! The worked example family `p1 = (n^2+n)e1`, `p2 = n^2 e2` differenced by
//! hand: every intermediate tuple is compared with the worked lists up to
//! essential equality.

use petlab::petcore::{essential_signature, run_pet, vdc_step, PetOptions, PetTuple, StepOutcome};
use petlab::polyalg::VPoly;
use petlab::polyexpr::parse_poly;

fn family() -> PetTuple {
    let p1 = parse_poly("(n^2+n)*e1", 1, 0, 2).unwrap();
    let p2 = parse_poly("n^2*e2", 1, 0, 2).unwrap();
    PetTuple::from_family(&[p1, p2]).unwrap()
}

fn polys(exprs: &[&str], s: usize) -> Vec<VPoly> {
    exprs.iter().map(|e| parse_poly(e, 1, s, 2).unwrap()).collect()
}

fn step(a: &PetTuple, rho1: usize) -> PetTuple {
    match vdc_step(a, rho1 - 1).unwrap() {
        StepOutcome::Tuple(t) => t,
        StepOutcome::Exhausted => panic!("unexpected exhaustion"),
    }
}

fn assert_ess(t: &PetTuple, expect: &[VPoly]) {
    assert_eq!(t.ell(), expect.len(), "length of {t}");
    assert_eq!(essential_signature(&t.polys), essential_signature(expect), "tuple {t}");
}

const E: &str = "[1,-1]";

fn f1_chain() -> [Vec<VPoly>; 3] {
    let e = E;
    [
        polys(&[&format!("n^2*{e} + n*e1"), &format!("n^2*{e} + (2*h1+1)*n*e1"), "2*h1*n*e2"], 1),
        polys(
            &[
                &format!("(n^2+2*h1*n)*{e} + (1-2*h1)*n*e1"),
                &format!("(n^2+2*h1*n)*{e} + n*e1"),
                &format!("(n^2+2*(h1+h2)*n)*{e} + (1-2*h1)*n*e1"),
                &format!("(n^2+2*(h1+h2)*n)*{e} + n*e1"),
            ],
            2,
        ),
        polys(
            &[
                "-2*h1*n*e1",
                &format!("2*h2*n*{e} - 2*h1*n*e1"),
                &format!("2*h2*n*{e}"),
                &format!("2*h3*n*{e} - 2*h1*n*e1"),
                &format!("2*h3*n*{e}"),
                &format!("2*(h2+h3)*n*{e} - 2*h1*n*e1"),
                &format!("2*(h2+h3)*n*{e}"),
            ],
            3,
        ),
    ]
}

fn f2_chain() -> [Vec<VPoly>; 3] {
    let e = E;
    [
        polys(&[&format!("-n^2*{e} - n*e1"), "2*h1*n*e1", &format!("-n^2*{e} - n*e1 + 2*h1*n*e2")], 1),
        polys(
            &[
                &format!("-n^2*{e} - (2*h1+1)*n*e1"),
                &format!("-(n^2+2*h1*n)*{e} - n*e1"),
                &format!("-(n^2+2*h2*n)*{e} - (2*h1+1)*n*e1"),
                &format!("-(n^2+2*(h1+h2)*n)*{e} - n*e1"),
            ],
            2,
        ),
        polys(
            &[
                "2*h1*n*e2",
                &format!("-2*h2*n*{e}"),
                &format!("-2*h2*n*{e} + 2*h1*n*e2"),
                &format!("-2*h3*n*{e}"),
                &format!("-2*h3*n*{e} + 2*h1*n*e2"),
                &format!("-2*(h2+h3)*n*{e}"),
                &format!("-2*(h2+h3)*n*{e} + 2*h1*n*e2"),
            ],
            3,
        ),
    ]
}

#[test]
fn chain_for_f1_step_by_step() {
    let a = family();
    let expect = f1_chain();
    let t1 = step(&a, 2);
    assert_ess(&t1, &expect[0]);
    let t2 = step(&t1, 3);
    assert_ess(&t2, &expect[1]);
    let t3 = step(&t2, 2);
    assert_ess(&t3, &expect[2]);
    assert_eq!(t3.degree(), 1);
    assert!(t3.is_standard_for(0));
}

#[test]
fn chain_for_f2_step_by_step() {
    let a = family();
    let expect = f2_chain();
    let t1 = step(&a, 1);
    assert_ess(&t1, &expect[0]);
    let t2 = step(&t1, 2);
    assert_ess(&t2, &expect[1]);
    let t3 = step(&t2, 1);
    assert_ess(&t3, &expect[2]);
    assert!(t3.is_standard_for(1));
}

#[test]
fn manual_runs_reproduce_the_chains() {
    let a = family();
    for (base, rhos, expect) in [(0usize, [2usize, 3, 2], f1_chain()), (1, [1, 2, 1], f2_chain())] {
        let manual: Vec<usize> = rhos.iter().map(|r| r - 1).collect();
        let run = run_pet(&a, base, &PetOptions { manual: Some(&manual), ..PetOptions::default() }).unwrap();
        assert_eq!(run.trace.len(), 3);
        for (st, ex) in run.trace.iter().zip(&expect) {
            assert_ess(&st.tuple, ex);
        }
    }
}

#[test]
fn automatic_runs_reach_degree_one() {
    let a = family();
    for base in 0..2 {
        let run = run_pet(&a, base, &PetOptions::default()).unwrap();
        assert_eq!(run.final_tuple.degree(), 1);
        assert!(run.final_tuple.is_standard_for(base));
        assert!(run.incremented.is_none());
    }
    let run = run_pet(&a, 1, &PetOptions::default()).unwrap();
    assert_eq!(run.rhos(), vec![0, 1, 0]);
}
