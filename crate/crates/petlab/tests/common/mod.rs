//! Random integer-valued families for the property suites.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use petlab::exactmath::QVec;
use petlab::petcore::check_family_nondegenerate;
use petlab::polyalg::{ExpKey, VPoly};

/// Coefficients of `C(x, k) = x(x−1)⋯(x−k+1)/k!` in the power basis.
fn binomial_power_basis(k: u32) -> Vec<BigRational> {
    let mut c = vec![BigRational::one()];
    for j in 0..k {
        // multiply by (x − j)
        let mut next = vec![BigRational::zero(); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * BigRational::from_integer(j.into());
        }
        c = next;
    }
    let fact: BigInt = (1..=k).map(BigInt::from).product();
    c.into_iter().map(|a| a / BigRational::from_integer(fact.clone())).collect()
}

/// One term `c·Π_r C(n_r, v_r)·e_coord`.
#[derive(Clone, Debug)]
pub struct BinomialTerm {
    pub coord: usize,
    pub v: Vec<u32>,
    pub c: i64,
}

/// The integer-valued polynomial `Σ c·Π_r C(n_r, v_r)·e_coord`.
pub fn binomial_poly(l: usize, d: usize, terms: &[BinomialTerm]) -> VPoly {
    let mut out = Vec::new();
    for t in terms {
        // Expand the product over variables into monomials.
        let mut acc: Vec<(Vec<u32>, BigRational)> = vec![(vec![0; l], BigRational::from_integer(t.c.into()))];
        for (r, &vr) in t.v.iter().enumerate() {
            let basis = binomial_power_basis(vr);
            let mut next = Vec::new();
            for (e, a) in &acc {
                for (i, b) in basis.iter().enumerate() {
                    if b.is_zero() {
                        continue;
                    }
                    let mut e2 = e.clone();
                    e2[r] = i as u32;
                    next.push((e2, a * b));
                }
            }
            acc = next;
        }
        for (e, a) in acc {
            let mut coeff = QVec::zeros(d);
            coeff.0[t.coord] = a;
            out.push((ExpKey::new(e, vec![]), coeff));
        }
    }
    VPoly::from_terms(l, 0, d, out).expect("shapes agree")
}

fn exponent(l: usize, max_deg: u32) -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0..=max_deg, l).prop_filter("degree in 1..=max", move |v| {
        let s: u32 = v.iter().sum();
        (1..=max_deg).contains(&s)
    })
}

pub fn poly_of_shape(l: usize, d: usize, max_deg: u32, max_terms: usize) -> impl Strategy<Value = VPoly> {
    let term = (0..d, exponent(l, max_deg), prop_oneof![-3i64..=-1, 1i64..=3])
        .prop_map(|(coord, v, c)| BinomialTerm { coord, v, c });
    proptest::collection::vec(term, 1..=max_terms).prop_map(move |ts| binomial_poly(l, d, &ts))
}

/// Non-degenerate families with `L ≤ 2`, `d ≤ 2`, `k ≤ 3`, degree `≤ 3`.
pub fn family() -> impl Strategy<Value = Vec<VPoly>> {
    (1usize..=2, 1usize..=2, 1usize..=3)
        .prop_flat_map(|(l, d, k)| proptest::collection::vec(poly_of_shape(l, d, 3, 3), k))
        .prop_filter("non-degenerate", |f| check_family_nondegenerate(f).is_ok())
}

pub fn big(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| x.into()).collect()
}
