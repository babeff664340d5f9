use cfrelay_core::fme::{eliminate, project_onto, InequalitySystem, LinearInequality, RateVar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

const VARS: [RateVar; 3] = [RateVar::Rs1, RateVar::R011, RateVar::R012];

fn row() -> impl Strategy<Value = LinearInequality> {
    (proptest::collection::vec(-3i64..=3, 3), -5i64..=5, any::<bool>()).prop_map(|(c, k, upper)| {
        let terms: Vec<(RateVar, i64)> = VARS.iter().copied().zip(c).collect();
        if upper {
            LinearInequality::upper("r", &terms, k as f64, false)
        } else {
            LinearInequality::lower("r", &terms, k as f64, false)
        }
    })
}

fn system() -> impl Strategy<Value = InequalitySystem> {
    proptest::collection::vec(row(), 1..8).prop_map(|rows| {
        let mut s = InequalitySystem::new(VARS.to_vec());
        for r in rows {
            s.push(r);
        }
        s
    })
}

fn point() -> impl Strategy<Value = Vec<BigRational>> {
    proptest::collection::vec(-6i64..=6, 3).prop_map(|v| {
        let mut p = vec![BigRational::zero(); RateVar::ALL.len()];
        for (var, k) in VARS.iter().zip(v) {
            p[var.index()] = BigRational::new(BigInt::from(k), BigInt::from(2));
        }
        p
    })
}

/// A value for `var` that satisfies every row of `sys` at `p`, if the
/// tightest lower bound or the tightest upper bound works.
fn extension(sys: &InequalitySystem, p: &[BigRational], var: RateVar) -> Option<BigRational> {
    let mut lower: Option<BigRational> = None;
    let mut upper: Option<BigRational> = None;
    for r in &sys.rows {
        let le = r.to_le();
        let a = le.coeff(var).clone();
        if a.is_zero() {
            continue;
        }
        let rest = le
            .coeffs
            .iter()
            .zip(p)
            .enumerate()
            .filter(|(i, _)| *i != var.index())
            .fold(BigRational::zero(), |acc, (_, (c, x))| acc + c * x);
        let bound = (&le.constant - rest) / &a;
        if a.is_positive() {
            upper = Some(upper.map_or(bound.clone(), |u| u.min(bound)));
        } else {
            lower = Some(lower.map_or(bound.clone(), |l| l.max(bound)));
        }
    }
    let candidates = [lower, upper, Some(BigRational::zero())];
    candidates.into_iter().flatten().find(|t| {
        let mut q = p.to_vec();
        q[var.index()] = t.clone();
        sys.holds_at(&q)
    })
}

proptest! {
    #[test]
    fn elimination_is_sound(sys in system(), p in point(), k in 0usize..3) {
        let var = VARS[k];
        let e = eliminate(&sys, var);
        prop_assert!(e.rows.iter().all(|r| r.coeff(var).is_zero()));
        if sys.holds_at(&p) {
            prop_assert!(e.holds_at(&p));
        }
    }

    #[test]
    fn elimination_is_complete(sys in system(), p in point(), k in 0usize..3) {
        let var = VARS[k];
        let e = eliminate(&sys, var);
        if e.holds_at(&p) {
            prop_assert!(extension(&sys, &p, var).is_some());
        }
    }

    #[test]
    fn projection_to_one_variable(sys in system(), p in point()) {
        let proj = project_onto(&sys, &[RateVar::Rs1]);
        prop_assert!(proj.rows.iter().all(|r| r.coeff(RateVar::R011).is_zero() && r.coeff(RateVar::R012).is_zero()));
        if sys.holds_at(&p) {
            prop_assert!(proj.holds_at(&p));
        }
        if proj.holds_at(&p) {
            let after = eliminate(&sys, RateVar::R011);
            let q = extension(&after, &p, RateVar::R012);
            prop_assert!(q.is_some());
            let mut p2 = p.clone();
            p2[RateVar::R012.index()] = q.unwrap();
            prop_assert!(extension(&sys, &p2, RateVar::R011).is_some());
        }
    }
}
