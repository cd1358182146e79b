//! Randomized invariants of the expression core, the jet operators, the
//! parser, and the numeric tree.

use std::collections::BTreeMap;

use proptest::prelude::*;

use ebsym::oracle::{fd_crosscheck, NumExpr};
use ebsym::parse::{parse_expr, SymTable};
use ebsym::{Assumptions, Expr, Frame};

fn frame() -> Frame {
    Frame::yz()
        .with_dep("S", [false, true])
        .with_dep("R", [true, false])
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-6i64..=6).prop_map(Expr::int),
        ((-6i64..=6), (1i64..=4)).prop_map(|(n, d)| Expr::rat(n, d)),
        Just(Expr::var("y")),
        Just(Expr::var("z")),
        Just(Expr::param("k1")),
        Just(Expr::param("k2")),
        Just(Expr::jet("S", [0, 1])),
        Just(Expr::jet("R", [1, 0])),
        Just(Expr::apply("f", vec![0], vec![Expr::var("z")])),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            inner.clone().prop_map(|a| a.neg()),
            (inner, 1i64..=3).prop_map(|(a, n)| a.powi(n).unwrap()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 256,
        // failure seeds would land outside the crate in an integration test
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn normalization_is_idempotent(e in expr()) {
        // rebuilding from the canonical parts reproduces the same structure
        let mut rebuilt = Expr::from_poly(e.num().clone());
        for (base, &pow) in e.den() {
            // divide factor by factor so the denominator stays factored
            for _ in 0..pow {
                rebuilt = rebuilt.div(&Expr::from_poly(base.clone())).unwrap();
            }
        }
        prop_assert_eq!(rebuilt, e);
    }

    #[test]
    fn ring_laws(a in expr(), b in expr(), c in expr()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert!(a.mul(&b.add(&c)).equivalent(&a.mul(&b).add(&a.mul(&c))));
        prop_assert!(a.sub(&a).is_zero());
        prop_assert_eq!(a.neg().neg(), a.clone());
        prop_assert!(a.powi(2).unwrap().equivalent(&a.mul(&a)));
    }

    #[test]
    fn total_derivative_is_a_derivation(a in expr(), b in expr(), slot in 0usize..2) {
        let f = frame();
        let dab = a.mul(&b).total_derivative(slot, &f);
        let expected = a
            .total_derivative(slot, &f)
            .mul(&b)
            .add(&a.mul(&b.total_derivative(slot, &f)));
        prop_assert!(dab.equivalent(&expected));
        // linearity
        let dsum = a.add(&b).total_derivative(slot, &f);
        prop_assert!(dsum.equivalent(
            &a.total_derivative(slot, &f).add(&b.total_derivative(slot, &f))
        ));
    }

    #[test]
    fn mixed_derivatives_commute(a in expr()) {
        let f = frame();
        let dyz = a.total_derivative(0, &f).total_derivative(1, &f);
        let dzy = a.total_derivative(1, &f).total_derivative(0, &f);
        prop_assert!(dyz.equivalent(&dzy));
    }

    #[test]
    fn parser_round_trips_pretty_output(e in expr()) {
        let f = frame();
        let table = SymTable::new(f.clone());
        let back = parse_expr(&e.pretty(&f), &table, &Assumptions::new()).unwrap();
        prop_assert!(back.equivalent(&e));
    }

    #[test]
    fn numeric_derivative_matches_finite_differences(
        a in 0.3f64..1.4,
        b in -1.2f64..1.2,
        x0 in -0.7f64..0.7,
        y0 in -0.7f64..0.7,
    ) {
        let x = NumExpr::var("x");
        let y = NumExpr::var("y");
        let g = x
            .scale(a)
            .add(&y.scale(b))
            .sin()
            .mul(&x.scale(0.5).cosh())
            .add(&x.mul(&y).mul(&x));
        let env: BTreeMap<String, f64> =
            [("x".to_string(), x0), ("y".to_string(), y0)].into();
        for v in ["x", "y"] {
            let (analytic, fd) = fd_crosscheck(&g, v, &env, 1e-4).unwrap();
            let scale = analytic.abs().max(1.0);
            prop_assert!((analytic - fd).abs() / scale < 1e-7,
                "d/d{} analytic {} vs fd {}", v, analytic, fd);
        }
    }
}
