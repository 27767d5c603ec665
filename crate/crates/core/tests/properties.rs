//! Property-based tests: structural invariants that must hold for arbitrary
//! positive functions and admissible sequences, checked on the exactly-built
//! switch chain at (4,2).

use std::sync::OnceLock;

use proptest::prelude::*;

use mlsi_core::chain::{
    dirichlet_mlsi, entropy, expectation, rat_from_string, rat_to_string, regularity_constants,
    FiniteChain, StateFunction,
};
use mlsi_core::flows::telescope_check;
use mlsi_core::graph_space::enumerate_simple;
use mlsi_core::rat;
use mlsi_core::regularize::{is_r_regular, regularize, truncate_normalize};
use mlsi_core::switch_chain::build_qu;

fn chain() -> &'static FiniteChain {
    static CHAIN: OnceLock<FiniteChain> = OnceLock::new();
    CHAIN.get_or_init(|| build_qu(4, 2, 1_000_000).expect("(4,2) builds"))
}

fn positive_fn() -> impl Strategy<Value = StateFunction<f64>> {
    proptest::collection::vec(0.01f64..100.0, 90)
        .prop_map(|v| StateFunction::new(v).expect("positive values"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_and_dirichlet_are_nonnegative(f in positive_fn()) {
        let c = chain();
        prop_assert!(entropy(c, &f).unwrap() >= 0.0);
        prop_assert!(dirichlet_mlsi(c, &f).unwrap() >= 0.0);
    }

    #[test]
    fn entropy_vanishes_on_constants(v in 0.01f64..100.0) {
        let c = chain();
        let f = StateFunction::new(vec![v; c.n()]).unwrap();
        // Dirichlet differences cancel exactly; the entropy residual is
        // rounding noise at the scale of v log v.
        let scale = 1.0 + (v * v.ln()).abs();
        prop_assert!(entropy(c, &f).unwrap().abs() <= 1e-12 * scale);
        prop_assert_eq!(dirichlet_mlsi(c, &f).unwrap(), 0.0);
    }

    #[test]
    fn regularization_majorizes_and_is_regular(f in positive_fn(), r in 2.0f64..50.0) {
        let c = chain();
        let res = regularize(c, &f, r).unwrap();
        for (a, b) in res.f_reg.values().iter().zip(f.values()) {
            prop_assert!(*a >= *b * (1.0 - 1e-12));
        }
        prop_assert!(is_r_regular(c, &res.f_reg, r * (1.0 + 1e-12)));
        // Idempotence: regularizing the regularization changes nothing.
        let again = regularize(c, &res.f_reg, r).unwrap();
        prop_assert_eq!(again.f_reg.values(), res.f_reg.values());
    }

    #[test]
    fn upsilon_regularization_contracts_dirichlet(f in positive_fn()) {
        let c = chain();
        let ups = regularity_constants(c).upsilon_f();
        let res = regularize(c, &f, ups).unwrap();
        let lhs: f64 = dirichlet_mlsi(c, &res.f_reg).unwrap();
        let rhs: f64 = dirichlet_mlsi(c, &f).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn truncation_normalizes_mean_and_bounds_alpha(f in positive_fn(), c_param in 0.01f64..0.4) {
        let c = chain();
        let (g, alpha) = truncate_normalize(c, &f, c_param).unwrap();
        let mean: f64 = expectation(c, g.values());
        prop_assert!((mean - 1.0).abs() <= 1e-9);
        prop_assert!(alpha >= 0.0);
        // Truncation clamps below: no value of g drops under c.
        for &v in g.values() {
            prop_assert!(v >= c_param * (1.0 - 1e-12));
        }
    }

    #[test]
    fn telescoping_holds_with_generic_envelope(
        start in 0.1f64..10.0,
        steps in proptest::collection::vec(-1.0f64..=1.0, 1..12),
        r in prop_oneof![Just(2.0f64), Just(std::f64::consts::E), Just(10.0)],
    ) {
        let mut seq = vec![start];
        for s in &steps {
            let prev = *seq.last().unwrap();
            seq.push(prev * r.powf(*s));
        }
        let out = telescope_check(&seq, r).unwrap();
        // The check itself asserts admissibility; the factor must be finite
        // and nonnegative whenever the per-step sum is positive.
        if out.rhs_sum > 0.0 {
            prop_assert!(out.lhs / out.rhs_sum >= -1e-12);
            prop_assert!((out.lhs / out.rhs_sum).is_finite());
        }
    }

    #[test]
    fn rational_string_roundtrip(n in -10_000i64..10_000, d in 1i64..10_000) {
        let r = rat(n, d);
        prop_assert_eq!(rat_from_string(&rat_to_string(&r)).unwrap(), r);
    }
}

#[test]
fn enumeration_is_duplicate_free() {
    let graphs = enumerate_simple(5, 2, 1_000_000).unwrap();
    let keys: Vec<u64> = graphs.iter().map(|g| g.key_u64()).collect();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(keys.len(), sorted.len(), "duplicate graphs in enumeration");
}
