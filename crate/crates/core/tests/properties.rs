use pmfix::comparison::DEFAULT_T_MAX;
use pmfix::contraction::evaluate_pair;
use pmfix::{
    check_axioms, check_contraction, check_induced_metric, crosscheck_implications, falsify,
    CarrierSpec, ComparisonFunction, Completeness, ConditionKind, Distance, Expression,
    PartialMetricSpace, PiecewiseMap, SampleOptions, SampleSet, Tolerances,
};
use proptest::prelude::*;

fn carrier() -> CarrierSpec {
    CarrierSpec::new([(0.0, 2.0), (3.0, 4.0)], [], Completeness::Complete).unwrap()
}

fn carrier_point() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=2.0f64, 3.0..=4.0f64]
}

fn space(distance: &str) -> PartialMetricSpace {
    PartialMetricSpace::new(distance, carrier(), Distance::parse(distance).unwrap())
}

fn map() -> PiecewiseMap {
    PiecewiseMap::new("T")
        .piece(0.0, 2.0, "x/2")
        .unwrap()
        .piece(3.0, 4.0, "7/5")
        .unwrap()
}

/// Random expression source over `x` and `y` from the full grammar.
fn expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| format!("{}", n as f64 / 8.0)),
        Just("x".to_string()),
        Just("y".to_string()),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop::sample::select(vec!['+', '-', '*', '/', '^']),
                inner.clone()
            )
                .prop_map(|(a, op, b)| format!("({a}){op}({b})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (
                prop::sample::select(vec!["min", "max"]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(f, a, b)| format!("{f}({a}, {b})")),
            (prop::sample::select(vec!["abs", "sqrt"]), inner)
                .prop_map(|(f, a)| format!("{f}({a})")),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_stable(src in expr_source()) {
        let e = Expression::parse(&src, &["x", "y"]).unwrap();
        let printed = e.to_string();
        let again = Expression::parse(&printed, &["x", "y"]).unwrap();
        prop_assert_eq!(&e, &again);
        prop_assert_eq!(printed, again.to_string());
    }

    #[test]
    fn eval_is_deterministic(src in expr_source(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let e = Expression::parse(&src, &["x", "y"]).unwrap();
        prop_assert_eq!(e.eval(&[x, y]), e.eval(&[x, y]));
    }

    #[test]
    fn induced_metric_of_max_is_absolute_difference(x in carrier_point(), y in carrier_point()) {
        let s = space("max");
        let ps = s.induced_ps(x, y).unwrap();
        prop_assert_eq!(ps, (x - y).abs());
        prop_assert_eq!(ps, s.induced_ps(y, x).unwrap());
        prop_assert_eq!(s.induced_ps(x, x).unwrap(), 0.0);
    }

    #[test]
    fn induced_metric_symmetric_for_expressions(x in carrier_point(), y in carrier_point()) {
        let s = space("max(x, y) + abs(x - y)/2");
        prop_assert_eq!(s.induced_ps(x, y).unwrap(), s.induced_ps(y, x).unwrap());
        prop_assert_eq!(s.induced_ps(x, x).unwrap(), 0.0);
    }

    #[test]
    fn apply_map_stays_in_carrier(x in carrier_point()) {
        let c = carrier();
        let image = map().apply(&c, x).unwrap();
        prop_assert!(c.contains(image));
    }

    #[test]
    fn f_inverse_is_right_inverse(s in 0.0..1e3f64, k in 1u32..10) {
        let families = [
            ComparisonFunction::rational(),
            ComparisonFunction::linear(k as f64 / 10.0).unwrap(),
            ComparisonFunction::custom("t/(2+t)").unwrap(),
        ];
        for cf in &families {
            let t = cf.f_inverse(s, 1e-9, DEFAULT_T_MAX).unwrap();
            prop_assert!((cf.f(t).unwrap() - s).abs() <= 1e-9, "{} at s = {}", cf.family(), s);
            prop_assert!(t >= s);
        }
    }

    #[test]
    fn phi_iterates_compose(t in 0.0..1e3f64, m in 0u64..50, n in 0u64..50, k in 1u32..10) {
        for cf in [ComparisonFunction::rational(), ComparisonFunction::linear(k as f64 / 10.0).unwrap()] {
            let whole = cf.phi_iterate(t, m + n).unwrap();
            let split = cf.phi_iterate(cf.phi_iterate(t, m).unwrap(), n).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12);
        }
    }

    #[test]
    fn contraction_pair_is_symmetric(x in carrier_point(), y in carrier_point()) {
        let s = space("max");
        let kind = ConditionKind::SelfDistanceMean(ComparisonFunction::rational());
        let a = evaluate_pair(&s, &map(), &kind, x, y).unwrap();
        let b = evaluate_pair(&s, &map(), &kind, y, x).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn linear_kinds_agree_at_formula_level(
        alpha in 0.01..0.99f64,
        pxy in 0.0..10.0f64,
        pxx in 0.0..10.0f64,
        pyy in 0.0..10.0f64,
    ) {
        let a = ConditionKind::linear(alpha).unwrap().rhs(pxy, pxx, pyy).unwrap();
        let b = ConditionKind::SelfDistanceMax(ComparisonFunction::linear(alpha).unwrap())
            .rhs(pxy, pxx, pyy)
            .unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn condition_strength_is_ordered(
        pxy in 0.0..10.0f64,
        pxx in 0.0..10.0f64,
        pyy in 0.0..10.0f64,
    ) {
        let phi = ComparisonFunction::rational();
        let plain = ConditionKind::Plain(phi.clone()).rhs(pxy, pxx, pyy).unwrap();
        let mean = ConditionKind::SelfDistanceMean(phi.clone()).rhs(pxy, pxx, pyy).unwrap();
        let max = ConditionKind::SelfDistanceMax(phi).rhs(pxy, pxx, pyy).unwrap();
        prop_assert!(plain <= mean && mean <= max);
    }

    #[test]
    fn sample_build_is_idempotent(step in 0.05..0.5f64, depth in 0usize..8) {
        let opts = SampleOptions { grid_step: step, orbit_depth: depth };
        let a = SampleSet::build(&carrier(), &opts, Some(&map())).unwrap();
        let b = SampleSet::build(&carrier(), &opts, Some(&map())).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.points().windows(2).all(|w| w[1] - w[0] > 1e-12));
        prop_assert!(a.points().iter().all(|&x| carrier().contains(x)));
        let again = SampleSet::from_points(&carrier(), a.points().iter().copied()).unwrap();
        prop_assert_eq!(a.points(), again.points());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn axioms_imply_induced_metric(scale in 0.1..4.0f64, shift in 0.0..3.0f64) {
        // c·max(x, y) + d is a partial metric for c > 0, d >= 0
        let src = format!("{scale} * max(x, y) + {shift}");
        let s = space(&src);
        let sample = SampleSet::build(&s.carrier, &SampleOptions { grid_step: 0.25, orbit_depth: 0 }, None).unwrap();
        let tol = Tolerances::default();
        let axioms = check_axioms(&s, &sample, &tol).unwrap();
        prop_assert!(axioms.iter().all(|r| r.pass));
        prop_assert!(check_induced_metric(&s, &sample, &tol).unwrap().pass);
    }

    #[test]
    fn condition_passes_are_nested(c in 0.0..1.0f64) {
        // T(x) = c·x on [0, 4] under the max distance
        let s = PartialMetricSpace::new(
            "scaled",
            CarrierSpec::new([(0.0, 4.0)], [], Completeness::Complete).unwrap(),
            Distance::Max,
        );
        let t = PiecewiseMap::new("T").piece(0.0, 4.0, &format!("{c} * x")).unwrap();
        let sample = SampleSet::build(&s.carrier, &SampleOptions { grid_step: 0.25, orbit_depth: 4 }, Some(&t)).unwrap();
        let phi = ComparisonFunction::rational();
        let tol = Tolerances::default();
        let pass = |kind: ConditionKind| check_contraction(&s, &t, &kind, &sample, &tol, &[]).unwrap().pass;
        let plain = pass(ConditionKind::Plain(phi.clone()));
        let mean = pass(ConditionKind::SelfDistanceMean(phi.clone()));
        let max = pass(ConditionKind::SelfDistanceMax(phi));
        prop_assert!(!plain || mean);
        prop_assert!(!mean || max);
    }

    #[test]
    fn falsify_is_reproducible(seed in any::<u64>()) {
        let s = space("abs(x - y)");
        let kind = ConditionKind::SelfDistanceMean(ComparisonFunction::rational());
        let tol = Tolerances::default();
        let a = falsify(&s, &map(), &kind, 300, seed, &tol).unwrap();
        let b = falsify(&s, &map(), &kind, 300, seed, &tol).unwrap();
        prop_assert_eq!(&a, &b);
        if let Some(w) = &a.witness {
            prop_assert!(w.margin > tol.eps_num);
        }
    }
}

#[test]
fn builtin_families_have_consistent_flags() {
    for k in 1..=9 {
        let cf = ComparisonFunction::linear(k as f64 / 10.0).unwrap();
        let r = cf.check_hypotheses(1e-9).unwrap();
        assert!(crosscheck_implications(&r.properties).is_empty());
    }
    let r = ComparisonFunction::rational()
        .check_hypotheses(1e-9)
        .unwrap();
    assert!(crosscheck_implications(&r.properties).is_empty());
}
