//! Logic-engine properties: print/parse round trips over random formula
//! trees, soundness of enumerated bounds against both distances, negation
//! duality, and determinism of sampled integrals.

use ctbm_core::example::{learning_spec, trajectory_limit, ExampleParams, ExampleStates};
use ctbm_core::kernel::kernel_fixpoint;
use ctbm_core::logic::{
    distance_bound, enumerate_state_formulas, parse_state_formula, BoundConfig, Dialect, Evaluator,
    Rational, SampleBank, StateFormula, TrajectoryFormula,
};
use ctbm_core::pseudometric::MetricConfig;
use proptest::prelude::*;

fn rational_unit() -> impl Strategy<Value = Rational> {
    (0u64..=8).prop_map(|k| Rational::new(k, 8).unwrap())
}

fn time_stamp() -> impl Strategy<Value = Rational> {
    (0u64..4_000_000).prop_map(|micros| Rational::new(micros, 1_000_000).unwrap())
}

fn state_formula() -> impl Strategy<Value = StateFormula> {
    let leaf = prop_oneof![
        rational_unit().prop_map(StateFormula::Const),
        Just(StateFormula::Obs),
    ];
    leaf.prop_recursive(4, 64, 8, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| StateFormula::Min(Box::new(a), Box::new(b))),
            inner
                .clone()
                .prop_map(|f| StateFormula::Complement(Box::new(f))),
            (inner.clone(), rational_unit()).prop_map(|(f, q)| StateFormula::Minus(Box::new(f), q)),
            (time_stamp(), inner.clone()).prop_map(|(t, f)| StateFormula::Diamond(t, Box::new(f))),
            (inner.clone(), time_stamp(), rational_unit()).prop_map(|(f, t, q)| {
                StateFormula::Integral(Box::new(TrajectoryFormula::Minus(
                    Box::new(TrajectoryFormula::EvalAt(Box::new(f), t)),
                    q,
                )))
            }),
            (inner, time_stamp(), time_stamp()).prop_map(|(f, t1, t2)| {
                StateFormula::Integral(Box::new(TrajectoryFormula::Max(
                    Box::new(TrajectoryFormula::EvalAt(Box::new(f.clone()), t1)),
                    Box::new(TrajectoryFormula::Plus(
                        Box::new(TrajectoryFormula::EvalAt(Box::new(f), t2)),
                        Rational::new(1, 8).unwrap(),
                    )),
                )))
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Printing then parsing restores the exact tree.
    #[test]
    fn print_parse_round_trip(f in state_formula()) {
        let shown = format!("{f}");
        let parsed = parse_state_formula(&shown)
            .unwrap_or_else(|e| panic!("reparse of `{shown}` failed: {e}"));
        prop_assert_eq!(parsed, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The complement evaluates to one minus the formula, exactly, at every
    /// state.
    #[test]
    fn complement_is_exact(f in state_formula()) {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let spec = learning_spec(&params);
        let bank = SampleBank::build(&spec, 32, 10.0, 3).unwrap();
        let ev = Evaluator::with_samples(&spec, params.discount(), bank).unwrap();
        let negated = StateFormula::Complement(Box::new(f.clone()));
        for s in 0..spec.len() {
            let v = ev.eval_state(&f, s).unwrap();
            let w = ev.eval_state(&negated, s).unwrap();
            prop_assert!((v + w - 1.0).abs() < 1e-15);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }
}

/// Enumerated kernel-dialect formulas never exceed the kernel distance,
/// and the nontrivial learning pair is separated by at least the
/// modality-of-obs witness value.
#[test]
fn lambda_bounds_are_sound_and_sharp() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    let cfg = MetricConfig::new(params.discount()).unwrap();
    let mut bcfg = BoundConfig::new(3, cfg.horizon());
    bcfg.max_state_formulas = 2000;

    let (_, report) = kernel_fixpoint(&spec, &cfg).unwrap();
    let formulas = enumerate_state_formulas(&spec, &cfg, &bcfg, Dialect::Lambda).unwrap();
    assert!(!formulas.is_empty());
    for (formula, values) in &formulas {
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert!(
                    (values[i] - values[j]).abs() <= report.extrapolated.get(i, j) + 1e-9,
                    "{formula} separates ({i},{j}) beyond the distance"
                );
            }
        }
    }

    let (bound, witness) = distance_bound(&spec, st.x, st.y, &cfg, &bcfg, Dialect::Lambda).unwrap();
    assert!(bound >= 0.124, "bound {bound} with witness {witness}");
    assert!(bound <= report.extrapolated.get(st.x, st.y) + 1e-9);
}

/// Enumerated trajectory-dialect formulas never exceed the closed-form
/// trajectory distance (up to the sampling tolerance).
#[test]
fn sigma_bounds_are_sound() {
    let params = ExampleParams::new(0.3, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    let cfg = MetricConfig::new(params.discount()).unwrap();
    let mut bcfg = BoundConfig::new(3, cfg.horizon());
    bcfg.sample_budget = 128;
    bcfg.max_state_formulas = 1500;
    bcfg.max_trajectory_formulas = 1500;

    let limit = trajectory_limit(&params, &st);
    let formulas = enumerate_state_formulas(&spec, &cfg, &bcfg, Dialect::Sigma).unwrap();
    assert!(!formulas.is_empty());
    for (formula, values) in &formulas {
        for i in 0..5 {
            for j in (i + 1)..5 {
                assert!(
                    (values[i] - values[j]).abs() <= limit.get(i, j) + 0.03,
                    "{formula} separates ({i},{j}) beyond the distance"
                );
            }
        }
    }
}

/// Terminal pair: the observable alone certifies the full distance.
#[test]
fn terminal_pair_bound_is_one() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    let cfg = MetricConfig::new(params.discount()).unwrap();
    let bcfg = BoundConfig::new(2, cfg.horizon());
    let (bound, _) = distance_bound(&spec, st.zero, st.bot, &cfg, &bcfg, Dialect::Lambda).unwrap();
    assert!((bound - 1.0).abs() <= 1e-12);
}

/// Same seed, same sampled integrals.
#[test]
fn sampled_integrals_are_deterministic() {
    let params = ExampleParams::new(0.4, 1.0).unwrap();
    let spec = learning_spec(&params);
    let f = parse_state_formula("int(obs @ 1 (-) 0.125)").unwrap();
    let run = || {
        let bank = SampleBank::build(&spec, 64, 12.0, 99).unwrap();
        let ev = Evaluator::with_samples(&spec, params.discount(), bank).unwrap();
        (0..spec.len())
            .map(|s| ev.eval_state(&f, s).unwrap())
            .collect::<Vec<_>>()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
}

/// Dialect checks reject foreign constructors but accept expansions.
#[test]
fn dialect_rules_are_enforced() {
    let diamond = parse_state_formula("<1> obs").unwrap();
    assert!(diamond.check_dialect(Dialect::Lambda).is_ok());
    assert!(diamond.check_dialect(Dialect::Sigma).is_err());

    let integral = parse_state_formula("int(obs @ 1)").unwrap();
    assert!(integral.check_dialect(Dialect::Sigma).is_ok());
    assert!(integral.check_dialect(Dialect::Lambda).is_err());

    let derived = parse_state_formula("min(obs, 0.5) (-) 0.25").unwrap();
    assert!(derived.check_dialect(Dialect::Sigma).is_err());
    assert!(derived.expand_sigma().check_dialect(Dialect::Sigma).is_ok());
}
