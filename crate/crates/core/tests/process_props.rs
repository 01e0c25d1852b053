//! Process-model properties: semigroup structure and honesty of the derived
//! kernels, Monte Carlo agreement of the sampler, and determinism.

use ctbm_core::example::{learning_spec, ExampleParams, ExampleStates};
use ctbm_core::process::{trajectory_stream, ProcessSpec};
use proptest::prelude::*;

fn random_spec() -> impl Strategy<Value = ProcessSpec> {
    let n = 4usize;
    (
        prop::collection::vec(0.0f64..=1.0, n),
        prop::collection::vec(0.0f64..3.0, n),
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), n),
        prop::collection::vec(prop::bool::ANY, n),
    )
        .prop_map(move |(obs, rates, rows, absorbing)| {
            let names = (0..n).map(|i| format!("s{i}")).collect::<Vec<_>>();
            let mut exit = Vec::with_capacity(n);
            let mut jumps = Vec::with_capacity(n);
            for i in 0..n {
                if absorbing[i] || rates[i] == 0.0 {
                    exit.push(0.0);
                    jumps.push(None);
                } else {
                    exit.push(rates[i].max(0.05));
                    let mut row = rows[i].clone();
                    row[i] = 0.0; // keep jumps visible in the path
                    let sum: f64 = row.iter().sum();
                    jumps.push(Some(row.into_iter().map(|w| w / sum).collect()));
                }
            }
            ProcessSpec::new(names, obs, exit, jumps, None).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Kernels compose: P_{t+s} = P_t P_s, row by row.
    #[test]
    fn kernels_satisfy_the_semigroup_property(
        spec in random_spec(),
        t in 0.0f64..3.0,
        s in 0.0f64..3.0,
    ) {
        let n = spec.len();
        let combined = spec.transition_matrix(t + s, 1e-12).unwrap();
        let first = spec.transition_matrix(t, 1e-12).unwrap();
        let second = spec.transition_matrix(s, 1e-12).unwrap();
        for x in 0..n {
            for j in 0..n {
                let composed: f64 = (0..n)
                    .map(|k| first[x].weights()[k] * second[k].weights()[j])
                    .sum();
                prop_assert!(
                    (composed - combined[x].weights()[j]).abs() <= 1e-9,
                    "row {x} entry {j}: {} vs {}", composed, combined[x].weights()[j]
                );
            }
        }
    }

    /// Honesty: every kernel row is a probability distribution.
    #[test]
    fn kernel_rows_are_honest(spec in random_spec(), t in 0.0f64..20.0) {
        for row in spec.transition_matrix(t, 1e-12).unwrap() {
            let sum: f64 = row.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(row.weights().iter().all(|&w| w >= 0.0));
        }
    }

    /// Sampling twice from the same substream yields the same path.
    #[test]
    fn sampling_is_deterministic(spec in random_spec(), seed in 0u64..u64::MAX / 2) {
        let a = spec.sample_trajectory(0, 15.0, &mut trajectory_stream(seed, 0, 7));
        let b = spec.sample_trajectory(0, 15.0, &mut trajectory_stream(seed, 0, 7));
        prop_assert_eq!(a, b);
    }

    /// Serializing any valid spec and parsing it back restores it exactly.
    #[test]
    fn document_round_trip_is_lossless(spec in random_spec()) {
        let text = spec.to_document();
        let again = ProcessSpec::parse(&text).unwrap();
        prop_assert_eq!(spec, again);
    }
}

/// Empirical state distribution at a fixed time converges to the kernel
/// row in total variation.
#[test]
fn sampler_matches_the_kernel_row() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    let n = spec.len();
    let samples = 100_000usize;
    let t = 1.0;
    let horizon = 20.0;
    for state in [st.x, st.z] {
        let mut counts = vec![0usize; n];
        for index in 0..samples {
            let mut rng = trajectory_stream(31, state, index as u64);
            let path = spec.sample_trajectory(state, horizon, &mut rng);
            counts[path.state_at(t)] += 1;
        }
        let row = spec.transition_matrix(t, 1e-12).unwrap();
        let tv: f64 = (0..n)
            .map(|j| (counts[j] as f64 / samples as f64 - row[state].weights()[j]).abs())
            .sum::<f64>()
            / 2.0;
        let budget = 3.0 * (n as f64 / samples as f64).sqrt();
        assert!(tv <= budget, "state {state}: TV {tv} over budget {budget}");
    }
}

/// Starting from z, half the trajectories are absorbed in the correct
/// terminal within a generous horizon.
#[test]
fn half_of_z_reaches_the_correct_terminal() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    let samples = 100_000usize;
    let mut absorbed = 0usize;
    for index in 0..samples {
        let mut rng = trajectory_stream(77, st.z, index as u64);
        let path = spec.sample_trajectory(st.z, 20.0, &mut rng);
        if path.state_at(20.0) == st.zero {
            absorbed += 1;
        }
    }
    let fraction = absorbed as f64 / samples as f64;
    assert!(
        (fraction - 0.5).abs() <= 0.01,
        "absorbed fraction {fraction}"
    );
}

/// Trajectories from x either stay put within the horizon or jump exactly
/// once, into the terminal.
#[test]
fn x_paths_jump_at_most_once() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    for index in 0..2000 {
        let mut rng = trajectory_stream(5, st.x, index);
        let path = spec.sample_trajectory(st.x, 5.0, &mut rng);
        match path.jumps() {
            [] => {}
            [(t, target)] => {
                assert!(*t > 0.0);
                assert_eq!(*target, st.zero);
            }
            more => panic!("unexpected jump list {more:?}"),
        }
    }
}

/// The derived kernels of the learning process match its closed forms:
/// terminals and y are fixed, x and z decay exponentially.
#[test]
fn learning_kernels_match_closed_forms() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    for &t in &[0.0, 0.4, core::f64::consts::LN_2, 3.0] {
        let rows = spec.transition_matrix(t, 1e-12).unwrap();
        let decay = (-t).exp();
        assert_eq!(rows[st.y].weights()[st.y], 1.0);
        assert_eq!(rows[st.zero].weights()[st.zero], 1.0);
        assert_eq!(rows[st.bot].weights()[st.bot], 1.0);
        assert!((rows[st.x].weights()[st.x] - decay).abs() < 1e-12);
        assert!((rows[st.x].weights()[st.zero] - (1.0 - decay)).abs() < 1e-12);
        assert!((rows[st.z].weights()[st.z] - decay).abs() < 1e-12);
        assert!((rows[st.z].weights()[st.zero] - 0.5 * (1.0 - decay)).abs() < 1e-12);
        assert!((rows[st.z].weights()[st.bot] - 0.5 * (1.0 - decay)).abs() < 1e-12);
    }
}

/// Large rate-time products must not underflow the Poisson weights.
#[test]
fn kernels_survive_large_horizons() {
    let spec = ProcessSpec::new(
        vec!["live".to_string(), "done".to_string()],
        vec![0.3, 0.9],
        vec![5.0, 0.0],
        vec![Some(vec![0.0, 1.0]), None],
        None,
    )
    .unwrap();
    for &t in &[50.0, 300.0, 2000.0] {
        let rows = spec.transition_matrix(t, 1e-12).unwrap();
        let stay = (-5.0 * t).exp();
        assert!((rows[0].weights()[0] - stay).abs() <= 1e-12, "t={t}");
        assert!((rows[0].weights()[1] - (1.0 - stay)).abs() <= 1e-9, "t={t}");
        let sum: f64 = rows[0].weights().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }
    assert!(matches!(
        spec.transition_matrix(1e9, 1e-12),
        Err(ctbm_core::process::SpecError::UniformizationOverflow { .. })
    ));
}

/// Base metrics are validated and default to the discrete metric.
#[test]
fn base_metric_parsing() {
    let good = r#"{
        "states": ["a", "b"], "obs": [0.0, 1.0], "exit_rates": [0.0, 0.0],
        "jump": {}, "base_metric": [0.0, 0.25, 0.25, 0.0]
    }"#;
    let spec = ProcessSpec::parse(good).unwrap();
    assert_eq!(spec.base_metric(), vec![0.0, 0.25, 0.25, 0.0]);

    let default = r#"{"states":["a","b"],"obs":[0.0,1.0],"exit_rates":[0.0,0.0],"jump":{}}"#;
    let spec = ProcessSpec::parse(default).unwrap();
    assert_eq!(spec.base_metric(), vec![0.0, 1.0, 1.0, 0.0]);

    let bad = r#"{
        "states": ["a", "b"], "obs": [0.0, 1.0], "exit_rates": [0.0, 0.0],
        "jump": {}, "base_metric": [0.1, 0.25, 0.25, 0.0]
    }"#;
    assert!(ProcessSpec::parse(bad).is_err());
}

/// Stratified quantization splits the z-law evenly across terminals at the
/// per-group quantile times.
#[test]
fn stratified_split_matches_the_jump_row() {
    let params = ExampleParams::new(0.5, 1.0).unwrap();
    let spec = learning_spec(&params);
    let st = ExampleStates::CANONICAL;
    let paths = spec.stratified_jump_times(st.z, 4, 20.0).unwrap();
    assert_eq!(paths.len(), 4);
    let to_zero = paths.iter().filter(|p| p.jumps()[0].1 == st.zero).count();
    let to_bot = paths.iter().filter(|p| p.jumps()[0].1 == st.bot).count();
    assert_eq!((to_zero, to_bot), (2, 2));
    let expected_times = [-(0.25f64.ln()), -(0.75f64.ln())];
    for p in &paths {
        let t = p.jumps()[0].0;
        assert!(
            expected_times.iter().any(|e| (t - e).abs() < 1e-12),
            "time {t}"
        );
    }

    // Absorbing starts quantize to the single constant path.
    let constant = spec.stratified_jump_times(st.y, 4, 20.0).unwrap();
    assert_eq!(constant.len(), 1);
    assert!(constant[0].jumps().is_empty());
}
