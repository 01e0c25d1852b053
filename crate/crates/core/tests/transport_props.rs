//! Transport solver properties: agreement with exhaustive enumeration,
//! strong duality, marginal feasibility, and the pseudometric structure of
//! the transport distance.

use ctbm_core::process::Distribution;
use ctbm_core::pseudometric::PseudometricMatrix;
use ctbm_core::transport::{
    dual_certificate, monotone_cost_limit_check, reference, solve_ot, CostMatrix,
};
use ctbm_core::wasserstein;
use proptest::prelude::*;

fn distribution(n: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        Distribution::new(raw.into_iter().map(|w| w / sum).collect()).unwrap()
    })
}

/// Sparse distribution with possible zero-weight atoms.
fn sparse_distribution(n: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(prop_oneof![Just(0.0f64), 0.01f64..1.0], n)
        .prop_filter("positive mass", |raw| raw.iter().sum::<f64>() > 0.0)
        .prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            Distribution::new(raw.into_iter().map(|w| w / sum).collect()).unwrap()
        })
}

fn cost(rows: usize, cols: usize) -> impl Strategy<Value = CostMatrix> {
    prop::collection::vec(0.0f64..1.0, rows * cols)
        .prop_map(move |data| CostMatrix::new(rows, cols, data).unwrap())
}

fn pseudometric(n: usize) -> impl Strategy<Value = PseudometricMatrix> {
    prop::collection::vec(0.0f64..1.0, n * n).prop_map(move |raw| {
        let mut m = PseudometricMatrix::zero(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, raw[i * n + j]);
            }
        }
        m.repair();
        m.validate().unwrap();
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_matches_exhaustive_enumeration(
        mu in sparse_distribution(4),
        nu in sparse_distribution(4),
        cost in cost(4, 4),
    ) {
        let plan = solve_ot(&mu, &nu, &cost).unwrap();
        let brute = reference::optimal_value(&mu, &nu, &cost).unwrap();
        prop_assert!((plan.value() - brute).abs() <= 1e-12,
            "simplex {} vs enumeration {}", plan.value(), brute);
    }

    #[test]
    fn plans_are_feasible_and_certified(
        mu in distribution(8),
        nu in distribution(8),
        m in pseudometric(8),
    ) {
        let cost = CostMatrix::from_pseudometric(&m);
        let plan = solve_ot(&mu, &nu, &cost).unwrap();
        prop_assert!(plan.marginal_residual(&mu, &nu) <= 1e-10);
        prop_assert!(plan.entries().iter().all(|&f| f >= 0.0));
        let weighted: f64 = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .map(|(i, j)| plan.get(i, j) * cost.get(i, j))
            .sum();
        prop_assert!((weighted - plan.value()).abs() <= 1e-10);
        let duals = dual_certificate(&mu, &nu, &cost).unwrap();
        prop_assert!(duals.lipschitz_excess(&cost) <= 1e-12);
        prop_assert!((duals.objective(&mu, &nu) - plan.value()).abs() <= 1e-9);
        prop_assert!(duals.potential().iter().all(|&h| (0.0..=1.0).contains(&h)));
    }

    /// The transport distance under a pseudometric cost is itself a
    /// 1-bounded pseudometric on distributions.
    #[test]
    fn transport_distance_is_a_pseudometric(
        a in distribution(6),
        b in distribution(6),
        c in distribution(6),
        m in pseudometric(6),
    ) {
        let dab = wasserstein(&m, &a, &b);
        let dba = wasserstein(&m, &b, &a);
        prop_assert_eq!(dab.to_bits(), dba.to_bits(), "symmetry must be exact");
        prop_assert!((0.0..=1.0).contains(&dab));
        prop_assert!(wasserstein(&m, &a, &a) == 0.0);
        let dac = wasserstein(&m, &a, &c);
        let dcb = wasserstein(&m, &c, &b);
        prop_assert!(dab <= dac + dcb + 1e-9, "triangle: {} > {} + {}", dab, dac, dcb);
    }

    #[test]
    fn transport_value_is_monotone_in_the_cost(
        mu in distribution(5),
        nu in distribution(5),
        lo in cost(5, 5),
        bump in prop::collection::vec(0.0f64..0.5, 25),
    ) {
        let hi_data: Vec<f64> = lo.entries().iter().zip(&bump)
            .map(|(a, d)| (a + d).min(1.0)).collect();
        let hi = CostMatrix::new(5, 5, hi_data).unwrap();
        let v_lo = solve_ot(&mu, &nu, &lo).unwrap().value();
        let v_hi = solve_ot(&mu, &nu, &hi).unwrap().value();
        prop_assert!(v_lo <= v_hi + 1e-12);
    }

    /// Values along an increasing chain of costs are nondecreasing and end
    /// at the value of the supremum cost.
    #[test]
    fn monotone_chains_converge_upwards(
        mu in distribution(4),
        nu in distribution(4),
        base in cost(4, 4),
        bumps in prop::collection::vec(prop::collection::vec(0.0f64..0.2, 16), 1..4),
    ) {
        let mut chain = vec![base];
        for bump in bumps {
            let prev = chain.last().unwrap();
            let data: Vec<f64> = prev.entries().iter().zip(&bump)
                .map(|(a, d)| (a + d).min(1.0)).collect();
            chain.push(CostMatrix::new(4, 4, data).unwrap());
        }
        let values = monotone_cost_limit_check(&mu, &nu, &chain).unwrap();
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
    }
}

/// Scaling a pseudometric cost scales the transport value linearly, so the
/// chain of scaled costs has closed-form values.
#[test]
fn scaled_chain_has_linear_values() {
    let m = PseudometricMatrix::from_entries(
        3,
        vec![
            0.0, 0.6, 1.0, //
            0.6, 0.0, 0.7, //
            1.0, 0.7, 0.0,
        ],
    )
    .unwrap();
    let base = CostMatrix::from_pseudometric(&m);
    let mu = Distribution::new(vec![0.5, 0.25, 0.25]).unwrap();
    let nu = Distribution::new(vec![0.1, 0.2, 0.7]).unwrap();
    let full = solve_ot(&mu, &nu, &base).unwrap().value();
    let chain: Vec<CostMatrix> = (1..=4)
        .map(|k| base.scale(k as f64 / 4.0).unwrap())
        .collect();
    let values = monotone_cost_limit_check(&mu, &nu, &chain).unwrap();
    for (k, v) in values.iter().enumerate() {
        let expect = full * (k + 1) as f64 / 4.0;
        assert!((v - expect).abs() <= 1e-12, "scaled value {v} vs {expect}");
    }
}

/// Degenerate instances: uniform marginals under 0/1 block costs create
/// heavy pivot ties; the anti-cycling rule must still terminate at the
/// enumerated optimum.
#[test]
fn degenerate_ties_terminate_at_the_optimum() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for n in 2..=4usize {
        for _ in 0..40 {
            let mu = Distribution::uniform(n);
            let nu = Distribution::uniform(n);
            let data: Vec<f64> = (0..n * n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
                .collect();
            let cost = CostMatrix::new(n, n, data).unwrap();
            let plan = solve_ot(&mu, &nu, &cost).unwrap();
            let brute = reference::optimal_value(&mu, &nu, &cost).unwrap();
            assert!((plan.value() - brute).abs() <= 1e-12);
            assert!(plan.marginal_residual(&mu, &nu) <= 1e-12);
        }
    }
    // Larger all-ties instance: uniform marginals, constant cost.
    let mu = Distribution::uniform(64);
    let cost = CostMatrix::new(64, 64, vec![1.0; 64 * 64]).unwrap();
    let plan = solve_ot(&mu, &mu, &cost).unwrap();
    assert!((plan.value() - 1.0).abs() <= 1e-12);
}

/// Larger instances: primal-dual gap and marginals at the acceptance
/// tolerances on a seeded sweep.
#[test]
fn medium_instances_are_certified() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for round in 0..20 {
        let n = 16 + (round % 4) * 16; // up to 64 atoms
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let sum: f64 = raw.iter().sum();
        let mu = Distribution::new(raw.iter().map(|w| w / sum).collect()).unwrap();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let sum: f64 = raw.iter().sum();
        let nu = Distribution::new(raw.iter().map(|w| w / sum).collect()).unwrap();
        let mut m = PseudometricMatrix::zero(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, rng.random::<f64>());
            }
        }
        m.repair();
        let cost = CostMatrix::from_pseudometric(&m);
        let plan = solve_ot(&mu, &nu, &cost).unwrap();
        assert!(plan.marginal_residual(&mu, &nu) <= 1e-10);
        let duals = dual_certificate(&mu, &nu, &cost).unwrap();
        assert!((duals.objective(&mu, &nu) - plan.value()).abs() <= 1e-9);
    }
}
