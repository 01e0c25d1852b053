//! Closed-form reference solutions for the five-state learning process.
//!
//! The process has two terminal states (the correct value `0` with
//! observation 1 and the wrong value `∂` with observation 0) and three
//! learning states observing `r`: `x` decays into `0` at rate lambda, `y`
//! never moves, and `z` decays at rate lambda into `0` or `∂` with equal
//! probability. With discount `e^{-lambda}`, both behavioural distances
//! admit closed forms: the trajectory distance satisfies exact per-pair
//! recurrences and the kernel distance has a closed-form limit table. These
//! serve as test oracles for the numerical pipelines.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::process::ProcessSpec;
use crate::pseudometric::PseudometricMatrix;

#[derive(Debug, thiserror::Error)]
pub enum ExampleError {
    #[error("parameter r = {0} outside the open interval (0, 1)")]
    BadR(f64),
    #[error("parameter lambda = {0} must be positive and finite")]
    BadLambda(f64),
    #[error("matrix size {0} does not match the five-state example")]
    WrongSize(usize),
    #[error("entry ({0}, {1}) outside the recurrence regime")]
    OutOfRegime(usize, usize),
    #[error("the process is not in the five-state learning family")]
    NotTheExample,
    #[error("recurrences assume discount e^-lambda = {expected}, got {got}")]
    DiscountMismatch { expected: f64, got: f64 },
    #[error(transparent)]
    Metric(#[from] crate::pseudometric::MetricError),
}

/// Parameters of the learning process: common observation `r` of the three
/// learning states and the jump rate `lambda`. The recurrences assume the
/// discount factor `e^{-lambda}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleParams {
    pub r: f64,
    pub lambda: f64,
}

impl ExampleParams {
    pub fn new(r: f64, lambda: f64) -> Result<Self, ExampleError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(ExampleError::BadR(r));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(ExampleError::BadLambda(lambda));
        }
        Ok(Self { r, lambda })
    }

    /// The discount factor the closed forms are stated for.
    pub fn discount(&self) -> f64 {
        float::exp(-self.lambda)
    }
}

/// Indices of the example's states inside a [`ProcessSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExampleStates {
    /// Terminal state observing 1.
    pub zero: usize,
    /// Decays into `zero`.
    pub x: usize,
    /// Never moves.
    pub y: usize,
    /// Decays into `zero` or `bot` with equal probability.
    pub z: usize,
    /// Terminal state observing 0.
    pub bot: usize,
}

impl ExampleStates {
    pub const CANONICAL: Self = Self {
        zero: 0,
        x: 1,
        y: 2,
        z: 3,
        bot: 4,
    };
}

/// Builds the five-state learning process in canonical state order
/// `0, x, y, z, ∂`.
pub fn learning_spec(params: &ExampleParams) -> ProcessSpec {
    let r = params.r;
    let lambda = params.lambda;
    let names = vec![
        "0".to_string(),
        "x".to_string(),
        "y".to_string(),
        "z".to_string(),
        "∂".to_string(),
    ];
    let obs = vec![1.0, r, r, r, 0.0];
    let rates = vec![0.0, lambda, 0.0, lambda, 0.0];
    let jumps = vec![
        None,
        Some(vec![1.0, 0.0, 0.0, 0.0, 0.0]),
        None,
        Some(vec![0.5, 0.0, 0.0, 0.0, 0.5]),
        None,
    ];
    ProcessSpec::new(names, obs, rates, jumps, None).expect("the learning process is well-formed")
}

/// Recognizes the learning process inside an arbitrary spec, up to state
/// order. Returns the parameters and the state mapping.
pub fn detect(spec: &ProcessSpec) -> Option<(ExampleParams, ExampleStates)> {
    const TOL: f64 = 1e-9;
    if spec.len() != 5 {
        return None;
    }
    let close = |a: f64, b: f64| (a - b).abs() <= TOL;

    let zero = (0..5).find(|&i| spec.is_absorbing(i) && close(spec.obs(i), 1.0))?;
    let bot = (0..5).find(|&i| spec.is_absorbing(i) && close(spec.obs(i), 0.0))?;
    let y = (0..5).find(|&i| spec.is_absorbing(i) && i != zero && i != bot)?;
    let r = spec.obs(y);
    if !(r > TOL && r < 1.0 - TOL) {
        return None;
    }

    let mut x = None;
    let mut z = None;
    for i in 0..5 {
        if spec.is_absorbing(i) {
            continue;
        }
        if !close(spec.obs(i), r) {
            return None;
        }
        let row = spec.jump_row(i)?;
        let to_zero = row[zero];
        let to_bot = row[bot];
        if close(to_zero, 1.0) {
            x = Some(i);
        } else if close(to_zero, 0.5) && close(to_bot, 0.5) {
            z = Some(i);
        } else {
            return None;
        }
    }
    let (x, z) = (x?, z?);
    let lambda = spec.exit_rate(x);
    if !close(spec.exit_rate(z), lambda) || lambda <= 0.0 {
        return None;
    }
    let params = ExampleParams::new(r, lambda).ok()?;
    Some((params, ExampleStates { zero, x, y, z, bot }))
}

/// One exact step of the trajectory refinement on the example.
///
/// Pairs within `{0, y, ∂}` and the pair `(x, 0)` are fixed; the remaining
/// pairs follow closed-form recurrences. The `(x, z)` entry has no known
/// recurrence (its limit is 1, reached by a fixpoint argument): the step
/// carries a certified lower bound, the largest value forced by the triangle
/// inequality against the exact entries, never decreasing across steps.
pub fn recurrence_step(
    d: &PseudometricMatrix,
    params: &ExampleParams,
    st: &ExampleStates,
) -> Result<PseudometricMatrix, ExampleError> {
    if d.len() != 5 {
        return Err(ExampleError::WrongSize(d.len()));
    }
    let r = params.r;
    let mut next = d.clone();

    // x vs terminal ∂: jump to 0 replaces the gap by the discounted full gap.
    let dxb = d.get(st.x, st.bot);
    next.set(st.x, st.bot, 0.5 * (1.0 + dxb * dxb));

    // x vs y: the jump can only show the (1 - r) gap, discounted.
    let dxy = d.get(st.x, st.y);
    let gap = 1.0 - r;
    if dxy > gap + 1e-12 {
        return Err(ExampleError::OutOfRegime(st.x, st.y));
    }
    let ratio = dxy / gap;
    next.set(st.x, st.y, 0.5 * gap * (1.0 + ratio * ratio));

    // z vs terminals: half the mass reaches the opposite terminal.
    let dz0 = d.get(st.z, st.zero);
    next.set(st.z, st.zero, 0.25 * (dz0 + 1.0) * (dz0 + 1.0));
    let dzb = d.get(st.z, st.bot);
    next.set(st.z, st.bot, 0.25 * (dzb + 1.0) * (dzb + 1.0));

    // y vs z: regimes split at the smaller of r and 1 - r.
    let dyz = d.get(st.y, st.z);
    let lo = r.min(1.0 - r);
    let hi = r.max(1.0 - r);
    let next_yz = if dyz <= lo + 1e-15 {
        0.25 + 0.25 * dyz * dyz * (1.0 / r + 1.0 / (1.0 - r))
    } else if dyz <= hi + 1e-12 {
        0.25 * hi + 0.25 * dyz * dyz / hi + 0.5 * dyz
    } else {
        return Err(ExampleError::OutOfRegime(st.y, st.z));
    };
    next.set(st.y, st.z, next_yz);

    // x vs z: certified lower bound via triangles against exact entries.
    let mut bound = d.get(st.x, st.z);
    for w in [st.zero, st.y, st.bot] {
        bound = bound.max((next.get(st.x, w) - next.get(st.z, w)).abs());
    }
    for w in [st.zero, st.y, st.bot] {
        bound = bound.min(next.get(st.x, w) + next.get(st.z, w));
    }
    next.set(st.x, st.z, bound.min(1.0));

    Ok(next)
}

/// Iterates the exact recurrences from the observation distance with the
/// usual stopping rules and reporting. The process must belong to the
/// learning family and the configured discount must be `e^{-lambda}`.
pub fn oracle_fixpoint(
    spec: &ProcessSpec,
    cfg: &crate::pseudometric::MetricConfig,
) -> Result<(PseudometricMatrix, crate::pseudometric::IterationReport), ExampleError> {
    cfg.validate()?;
    let (params, st) = detect(spec).ok_or(ExampleError::NotTheExample)?;
    let expected = params.discount();
    if (cfg.discount - expected).abs() > 1e-9 {
        return Err(ExampleError::DiscountMismatch {
            expected,
            got: cfg.discount,
        });
    }
    let start = crate::kernel::obs_metric(spec);
    crate::pseudometric::run_fixpoint(start, cfg, |m| recurrence_step(m, &params, &st))
}

/// Closed-form limit of the trajectory distance on the example.
pub fn trajectory_limit(params: &ExampleParams, st: &ExampleStates) -> PseudometricMatrix {
    let r = params.r;
    let mut m = PseudometricMatrix::zero(5);
    m.set(st.zero, st.bot, 1.0);
    m.set(st.zero, st.x, 1.0 - r);
    m.set(st.zero, st.y, 1.0 - r);
    m.set(st.zero, st.z, 1.0);
    m.set(st.x, st.y, 1.0 - r);
    m.set(st.x, st.z, 1.0);
    m.set(st.x, st.bot, 1.0);
    m.set(st.y, st.z, r.max(1.0 - r));
    m.set(st.y, st.bot, r);
    m.set(st.z, st.bot, 1.0);
    m
}

/// Closed-form kernel-distance entry, where known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelLimit {
    Exact(f64),
    /// Only a bracket is known for `(x, z)`.
    Interval(f64, f64),
}

/// Closed-form limit of the kernel distance on the example.
pub fn kernel_limit(params: &ExampleParams, st: &ExampleStates, i: usize, j: usize) -> KernelLimit {
    use KernelLimit::{Exact, Interval};
    let r = params.r;
    let pair = (i.min(j), i.max(j));
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    if pair == key(st.zero, st.bot) {
        Exact(1.0)
    } else if pair == key(st.zero, st.x) || pair == key(st.zero, st.y) {
        Exact(1.0 - r)
    } else if pair == key(st.zero, st.z) {
        Exact(if r >= 0.75 { 0.25 } else { 1.0 - r })
    } else if pair == key(st.x, st.y) {
        Exact((1.0 - r) / 2.0)
    } else if pair == key(st.x, st.z) {
        Interval(0.125, 0.25)
    } else if pair == key(st.x, st.bot) {
        Exact(r.max(0.5))
    } else if pair == key(st.y, st.z) {
        Exact(0.25)
    } else if pair == key(st.y, st.bot) {
        Exact(r)
    } else if pair == key(st.z, st.bot) {
        Exact(r.max(0.25))
    } else {
        Exact(0.0)
    }
}

/// The unordered pairs whose recurrence steps are exact (everything except
/// `(x, z)`, whose intermediate values are only bounded from below).
pub fn exact_pairs(st: &ExampleStates) -> Vec<(usize, usize)> {
    let all = [st.zero, st.x, st.y, st.z, st.bot];
    let mut out = Vec::new();
    for (a, &i) in all.iter().enumerate() {
        for &j in all.iter().skip(a + 1) {
            let key = (i.min(j), i.max(j));
            if key != (st.x.min(st.z), st.x.max(st.z)) {
                out.push(key);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::obs_metric;

    #[test]
    fn canonical_spec_detects_itself() {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let spec = learning_spec(&params);
        let (found, st) = detect(&spec).unwrap();
        assert_eq!(found, params);
        assert_eq!(st, ExampleStates::CANONICAL);
    }

    #[test]
    fn detect_rejects_other_processes() {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let mut spec = learning_spec(&params);
        spec = ProcessSpec::new(
            spec.names().to_vec(),
            vec![1.0, 0.5, 0.5, 0.5, 0.1],
            (0..5).map(|i| spec.exit_rate(i)).collect(),
            (0..5)
                .map(|i| spec.jump_row(i).map(|r| r.to_vec()))
                .collect(),
            None,
        )
        .unwrap();
        assert!(detect(&spec).is_none());
    }

    #[test]
    fn first_step_matches_hand_computation() {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let st = ExampleStates::CANONICAL;
        let spec = learning_spec(&params);
        let d0 = obs_metric(&spec);
        let d1 = recurrence_step(&d0, &params, &st).unwrap();
        // d0(x, ∂) = r = 0.5, so the next value is (1 + 0.25) / 2.
        assert!((d1.get(st.x, st.bot) - 0.625).abs() < 1e-15);
        // d0(z, 0) = 1 - r = 0.5, so the next value is (1.5)^2 / 4.
        assert!((d1.get(st.z, st.zero) - 0.5625).abs() < 1e-15);
        // Absorbing pairs stay at the observation gap.
        assert_eq!(d1.get(st.y, st.bot), 0.5);
        assert_eq!(d1.get(st.zero, st.bot), 1.0);
        assert_eq!(d1.get(st.x, st.zero), 0.5);
    }

    #[test]
    fn iterates_stay_valid_and_approach_the_limit() {
        for &r in &[0.3, 0.5, 0.8] {
            let params = ExampleParams::new(r, 1.0).unwrap();
            let st = ExampleStates::CANONICAL;
            let spec = learning_spec(&params);
            let mut d = obs_metric(&spec);
            let mut prev = d.clone();
            for _ in 0..200 {
                d = recurrence_step(&d, &params, &st).unwrap();
                d.validate().unwrap();
                for (i, j) in exact_pairs(&st) {
                    assert!(d.get(i, j) >= prev.get(i, j) - 1e-15);
                }
                prev = d.clone();
            }
            let limit = trajectory_limit(&params, &st);
            limit.validate().unwrap();
            for (i, j) in exact_pairs(&st) {
                assert!(
                    d.get(i, j) <= limit.get(i, j) + 1e-12,
                    "r={r}: pair ({i},{j}) overshoots"
                );
                assert!(
                    limit.get(i, j) - d.get(i, j) <= 0.03,
                    "r={r}: pair ({i},{j}) too far from limit: {} vs {}",
                    d.get(i, j),
                    limit.get(i, j)
                );
            }
        }
    }
}
