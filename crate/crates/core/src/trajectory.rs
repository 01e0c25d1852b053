//! The trajectory distance: refine a state pseudometric by transporting
//! empirical trajectory laws under the discounted uniform path cost.

use alloc::vec::Vec;

use crate::float;
use crate::process::{ProcessSpec, SpecError, Trajectory};
use crate::pseudometric::{
    run_fixpoint, IterationReport, MetricConfig, MetricError, PseudometricMatrix,
};
use crate::transport::{empirical_ot, TransportError};

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("trajectories have different horizons ({0} vs {1})")]
    HorizonMismatch(f64, f64),
    #[error("dimension mismatch between metric and trajectory states")]
    Dimension,
    #[error("need at least 2 samples per state")]
    TooFewSamples,
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Cost structure on paths: a state pseudometric discounted over time.
/// The discount may be 1 (the plain uniform pseudometric); the fixpoint
/// pipeline itself requires a discount strictly below 1.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryCostSpec<'a> {
    pub base: &'a PseudometricMatrix,
    pub discount: f64,
}

impl<'a> TrajectoryCostSpec<'a> {
    pub fn new(base: &'a PseudometricMatrix, discount: f64) -> Result<Self, TrajectoryError> {
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(TrajectoryError::Metric(MetricError::BadDiscount(discount)));
        }
        Ok(Self { base, discount })
    }
}

/// Discounted uniform cost between two piecewise-constant paths:
/// `sup_t discount^t * base(a(t), b(t))`.
///
/// Both paths are constant between their merged jump times and the discount
/// decays, so the supremum is attained at a breakpoint (a jump time or 0);
/// the evaluation is exact there. Behaviour past the shared horizon is
/// unknown but contributes at most `discount^horizon`.
pub fn uniform_cost(
    csp: &TrajectoryCostSpec,
    a: &Trajectory,
    b: &Trajectory,
) -> Result<f64, TrajectoryError> {
    if a.horizon() != b.horizon() {
        return Err(TrajectoryError::HorizonMismatch(a.horizon(), b.horizon()));
    }
    let n = csp.base.len();
    if a.initial() >= n || b.initial() >= n {
        return Err(TrajectoryError::Dimension);
    }

    let mut best = csp.base.get(a.initial(), b.initial());
    let mut state_a = a.initial();
    let mut state_b = b.initial();
    let (ja, jb) = (a.jumps(), b.jumps());
    let (mut ia, mut ib) = (0usize, 0usize);
    while ia < ja.len() || ib < jb.len() {
        let ta = ja.get(ia).map(|&(t, _)| t).unwrap_or(f64::INFINITY);
        let tb = jb.get(ib).map(|&(t, _)| t).unwrap_or(f64::INFINITY);
        let t = ta.min(tb);
        while ia < ja.len() && ja[ia].0 == t {
            state_a = ja[ia].1;
            ia += 1;
        }
        while ib < jb.len() && jb[ib].0 == t {
            state_b = jb[ib].1;
            ib += 1;
        }
        let value = float::discount_pow(csp.discount, t) * csp.base.get(state_a, state_b);
        best = best.max(value);
    }
    Ok(best)
}

/// Per-state sample sets for one refinement step: stratified quantization
/// where the jump structure permits, seeded i.i.d. sampling otherwise.
struct SampleBank {
    /// `sets[state][rep]`; deterministic states store a single repetition.
    sets: Vec<Vec<Vec<Trajectory>>>,
    deterministic: Vec<bool>,
}

impl SampleBank {
    fn build(
        spec: &ProcessSpec,
        samples: usize,
        reps: usize,
        horizon: f64,
        seed: u64,
    ) -> Result<Self, TrajectoryError> {
        let n = spec.len();
        let mut sets = Vec::with_capacity(n);
        let mut deterministic = Vec::with_capacity(n);
        for state in 0..n {
            if spec.stratifiable(state) {
                let set = spec.stratified_jump_times(state, samples, horizon)?;
                sets.push(alloc::vec![set]);
                deterministic.push(true);
            } else {
                let mut per_rep = Vec::with_capacity(reps);
                for rep in 0..reps {
                    let mut set = Vec::with_capacity(samples);
                    for index in 0..samples {
                        let tag = ((state as u64) << 40) ^ ((rep as u64) << 24) ^ index as u64;
                        let mut rng = crate::process::substream(seed, tag);
                        set.push(spec.sample_trajectory(state, horizon, &mut rng));
                    }
                    per_rep.push(set);
                }
                sets.push(per_rep);
                deterministic.push(false);
            }
        }
        Ok(Self {
            sets,
            deterministic,
        })
    }

    fn set(&self, state: usize, rep: usize) -> &[Trajectory] {
        let per_rep = &self.sets[state];
        &per_rep[rep.min(per_rep.len() - 1)]
    }
}

fn pair_value(
    bank: &SampleBank,
    csp: &TrajectoryCostSpec,
    x: usize,
    y: usize,
    reps: usize,
) -> Result<f64, TrajectoryError> {
    let effective = if bank.deterministic[x] && bank.deterministic[y] {
        1
    } else {
        reps
    };
    let mut total = 0.0;
    for rep in 0..effective {
        let plan = empirical_ot(bank.set(x, rep), bank.set(y, rep), |a, b| {
            uniform_cost(csp, a, b).expect("bank trajectories share a horizon")
        })?;
        total += plan.value();
    }
    Ok(total / effective as f64)
}

/// One empirical application of the trajectory refinement: for each state
/// pair, exact optimal transport between the empirical trajectory laws
/// (stratified quantization where the structure permits, seeded sampling
/// otherwise) under the discounted uniform cost, averaged over repetitions.
/// The empirical transport value is biased upward by O(samples^-1/2) on
/// genuinely random pairs.
pub fn trajectory_step_empirical(
    spec: &ProcessSpec,
    m: &PseudometricMatrix,
    cfg: &MetricConfig,
    samples: usize,
    reps: usize,
    seed: u64,
) -> Result<PseudometricMatrix, TrajectoryError> {
    cfg.validate()?;
    if samples < 2 {
        return Err(TrajectoryError::TooFewSamples);
    }
    let reps = reps.max(1);
    let bank = SampleBank::build(spec, samples, reps, cfg.horizon(), seed)?;
    step_with_bank(spec, m, cfg, &bank, reps)
}

fn step_with_bank(
    spec: &ProcessSpec,
    m: &PseudometricMatrix,
    cfg: &MetricConfig,
    bank: &SampleBank,
    reps: usize,
) -> Result<PseudometricMatrix, TrajectoryError> {
    let csp = TrajectoryCostSpec::new(m, cfg.discount)?;
    let n = spec.len();
    let upper = crate::map_pairs(n, |x, y| pair_value(bank, &csp, x, y, reps));
    let upper: Vec<f64> = upper.into_iter().collect::<Result<_, _>>()?;
    let mut next = PseudometricMatrix::from_upper_unchecked(n, &upper);
    next.repair();
    next.validate()?;
    Ok(next)
}

/// Iterates the empirical trajectory refinement from the observation
/// distance. Running maxima enforce the nondecreasing iterates that the
/// exact functional guarantees, suppressing downward Monte Carlo noise.
pub fn trajectory_fixpoint(
    spec: &ProcessSpec,
    cfg: &MetricConfig,
    samples: usize,
    reps: usize,
    seed: u64,
) -> Result<(PseudometricMatrix, IterationReport), TrajectoryError> {
    cfg.validate()?;
    if samples < 2 {
        return Err(TrajectoryError::TooFewSamples);
    }
    let reps = reps.max(1);
    let bank = SampleBank::build(spec, samples, reps, cfg.horizon(), seed)?;
    let start = crate::kernel::obs_metric(spec);
    run_fixpoint(start, cfg, |m| step_with_bank(spec, m, cfg, &bank, reps))
}
