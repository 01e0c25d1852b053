//! Formula evaluation against a process.
//!
//! Propositional constructors are exact; the kernel modality integrates the
//! exact kernel rows; path integrals average a per-state trajectory sample
//! bank (stratified quantization where the jump structure permits, seeded
//! sampling otherwise), shared so that all formulas in one session see the
//! same empirical law.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::RefCell;

use super::{LogicError, Rational, StateFormula, TrajectoryFormula};
use crate::float;
use crate::kernel::KERNEL_TOL;
use crate::process::{trajectory_stream, Distribution, ProcessSpec, Trajectory};
use crate::pseudometric::MetricError;

/// Read-only per-state trajectory samples.
#[derive(Debug, Clone)]
pub struct SampleBank {
    horizon: f64,
    sets: Vec<Vec<Trajectory>>,
}

impl SampleBank {
    pub fn build(
        spec: &ProcessSpec,
        budget: usize,
        horizon: f64,
        seed: u64,
    ) -> Result<Self, LogicError> {
        let mut sets = Vec::with_capacity(spec.len());
        for state in 0..spec.len() {
            if spec.stratifiable(state) {
                sets.push(spec.stratified_jump_times(state, budget.max(1), horizon)?);
            } else {
                let mut set = Vec::with_capacity(budget);
                for index in 0..budget.max(1) {
                    let mut rng = trajectory_stream(seed, state, index as u64);
                    set.push(spec.sample_trajectory(state, horizon, &mut rng));
                }
                sets.push(set);
            }
        }
        Ok(Self { horizon, sets })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn set(&self, state: usize) -> &[Trajectory] {
        &self.sets[state]
    }
}

/// Evaluation session: fixes the process, the discount factor, a kernel
/// cache keyed by time stamp, and optionally a trajectory sample bank.
pub struct Evaluator<'a> {
    spec: &'a ProcessSpec,
    discount: f64,
    kernels: RefCell<BTreeMap<Rational, Vec<Distribution>>>,
    samples: Option<SampleBank>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a ProcessSpec, discount: f64) -> Result<Self, LogicError> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(LogicError::Metric(MetricError::BadDiscount(discount)));
        }
        Ok(Self {
            spec,
            discount,
            kernels: RefCell::new(BTreeMap::new()),
            samples: None,
        })
    }

    pub fn with_samples(
        spec: &'a ProcessSpec,
        discount: f64,
        bank: SampleBank,
    ) -> Result<Self, LogicError> {
        let mut ev = Self::new(spec, discount)?;
        ev.samples = Some(bank);
        Ok(ev)
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn sample_bank(&self) -> Option<&SampleBank> {
        self.samples.as_ref()
    }

    fn kernel_row(&self, t: Rational, state: usize) -> Result<Vec<f64>, LogicError> {
        let mut cache = self.kernels.borrow_mut();
        if let alloc::collections::btree_map::Entry::Vacant(slot) = cache.entry(t) {
            slot.insert(self.spec.transition_matrix(t.to_f64(), KERNEL_TOL)?);
        }
        Ok(cache[&t][state].weights().to_vec())
    }

    /// Value of a state formula at a state, in `[0, 1]`.
    pub fn eval_state(&self, f: &StateFormula, state: usize) -> Result<f64, LogicError> {
        match f {
            StateFormula::Const(q) => Ok(q.to_f64()),
            StateFormula::Obs => Ok(self.spec.obs(state)),
            StateFormula::Min(a, b) => {
                Ok(self.eval_state(a, state)?.min(self.eval_state(b, state)?))
            }
            StateFormula::Complement(f) => Ok(1.0 - self.eval_state(f, state)?),
            StateFormula::Minus(f, q) => Ok((self.eval_state(f, state)? - q.to_f64()).max(0.0)),
            StateFormula::Diamond(t, f) => {
                let row = self.kernel_row(*t, state)?;
                let mut acc = 0.0;
                for (s, &w) in row.iter().enumerate() {
                    if w > 0.0 {
                        acc += w * self.eval_state(f, s)?;
                    }
                }
                Ok(float::discount_pow(self.discount, t.to_f64()) * acc)
            }
            StateFormula::Integral(g) => {
                let bank = self.samples.as_ref().ok_or(LogicError::MissingSamples)?;
                let set = bank.set(state);
                let mut acc = 0.0;
                for path in set {
                    acc += self.eval_trajectory(g, path)?;
                }
                Ok(acc / set.len() as f64)
            }
        }
    }

    /// Value of a trajectory formula on one path; exact for
    /// piecewise-constant paths.
    pub fn eval_trajectory(
        &self,
        g: &TrajectoryFormula,
        path: &Trajectory,
    ) -> Result<f64, LogicError> {
        match g {
            TrajectoryFormula::EvalAt(f, t) => {
                let state = path.state_at(t.to_f64());
                Ok(float::discount_pow(self.discount, t.to_f64()) * self.eval_state(f, state)?)
            }
            TrajectoryFormula::Min(a, b) => Ok(self
                .eval_trajectory(a, path)?
                .min(self.eval_trajectory(b, path)?)),
            TrajectoryFormula::Max(a, b) => Ok(self
                .eval_trajectory(a, path)?
                .max(self.eval_trajectory(b, path)?)),
            TrajectoryFormula::Minus(g, q) => {
                Ok((self.eval_trajectory(g, path)? - q.to_f64()).max(0.0))
            }
            TrajectoryFormula::Plus(g, q) => {
                Ok((self.eval_trajectory(g, path)? + q.to_f64()).min(1.0))
            }
        }
    }
}

/// Evaluates a trajectory formula on one path within a session.
pub fn eval_trajectory(
    evaluator: &Evaluator,
    g: &TrajectoryFormula,
    path: &Trajectory,
) -> Result<f64, LogicError> {
    evaluator.eval_trajectory(g, path)
}
