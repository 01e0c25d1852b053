//! Breadth-first formula enumeration producing certified lower bounds on
//! the behavioural distances.
//!
//! The suprema defining the logical distances range over infinite logics;
//! a budgeted enumeration can only ever certify lower bounds. Values are
//! computed compositionally on whole state-value vectors, deduplicated by
//! quantized evaluation fingerprints so syntactically different but
//! semantically equal formulas cost nothing.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::eval::SampleBank;
use super::{Dialect, LogicError, Rational, StateFormula, TrajectoryFormula, MAX_DEPTH};
use crate::float;
use crate::kernel::KERNEL_TOL;
use crate::process::{ProcessSpec, Trajectory};
use crate::pseudometric::MetricConfig;

use alloc::boxed::Box;

/// Enumeration budget and grids.
#[derive(Debug, Clone)]
pub struct BoundConfig {
    /// Maximum formula depth (hard limit [`MAX_DEPTH`]).
    pub depth: usize,
    /// Constants are drawn from `{k / constant_grid}`.
    pub constant_grid: u32,
    /// Time stamps for the modality and path evaluation.
    pub times: Vec<Rational>,
    /// Cap on retained state formulas.
    pub max_state_formulas: usize,
    /// Cap on retained trajectory formulas.
    pub max_trajectory_formulas: usize,
    /// Trajectory samples per state backing path integrals.
    pub sample_budget: usize,
    /// Seed for the shared sample bank.
    pub seed: u64,
}

impl BoundConfig {
    pub fn new(depth: usize, horizon: f64) -> Self {
        Self {
            depth,
            constant_grid: 8,
            times: log_spaced_times(16, horizon),
            max_state_formulas: 4000,
            max_trajectory_formulas: 4000,
            sample_budget: 512,
            seed: 0x0c7b,
        }
    }
}

/// `count` time stamps: zero, then log-spaced rationals (microsecond
/// resolution) from 1/16 up to the horizon.
pub fn log_spaced_times(count: usize, horizon: f64) -> Vec<Rational> {
    let mut times = alloc::vec![Rational::ZERO];
    if count <= 1 || !(horizon > 0.0) {
        return times;
    }
    let t_min = (1.0f64 / 16.0).min(horizon / 16.0);
    let steps = count - 1;
    for k in 0..steps {
        let t = if steps == 1 {
            horizon
        } else {
            t_min * float::exp(float::ln(horizon / t_min) * k as f64 / (steps - 1) as f64)
        };
        let micros = float::round(t * 1e6).max(1.0) as u64;
        let stamp = Rational::new(micros, 1_000_000).expect("nonzero denominator");
        if times.last() != Some(&stamp) {
            times.push(stamp);
        }
    }
    times
}

fn fingerprint(values: &[f64]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &v in values {
        let q = float::round(v * 1e10) as i64;
        for byte in q.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

struct StateEntry {
    formula: StateFormula,
    values: Vec<f64>,
}

struct TrajEntry {
    formula: TrajectoryFormula,
    values: Vec<f64>,
}

struct Pools {
    state: Vec<StateEntry>,
    traj: Vec<TrajEntry>,
    seen_state: BTreeSet<u64>,
    seen_traj: BTreeSet<u64>,
    max_state: usize,
    max_traj: usize,
}

impl Pools {
    fn push_state(&mut self, formula: StateFormula, values: Vec<f64>) -> bool {
        if self.state.len() >= self.max_state {
            return false;
        }
        if self.seen_state.insert(fingerprint(&values)) {
            self.state.push(StateEntry { formula, values });
        }
        true
    }

    fn push_traj(&mut self, formula: TrajectoryFormula, values: Vec<f64>) -> bool {
        if self.traj.len() >= self.max_traj {
            return false;
        }
        if self.seen_traj.insert(fingerprint(&values)) {
            self.traj.push(TrajEntry { formula, values });
        }
        true
    }
}

/// Enumerates state formulas of the dialect up to the configured depth and
/// returns each with its value vector over all states, in a deterministic
/// order.
pub fn enumerate_state_formulas(
    spec: &ProcessSpec,
    cfg: &MetricConfig,
    bcfg: &BoundConfig,
    dialect: Dialect,
) -> Result<Vec<(StateFormula, Vec<f64>)>, LogicError> {
    if bcfg.depth > MAX_DEPTH {
        return Err(LogicError::DepthBudget(bcfg.depth));
    }
    cfg.validate()?;
    let n = spec.len();
    let discount = cfg.discount;

    // Exact kernel rows per time stamp (kernel dialect only).
    let kernels: Vec<Vec<Vec<f64>>> = if dialect == Dialect::Lambda {
        bcfg.times
            .iter()
            .map(|t| {
                spec.transition_matrix(t.to_f64(), KERNEL_TOL).map(|rows| {
                    rows.iter()
                        .map(|r| r.weights().to_vec())
                        .collect::<Vec<_>>()
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };

    // Shared trajectory samples, flattened over states (trajectory dialect).
    let (flat, ranges): (Vec<Trajectory>, Vec<(usize, usize)>) = if dialect == Dialect::Sigma {
        let bank = SampleBank::build(spec, bcfg.sample_budget, cfg.horizon(), bcfg.seed)?;
        let mut flat = Vec::new();
        let mut ranges = Vec::with_capacity(n);
        for state in 0..n {
            let start = flat.len();
            flat.extend_from_slice(bank.set(state));
            ranges.push((start, flat.len()));
        }
        (flat, ranges)
    } else {
        (Vec::new(), Vec::new())
    };
    // Path states at each time stamp, shared by every EvalAt node.
    let flat_states: Vec<Vec<usize>> = bcfg
        .times
        .iter()
        .map(|t| flat.iter().map(|p| p.state_at(t.to_f64())).collect())
        .collect();

    let mut pools = Pools {
        state: Vec::new(),
        traj: Vec::new(),
        seen_state: BTreeSet::new(),
        seen_traj: BTreeSet::new(),
        max_state: bcfg.max_state_formulas,
        max_traj: bcfg.max_trajectory_formulas,
    };

    // Depth 1: constants and the observable.
    for k in 0..=bcfg.constant_grid {
        let q =
            Rational::new(k as u64, bcfg.constant_grid as u64).expect("constant grid is positive");
        let value = q.to_f64();
        pools.push_state(StateFormula::Const(q), alloc::vec![value; n]);
    }
    let obs_values: Vec<f64> = (0..n).map(|s| spec.obs(s)).collect();
    pools.push_state(StateFormula::Obs, obs_values);

    let constants: Vec<Rational> = (0..=bcfg.constant_grid)
        .map(|k| Rational::new(k as u64, bcfg.constant_grid as u64).expect("positive grid"))
        .collect();

    let mut state_layer_start = 0usize;
    let mut traj_layer_start = 0usize;

    for _depth in 2..=bcfg.depth {
        let state_layer_end = pools.state.len();
        let traj_layer_end = pools.traj.len();

        'state_gen: {
            for idx in state_layer_start..state_layer_end {
                let values = pools.state[idx].values.clone();
                let formula = pools.state[idx].formula.clone();

                let complement: Vec<f64> = values.iter().map(|v| 1.0 - v).collect();
                if !pools.push_state(
                    StateFormula::Complement(Box::new(formula.clone())),
                    complement,
                ) {
                    break 'state_gen;
                }

                if dialect == Dialect::Lambda {
                    for &q in &constants {
                        let qv = q.to_f64();
                        let minus: Vec<f64> = values.iter().map(|v| (v - qv).max(0.0)).collect();
                        if !pools
                            .push_state(StateFormula::Minus(Box::new(formula.clone()), q), minus)
                        {
                            break 'state_gen;
                        }
                    }
                    for (ti, t) in bcfg.times.iter().enumerate() {
                        let factor = float::discount_pow(discount, t.to_f64());
                        let rows = &kernels[ti];
                        let next: Vec<f64> = (0..n)
                            .map(|s| {
                                factor
                                    * rows[s].iter().zip(&values).map(|(w, v)| w * v).sum::<f64>()
                            })
                            .collect();
                        if !pools
                            .push_state(StateFormula::Diamond(*t, Box::new(formula.clone())), next)
                        {
                            break 'state_gen;
                        }
                    }
                }
            }

            if dialect == Dialect::Lambda {
                // min over pairs whose deeper operand sits in the newest layer
                for j in state_layer_start..state_layer_end {
                    for i in 0..=j {
                        let merged: Vec<f64> = pools.state[i]
                            .values
                            .iter()
                            .zip(&pools.state[j].values)
                            .map(|(a, b)| a.min(*b))
                            .collect();
                        let formula = StateFormula::Min(
                            Box::new(pools.state[i].formula.clone()),
                            Box::new(pools.state[j].formula.clone()),
                        );
                        if !pools.push_state(formula, merged) {
                            break 'state_gen;
                        }
                    }
                }
            }

            if dialect == Dialect::Sigma {
                for g_idx in traj_layer_start..traj_layer_end {
                    let means: Vec<f64> = ranges
                        .iter()
                        .map(|&(lo, hi)| {
                            pools.traj[g_idx].values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
                        })
                        .collect();
                    let formula =
                        StateFormula::Integral(Box::new(pools.traj[g_idx].formula.clone()));
                    if !pools.push_state(formula, means) {
                        break 'state_gen;
                    }
                }
            }
        }

        if dialect == Dialect::Sigma {
            'traj_gen: {
                for idx in state_layer_start..state_layer_end {
                    for (ti, t) in bcfg.times.iter().enumerate() {
                        let factor = float::discount_pow(discount, t.to_f64());
                        let values: Vec<f64> = flat_states[ti]
                            .iter()
                            .map(|&s| factor * pools.state[idx].values[s])
                            .collect();
                        let formula = TrajectoryFormula::EvalAt(
                            Box::new(pools.state[idx].formula.clone()),
                            *t,
                        );
                        if !pools.push_traj(formula, values) {
                            break 'traj_gen;
                        }
                    }
                }
                for idx in traj_layer_start..traj_layer_end {
                    for &q in &constants {
                        let qv = q.to_f64();
                        let minus: Vec<f64> = pools.traj[idx]
                            .values
                            .iter()
                            .map(|v| (v - qv).max(0.0))
                            .collect();
                        if !pools.push_traj(
                            TrajectoryFormula::Minus(Box::new(pools.traj[idx].formula.clone()), q),
                            minus,
                        ) {
                            break 'traj_gen;
                        }
                        let plus: Vec<f64> = pools.traj[idx]
                            .values
                            .iter()
                            .map(|v| (v + qv).min(1.0))
                            .collect();
                        if !pools.push_traj(
                            TrajectoryFormula::Plus(Box::new(pools.traj[idx].formula.clone()), q),
                            plus,
                        ) {
                            break 'traj_gen;
                        }
                    }
                }
                for j in traj_layer_start..traj_layer_end {
                    for i in 0..=j {
                        let min_values: Vec<f64> = pools.traj[i]
                            .values
                            .iter()
                            .zip(&pools.traj[j].values)
                            .map(|(a, b)| a.min(*b))
                            .collect();
                        if !pools.push_traj(
                            TrajectoryFormula::Min(
                                Box::new(pools.traj[i].formula.clone()),
                                Box::new(pools.traj[j].formula.clone()),
                            ),
                            min_values,
                        ) {
                            break 'traj_gen;
                        }
                        let max_values: Vec<f64> = pools.traj[i]
                            .values
                            .iter()
                            .zip(&pools.traj[j].values)
                            .map(|(a, b)| a.max(*b))
                            .collect();
                        if !pools.push_traj(
                            TrajectoryFormula::Max(
                                Box::new(pools.traj[i].formula.clone()),
                                Box::new(pools.traj[j].formula.clone()),
                            ),
                            max_values,
                        ) {
                            break 'traj_gen;
                        }
                    }
                }
            }
        }

        state_layer_start = state_layer_end;
        traj_layer_start = traj_layer_end;
    }

    Ok(pools
        .state
        .into_iter()
        .map(|e| (e.formula, e.values))
        .collect())
}

/// Best certified lower bound `|f(x) - f(y)|` over the enumerated formulas,
/// with a witness. Returns the trivial witness `0` when nothing separates
/// the states (in particular when `x == y`).
pub fn distance_bound(
    spec: &ProcessSpec,
    x: usize,
    y: usize,
    cfg: &MetricConfig,
    bcfg: &BoundConfig,
    dialect: Dialect,
) -> Result<(f64, StateFormula), LogicError> {
    let formulas = enumerate_state_formulas(spec, cfg, bcfg, dialect)?;
    let mut best = 0.0f64;
    let mut witness = StateFormula::Const(Rational::ZERO);
    for (formula, values) in formulas {
        let gap = (values[x] - values[y]).abs();
        if gap > best {
            best = gap;
            witness = formula;
        }
    }
    Ok((best, witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::{learning_spec, ExampleParams, ExampleStates};

    #[test]
    fn depth_budget_is_enforced() {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let spec = learning_spec(&params);
        let cfg = MetricConfig::new(params.discount()).unwrap();
        let bcfg = BoundConfig::new(6, cfg.horizon());
        assert!(matches!(
            enumerate_state_formulas(&spec, &cfg, &bcfg, Dialect::Lambda),
            Err(LogicError::DepthBudget(6))
        ));
    }

    #[test]
    fn terminal_pair_is_separated_by_obs() {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let spec = learning_spec(&params);
        let st = ExampleStates::CANONICAL;
        let cfg = MetricConfig::new(params.discount()).unwrap();
        let mut bcfg = BoundConfig::new(2, cfg.horizon());
        bcfg.sample_budget = 32;
        let (bound, witness) =
            distance_bound(&spec, st.zero, st.bot, &cfg, &bcfg, Dialect::Lambda).unwrap();
        assert!((bound - 1.0).abs() < 1e-12);
        let shown = alloc::format!("{witness}");
        assert!(shown.contains("obs"), "witness {shown}");
    }

    #[test]
    fn identical_states_get_the_trivial_witness() {
        let params = ExampleParams::new(0.5, 1.0).unwrap();
        let spec = learning_spec(&params);
        let cfg = MetricConfig::new(params.discount()).unwrap();
        let bcfg = BoundConfig::new(2, cfg.horizon());
        let (bound, witness) = distance_bound(&spec, 1, 1, &cfg, &bcfg, Dialect::Lambda).unwrap();
        assert_eq!(bound, 0.0);
        assert_eq!(witness, StateFormula::Const(Rational::ZERO));
    }

    #[test]
    fn log_times_start_at_zero_and_increase() {
        let times = log_spaced_times(16, 13.8);
        assert_eq!(times[0], Rational::ZERO);
        for w in times.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(times.len(), 16);
    }
}
