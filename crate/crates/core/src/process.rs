//! Finite-state jump processes: declaration, derived time-indexed kernels,
//! and trajectory sampling.
//!
//! A process is conservative: each state either is absorbing (exit rate 0) or
//! leaves at an exponential rate towards a jump distribution over states. The
//! kernel rows P_t are derived by uniformization and are honest by
//! construction (every row sums to 1).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::float;

/// Weight-sum slack tolerated on jump rows and distributions.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("duplicate state name `{0}`")]
    DuplicateState(String),
    #[error("array `{field}` has length {got}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("state `{state}`: obs value {value} outside [0, 1]")]
    ObsOutOfRange { state: String, value: f64 },
    #[error("state `{state}`: exit rate {value} must be finite and nonnegative")]
    BadExitRate { state: String, value: f64 },
    #[error("state `{state}`: jump row sums to {sum}, expected 1")]
    DishonestJumpRow { state: String, sum: f64 },
    #[error("state `{state}`: negative jump probability towards `{target}`")]
    NegativeJumpWeight { state: String, target: String },
    #[error("state `{state}` has a positive exit rate but no jump row")]
    MissingJumpRow { state: String },
    #[error("state `{state}` is absorbing but declares a jump row")]
    AbsorbingJumpRow { state: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("base metric: {0}")]
    BadBaseMetric(String),
    #[error("malformed process document: {0}")]
    Document(String),
    #[error("time {0} must be finite and nonnegative")]
    BadTime(f64),
    #[error("kernel tolerance {0} must lie in (0, 1e-6]")]
    BadKernelTolerance(f64),
    #[error("stratified quantization needs single-jump absorption from `{state}`")]
    UnsupportedStructure { state: String },
    #[error("uniformization needs {mean} expected jumps; reduce the horizon or rates")]
    UniformizationOverflow { mean: f64 },
    #[error("sample count must be positive")]
    EmptySample,
    #[error("distribution weights sum to {0}, expected 1")]
    DishonestDistribution(f64),
    #[error("negative distribution weight {0}")]
    NegativeWeight(f64),
}

/// Probability distribution over the state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, SpecError> {
        let mut sum = 0.0;
        for &w in &weights {
            if w < 0.0 || !w.is_finite() {
                return Err(SpecError::NegativeWeight(w));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(SpecError::DishonestDistribution(sum));
        }
        Ok(Self { weights })
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Piecewise-constant right-continuous path: initial state, sorted jumps,
/// and the horizon past which the path is frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    initial: usize,
    jumps: Vec<(f64, usize)>,
    horizon: f64,
}

impl Trajectory {
    /// Builds a path after checking the jump-list invariants: strictly
    /// increasing times in `(0, horizon]` and consecutive targets that
    /// differ from the preceding state.
    pub fn new(initial: usize, jumps: Vec<(f64, usize)>, horizon: f64) -> Result<Self, SpecError> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SpecError::BadTime(horizon));
        }
        let mut prev_time = 0.0;
        let mut prev_state = initial;
        for &(t, s) in &jumps {
            if !(t > prev_time) || t > horizon {
                return Err(SpecError::BadTime(t));
            }
            if s == prev_state {
                return Err(SpecError::Document(
                    "jump target equals the preceding state".to_string(),
                ));
            }
            prev_time = t;
            prev_state = s;
        }
        Ok(Self {
            initial,
            jumps,
            horizon,
        })
    }

    pub fn constant(state: usize, horizon: f64) -> Self {
        Self {
            initial: state,
            jumps: Vec::new(),
            horizon,
        }
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn jumps(&self) -> &[(f64, usize)] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// State occupied at time `t` (right-continuous; frozen past the horizon).
    pub fn state_at(&self, t: f64) -> usize {
        let mut state = self.initial;
        for &(time, target) in &self.jumps {
            if time <= t {
                state = target;
            } else {
                break;
            }
        }
        state
    }
}

/// Finite-state jump process with an observable in `[0,1]` per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    names: Vec<String>,
    obs: Vec<f64>,
    exit_rates: Vec<f64>,
    jumps: Vec<Option<Vec<f64>>>,
    base_metric: Option<Vec<f64>>,
}

/// On-disk shape of a process document.
#[derive(Debug, Serialize, Deserialize)]
struct SpecDocument {
    states: Vec<String>,
    obs: Vec<f64>,
    exit_rates: Vec<f64>,
    #[serde(default)]
    jump: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_metric: Option<Vec<f64>>,
}

impl ProcessSpec {
    pub fn new(
        names: Vec<String>,
        obs: Vec<f64>,
        exit_rates: Vec<f64>,
        jumps: Vec<Option<Vec<f64>>>,
        base_metric: Option<Vec<f64>>,
    ) -> Result<Self, SpecError> {
        let n = names.len();
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(SpecError::DuplicateState(name.clone()));
            }
        }
        if obs.len() != n {
            return Err(SpecError::LengthMismatch {
                field: "obs",
                got: obs.len(),
                expected: n,
            });
        }
        if exit_rates.len() != n {
            return Err(SpecError::LengthMismatch {
                field: "exit_rates",
                got: exit_rates.len(),
                expected: n,
            });
        }
        if jumps.len() != n {
            return Err(SpecError::LengthMismatch {
                field: "jump",
                got: jumps.len(),
                expected: n,
            });
        }
        for i in 0..n {
            if !(0.0..=1.0).contains(&obs[i]) || !obs[i].is_finite() {
                return Err(SpecError::ObsOutOfRange {
                    state: names[i].clone(),
                    value: obs[i],
                });
            }
            if !exit_rates[i].is_finite() || exit_rates[i] < 0.0 {
                return Err(SpecError::BadExitRate {
                    state: names[i].clone(),
                    value: exit_rates[i],
                });
            }
            match (&jumps[i], exit_rates[i] > 0.0) {
                (None, true) => {
                    return Err(SpecError::MissingJumpRow {
                        state: names[i].clone(),
                    })
                }
                (Some(_), false) => {
                    return Err(SpecError::AbsorbingJumpRow {
                        state: names[i].clone(),
                    })
                }
                (Some(row), true) => {
                    if row.len() != n {
                        return Err(SpecError::LengthMismatch {
                            field: "jump row",
                            got: row.len(),
                            expected: n,
                        });
                    }
                    let mut sum = 0.0;
                    for (j, &w) in row.iter().enumerate() {
                        if w < 0.0 || !w.is_finite() {
                            return Err(SpecError::NegativeJumpWeight {
                                state: names[i].clone(),
                                target: names[j].clone(),
                            });
                        }
                        sum += w;
                    }
                    if (sum - 1.0).abs() > MASS_TOL {
                        return Err(SpecError::DishonestJumpRow {
                            state: names[i].clone(),
                            sum,
                        });
                    }
                }
                (None, false) => {}
            }
        }
        if let Some(bm) = &base_metric {
            if bm.len() != n * n {
                return Err(SpecError::BadBaseMetric("wrong length".to_string()));
            }
            for i in 0..n {
                if bm[i * n + i] != 0.0 {
                    return Err(SpecError::BadBaseMetric("nonzero diagonal".to_string()));
                }
                for j in 0..n {
                    let v = bm[i * n + j];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(SpecError::BadBaseMetric("entry outside [0, 1]".to_string()));
                    }
                    if bm[j * n + i] != v {
                        return Err(SpecError::BadBaseMetric("asymmetric".to_string()));
                    }
                }
            }
        }
        Ok(Self {
            names,
            obs,
            exit_rates,
            jumps,
            base_metric,
        })
    }

    /// Parses a UTF-8 process document (JSON), preserving state order.
    pub fn parse(document: &str) -> Result<Self, SpecError> {
        let doc: SpecDocument =
            serde_json::from_str(document).map_err(|e| SpecError::Document(e.to_string()))?;
        let n = doc.states.len();
        let index: BTreeMap<&str, usize> = doc
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut jumps: Vec<Option<Vec<f64>>> = vec![None; n];
        for (state, row) in &doc.jump {
            let &i = index
                .get(state.as_str())
                .ok_or_else(|| SpecError::UnknownState(state.clone()))?;
            let mut dense = vec![0.0; n];
            for (target, &w) in row {
                let &j = index
                    .get(target.as_str())
                    .ok_or_else(|| SpecError::UnknownState(target.clone()))?;
                dense[j] = w;
            }
            jumps[i] = Some(dense);
        }
        Self::new(doc.states, doc.obs, doc.exit_rates, jumps, doc.base_metric)
    }

    /// Serializes back to the document format; `parse` of the output
    /// reproduces the spec exactly.
    pub fn to_document(&self) -> String {
        let mut jump = BTreeMap::new();
        for (i, row) in self.jumps.iter().enumerate() {
            if let Some(row) = row {
                let entries: BTreeMap<String, f64> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(j, &w)| (self.names[j].clone(), w))
                    .collect();
                jump.insert(self.names[i].clone(), entries);
            }
        }
        let doc = SpecDocument {
            states: self.names.clone(),
            obs: self.obs.clone(),
            exit_rates: self.exit_rates.clone(),
            jump,
            base_metric: self.base_metric.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn obs(&self, i: usize) -> f64 {
        self.obs[i]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit_rates[i]
    }

    pub fn jump_row(&self, i: usize) -> Option<&[f64]> {
        self.jumps[i].as_deref()
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.exit_rates[i] == 0.0
    }

    /// The declared base metric, or the discrete metric when absent.
    pub fn base_metric(&self) -> Vec<f64> {
        match &self.base_metric {
            Some(bm) => bm.clone(),
            None => {
                let n = self.len();
                let mut m = vec![1.0; n * n];
                for i in 0..n {
                    m[i * n + i] = 0.0;
                }
                m
            }
        }
    }

    /// Kernel rows P_t for every state, by uniformization: Poisson-weighted
    /// powers of the embedded jump matrix, truncated so the omitted mass is
    /// at most `tol` and renormalized (rows sum to 1 exactly up to rounding).
    pub fn transition_matrix(&self, t: f64, tol: f64) -> Result<Vec<Distribution>, SpecError> {
        if !t.is_finite() || t < 0.0 {
            return Err(SpecError::BadTime(t));
        }
        if !(tol > 0.0 && tol <= 1e-6) {
            return Err(SpecError::BadKernelTolerance(tol));
        }
        let n = self.len();
        let top_rate = self.exit_rates.iter().fold(0.0f64, |acc, &r| acc.max(r));
        let mean_jumps = top_rate * t;
        if mean_jumps == 0.0 {
            return Ok((0..n).map(|i| Distribution::point_mass(n, i)).collect());
        }
        if mean_jumps > 5e5 {
            return Err(SpecError::UniformizationOverflow { mean: mean_jumps });
        }

        // Embedded uniformized chain: row i keeps mass 1 - rate_i/top and
        // spreads rate_i/top over its jump row.
        let mut chain = vec![0.0; n * n];
        for i in 0..n {
            let p = self.exit_rates[i] / top_rate;
            chain[i * n + i] = 1.0 - p;
            if let Some(row) = &self.jumps[i] {
                for j in 0..n {
                    chain[i * n + j] += p * row[j];
                }
            }
        }

        // Poisson(mean_jumps) weights, grown outwards from the mode so the
        // base term cannot underflow for large mean_jumps, then truncated
        // once the relative tail drops below tol.
        let mode = mean_jumps as usize;
        let mut upper = vec![1.0f64];
        let mut k = mode;
        loop {
            let last = *upper.last().expect("nonempty");
            let next = last * mean_jumps / (k + 1) as f64;
            if next < tol * 1e-4 || upper.len() > 1_000_000 {
                break;
            }
            upper.push(next);
            k += 1;
        }
        let mut lower = Vec::new();
        let mut term = 1.0f64;
        let mut k = mode;
        while k > 0 {
            term *= k as f64 / mean_jumps;
            if term < tol * 1e-4 {
                break;
            }
            lower.push(term);
            k -= 1;
        }
        let first = mode - lower.len();
        let mut weights = vec![0.0f64; first];
        weights.extend(lower.iter().rev());
        weights.extend(&upper);
        let cumulative: f64 = weights.iter().sum();

        let mut result = vec![0.0; n * n];
        let mut power = vec![0.0; n * n]; // chain^k, starting at identity
        for i in 0..n {
            power[i * n + i] = 1.0;
        }
        for (k, &w) in weights.iter().enumerate() {
            if k > 0 {
                let mut next = vec![0.0; n * n];
                for i in 0..n {
                    for l in 0..n {
                        let p = power[i * n + l];
                        if p != 0.0 {
                            let row = &chain[l * n..(l + 1) * n];
                            for j in 0..n {
                                next[i * n + j] += p * row[j];
                            }
                        }
                    }
                }
                power = next;
            }
            if w != 0.0 {
                for (r, &p) in result.iter_mut().zip(&power) {
                    *r += w * p;
                }
            }
        }
        // Condition on the retained Poisson mass so rows are honest.
        for r in result.iter_mut() {
            *r /= cumulative;
        }

        (0..n)
            .map(|i| Distribution::new(result[i * n..(i + 1) * n].to_vec()))
            .collect()
    }

    /// Simulates the jump chain with exponential holding times until the
    /// horizon or an absorbing state. Deterministic given the stream.
    pub fn sample_trajectory<R: Rng>(&self, start: usize, horizon: f64, rng: &mut R) -> Trajectory {
        assert!(start < self.len(), "state index out of range");
        assert!(horizon > 0.0 && horizon.is_finite());
        let mut state = start;
        let mut time = 0.0;
        let mut jumps = Vec::new();
        loop {
            let rate = self.exit_rates[state];
            if rate == 0.0 {
                break;
            }
            let hold = loop {
                let u: f64 = rng.random();
                let h = -float::ln(1.0 - u) / rate;
                if h > 0.0 {
                    break h;
                }
            };
            time += hold;
            if time > horizon {
                break;
            }
            let row = self.jumps[state].as_ref().expect("validated jump row");
            let draw: f64 = rng.random();
            let mut cumulative = 0.0;
            let mut target = state;
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    cumulative += w;
                    target = j;
                    if draw < cumulative {
                        break;
                    }
                }
            }
            // A self-jump leaves the path unchanged; the remaining holding
            // time is again exponential, so nothing is recorded.
            if target != state {
                jumps.push((time, target));
                state = target;
            }
        }
        Trajectory {
            initial: start,
            jumps,
            horizon,
        }
    }

    /// Deterministic equal-weight quantization of the trajectory law for
    /// states that reach absorption in at most one jump: jump times sit at
    /// exponential quantiles and targets split proportionally.
    pub fn stratified_jump_times(
        &self,
        start: usize,
        count: usize,
        horizon: f64,
    ) -> Result<Vec<Trajectory>, SpecError> {
        if count == 0 {
            return Err(SpecError::EmptySample);
        }
        if self.is_absorbing(start) {
            return Ok(vec![Trajectory::constant(start, horizon)]);
        }
        if !self.stratifiable(start) {
            return Err(SpecError::UnsupportedStructure {
                state: self.names[start].clone(),
            });
        }
        let rate = self.exit_rates[start];
        let row = self.jumps[start].as_ref().expect("validated jump row");

        // Largest-remainder allocation of `count` trajectories over targets.
        let mut alloc: Vec<(usize, usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(j, &w)| {
                let exact = w * count as f64;
                let base = exact as usize;
                (j, base, exact - base as f64)
            })
            .collect();
        let assigned: usize = alloc.iter().map(|&(_, b, _)| b).sum();
        let mut leftover = count - assigned;
        // Largest remainders win the leftover slots; ties go to the
        // earliest target.
        while leftover > 0 {
            let mut best = 0;
            for (idx, entry) in alloc.iter().enumerate().skip(1) {
                if entry.2 > alloc[best].2 {
                    best = idx;
                }
            }
            alloc[best].1 += 1;
            alloc[best].2 = -1.0;
            leftover -= 1;
        }

        let mut result = Vec::with_capacity(count);
        for &(target, group, _) in &alloc {
            for i in 1..=group {
                let quantile = (i as f64 - 0.5) / group as f64;
                let t = -float::ln(quantile) / rate;
                if t > horizon {
                    result.push(Trajectory::constant(start, horizon));
                } else {
                    result.push(Trajectory {
                        initial: start,
                        jumps: vec![(t, target)],
                        horizon,
                    });
                }
            }
        }
        Ok(result)
    }

    /// True when every jump from `start` lands directly in an absorbing
    /// state (so the trajectory law is a one-jump mixture).
    pub fn stratifiable(&self, start: usize) -> bool {
        if self.is_absorbing(start) {
            return true;
        }
        match &self.jumps[start] {
            Some(row) => row
                .iter()
                .enumerate()
                .all(|(j, &w)| w == 0.0 || (j != start && self.is_absorbing(j))),
            None => false,
        }
    }
}

/// Deterministic substream for sample `index` of `state`: results do not
/// depend on evaluation order.
pub fn trajectory_stream(seed: u64, state: usize, index: u64) -> ChaCha8Rng {
    substream(seed, ((state as u64) << 40) ^ index)
}

/// Deterministic substream for an arbitrary tag (pair and repetition
/// indices, sampler domains).
pub fn substream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}
