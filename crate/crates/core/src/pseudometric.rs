//! 1-bounded pseudometric matrices over a finite state set, plus the shared
//! configuration and reporting types for the fixpoint pipelines.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::float;

/// Triangle-inequality slack tolerated by [`PseudometricMatrix::validate`].
pub const TRIANGLE_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("matrix data has length {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("entry ({i}, {j}) = {value} outside [0, 1]")]
    EntryOutOfRange { i: usize, j: usize, value: f64 },
    #[error("entries ({i}, {j}) and ({j}, {i}) differ")]
    Asymmetric { i: usize, j: usize },
    #[error("diagonal entry ({0}, {0}) is nonzero")]
    NonzeroDiagonal(usize),
    #[error("triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k}) by {excess:e}")]
    TriangleViolation {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },
    #[error("discount factor {0} outside the open interval (0, 1)")]
    BadDiscount(f64),
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
}

/// Symmetric nonnegative 1-bounded matrix with zero diagonal satisfying the
/// triangle inequality over all triples (within [`TRIANGLE_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudometricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl PseudometricMatrix {
    /// The zero pseudometric on `n` states.
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// The discrete metric: 1 off the diagonal, 0 on it.
    pub fn discrete(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.data[i * n + j] = 1.0;
                }
            }
        }
        m
    }

    /// Builds from row-major entries and validates all invariants.
    pub fn from_entries(n: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if data.len() != n * n {
            return Err(MetricError::Dimension {
                got: data.len(),
                expected: n * n,
            });
        }
        let m = Self { n, data };
        m.validate()?;
        Ok(m)
    }

    /// Builds from a function on unordered pairs; the diagonal is zero and
    /// symmetry holds by construction. Validates range and triangles.
    pub fn from_upper_fn<F>(n: usize, mut f: F) -> Result<Self, MetricError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut m = Self::zero(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_upper_unchecked(n: usize, upper: &[f64]) -> Self {
        let mut m = Self::zero(n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                m.data[i * n + j] = upper[k];
                m.data[j * n + i] = upper[k];
                k += 1;
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets the unordered pair `(i, j)`; panics on diagonal indices.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j, "diagonal entries are fixed at zero");
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// Checks all invariants: entries in `[0,1]`, exact zero diagonal, exact
    /// symmetry, triangle inequality within [`TRIANGLE_TOL`].
    pub fn validate(&self) -> Result<(), MetricError> {
        let n = self.n;
        for i in 0..n {
            if self.data[i * n + i] != 0.0 {
                return Err(MetricError::NonzeroDiagonal(i));
            }
            for j in 0..n {
                let v = self.data[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(MetricError::EntryOutOfRange { i, j, value: v });
                }
                if self.data[j * n + i] != v {
                    return Err(MetricError::Asymmetric { i, j });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = self.data[i * n + k];
                    let rhs = self.data[i * n + j] + self.data[j * n + k];
                    if lhs > rhs + TRIANGLE_TOL {
                        return Err(MetricError::TriangleViolation {
                            i,
                            j,
                            k,
                            excess: lhs - rhs,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Restores the invariants after floating-point noise: symmetrizes from
    /// the upper triangle, clamps into `[0,1]`, zeroes the diagonal, and
    /// applies the all-pairs shortest-path closure.
    pub fn repair(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.data[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let v = self.data[i * n + j].clamp(0.0, 1.0);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let via = self.data[i * n + k] + self.data[k * n + j];
                    if via < self.data[i * n + j] {
                        self.data[i * n + j] = via;
                        self.data[j * n + i] = via;
                    }
                }
            }
        }
    }

    /// Largest absolute entry difference against `other`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        let mut sup = 0.0f64;
        for (a, b) in self.data.iter().zip(&other.data) {
            sup = sup.max((a - b).abs());
        }
        sup
    }

    /// Entrywise maximum with `other` (pointwise max of pseudometrics is a
    /// pseudometric, so the invariants survive).
    pub fn entrywise_max_assign(&mut self, other: &Self) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = a.max(*b);
        }
    }
}

/// Configuration shared by both fixpoint pipelines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Discount factor, strictly inside (0, 1).
    pub discount: f64,
    /// Discounted mass below which times are ignored; sets the horizon.
    pub time_tolerance: f64,
    /// Grid resolution for the time search.
    pub time_grid_points: usize,
    /// Sup-norm Cauchy threshold for fixpoint termination.
    pub fix_tolerance: f64,
    /// Iteration cap; entries unconverged at the cap are reported, not fatal.
    pub max_iterations: usize,
    /// Golden-section steps refining the winning time-grid cells.
    pub refine_steps: usize,
    /// Search on a uniform grid in theta = discount^t instead of t.
    pub theta_grid: bool,
}

impl MetricConfig {
    /// Defaults for a given discount factor.
    pub fn new(discount: f64) -> Result<Self, MetricError> {
        let cfg = Self {
            discount,
            time_tolerance: 1e-6,
            time_grid_points: 2048,
            fix_tolerance: 1e-9,
            max_iterations: 500,
            refine_steps: 40,
            theta_grid: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(MetricError::BadDiscount(self.discount));
        }
        if !(self.time_tolerance > 0.0 && self.time_tolerance < 1.0) {
            return Err(MetricError::BadConfig("time_tolerance must lie in (0, 1)"));
        }
        if self.time_grid_points < 2 {
            return Err(MetricError::BadConfig(
                "time_grid_points must be at least 2",
            ));
        }
        if self.max_iterations == 0 {
            return Err(MetricError::BadConfig("max_iterations must be positive"));
        }
        if !(self.fix_tolerance > 0.0) {
            return Err(MetricError::BadConfig("fix_tolerance must be positive"));
        }
        Ok(())
    }

    /// Time horizon T with `discount^T = time_tolerance`; discounted
    /// contributions past T are below `time_tolerance`.
    pub fn horizon(&self) -> f64 {
        float::ln(self.time_tolerance) / float::ln(self.discount)
    }
}

/// Convergence record of a fixpoint run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationReport {
    /// Max absolute entry change per iteration.
    pub sup_deltas: Vec<f64>,
    /// Iterations performed.
    pub iterations: usize,
    /// True when the final sup-norm change reached the tolerance.
    pub converged: bool,
    /// Per-pair convergence flags, aligned with unordered pairs `(i, j)`,
    /// `i < j`, in row-major order.
    pub pair_converged: Vec<bool>,
    /// Aitken delta-squared extrapolation of each entry, repaired back into
    /// the pseudometric lattice. Slowly (O(1/n)) converging entries are
    /// closer to the limit here than in the final matrix.
    pub extrapolated: PseudometricMatrix,
    /// Sup-norm residual of one extra functional application, measured over
    /// converged entries only.
    pub residual_sup: f64,
}

impl IterationReport {
    /// Unordered pairs that had not met the tolerance at termination.
    pub fn unconverged_pairs(&self) -> Vec<(usize, usize)> {
        crate::pair_list(self.extrapolated.len())
            .into_iter()
            .zip(&self.pair_converged)
            .filter(|(_, &converged)| !converged)
            .map(|(pair, _)| pair)
            .collect()
    }
}

/// Aitken delta-squared extrapolation from three consecutive iterates.
/// Falls back to `c` when the second difference vanishes; never moves
/// backwards for nondecreasing sequences.
pub(crate) fn aitken(a: f64, b: f64, c: f64) -> f64 {
    let d1 = b - a;
    let d2 = c - b;
    let denom = d2 - d1;
    if denom.abs() < 1e-14 {
        return c;
    }
    let extrapolated = c - d2 * d2 / denom;
    if extrapolated.is_finite() {
        extrapolated.max(c).min(1.0)
    } else {
        c
    }
}

/// Shared fixpoint driver: iterates `step` from `start`, enforcing entrywise
/// monotonicity by running maxima and recording convergence data.
pub(crate) fn run_fixpoint<S, E>(
    start: PseudometricMatrix,
    cfg: &MetricConfig,
    mut step: S,
) -> Result<(PseudometricMatrix, IterationReport), E>
where
    S: FnMut(&PseudometricMatrix) -> Result<PseudometricMatrix, E>,
{
    let n = start.len();
    let mut history: Vec<PseudometricMatrix> = vec![start];
    let mut sup_deltas = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let current = history.last().expect("nonempty history");
        let mut next = step(current)?;
        next.entrywise_max_assign(current);
        let delta = next.sup_distance(current);
        sup_deltas.push(delta);
        history.push(next);
        if delta <= cfg.fix_tolerance {
            converged = true;
            break;
        }
    }

    let final_matrix = history.last().expect("nonempty history").clone();
    let iterations = history.len() - 1;

    let pairs = crate::pair_list(n);
    let pair_converged: Vec<bool> = if history.len() >= 2 {
        let prev = &history[history.len() - 2];
        pairs
            .iter()
            .map(|&(i, j)| (final_matrix.get(i, j) - prev.get(i, j)).abs() <= cfg.fix_tolerance)
            .collect()
    } else {
        vec![true; pairs.len()]
    };

    let mut extrapolated = final_matrix.clone();
    if history.len() >= 3 {
        let a = &history[history.len() - 3];
        let b = &history[history.len() - 2];
        for &(i, j) in &pairs {
            let v = aitken(a.get(i, j), b.get(i, j), final_matrix.get(i, j));
            extrapolated.set(i, j, v);
        }
        extrapolated.repair();
        extrapolated.entrywise_max_assign(&final_matrix);
    }

    // Residual check is deferred to the caller only in the sense that it
    // costs one extra functional application; do it here, once.
    let after = step(&final_matrix)?;
    let mut residual_sup = 0.0f64;
    for (p, &(i, j)) in pairs.iter().enumerate() {
        if pair_converged[p] {
            residual_sup = residual_sup.max((after.get(i, j) - final_matrix.get(i, j)).abs());
        }
    }

    let report = IterationReport {
        sup_deltas,
        iterations,
        converged,
        pair_converged,
        extrapolated,
        residual_sup,
    };
    Ok((final_matrix, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_metric_is_valid() {
        PseudometricMatrix::discrete(4).validate().unwrap();
    }

    #[test]
    fn rejects_asymmetry() {
        let data = vec![0.0, 0.3, 0.4, 0.0];
        assert!(matches!(
            PseudometricMatrix::from_entries(2, data),
            Err(MetricError::Asymmetric { .. })
        ));
    }

    #[test]
    fn rejects_triangle_violation() {
        let data = vec![
            0.0, 0.1, 0.9, //
            0.1, 0.0, 0.1, //
            0.9, 0.1, 0.0,
        ];
        assert!(matches!(
            PseudometricMatrix::from_entries(3, data),
            Err(MetricError::TriangleViolation { .. })
        ));
    }

    #[test]
    fn repair_restores_triangle() {
        let mut m = PseudometricMatrix::zero(3);
        m.set(0, 1, 0.1);
        m.set(1, 2, 0.1);
        m.set(0, 2, 0.9);
        m.repair();
        m.validate().unwrap();
        assert!((m.get(0, 2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_unit_discount() {
        assert!(MetricConfig::new(1.0).is_err());
        assert!(MetricConfig::new(0.0).is_err());
        assert!(MetricConfig::new(0.5).is_ok());
    }

    #[test]
    fn aitken_accelerates_harmonic_decay() {
        // x_n = 1 - 1/n approaches 1; extrapolation should beat the raw tail.
        let x = |n: f64| 1.0 - 1.0 / n;
        let est = aitken(x(98.0), x(99.0), x(100.0));
        assert!((1.0 - est) < (1.0 - x(100.0)));
        assert!(est <= 1.0);
    }
}
