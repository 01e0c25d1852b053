//! Exact optimal transport between finite discrete distributions.
//!
//! The solver is a transportation-problem network simplex over the bipartite
//! support graph, with a block pivot search and a Bland-rule fallback that
//! kicks in on degenerate stalls so cycling cannot occur. Dual potentials
//! are recovered from the optimal basis tree and certify the primal value.

use alloc::vec;
use alloc::vec::Vec;

use crate::process::Distribution;
use crate::pseudometric::PseudometricMatrix;

/// Reduced costs above `-PIVOT_TOL` are treated as optimal.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("cost matrix is {rows}x{cols}, distributions are {mu}x{nu}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        mu: usize,
        nu: usize,
    },
    #[error("cost entry ({i}, {j}) = {value} outside [0, 1]")]
    CostOutOfRange { i: usize, j: usize, value: f64 },
    #[error("cost data has length {got}, expected {expected}")]
    CostShape { got: usize, expected: usize },
    #[error("dual certificate requires a cost flagged as a pseudometric")]
    NotPseudometric,
    #[error("cost chain is not entrywise nondecreasing at position {0}")]
    NonMonotoneChain(usize),
    #[error("empty sample list")]
    EmptySamples,
    #[error("solver failed: {0}")]
    Unsolvable(&'static str),
}

/// Rectangular cost matrix with entries in `[0, 1]`. Square matrices built
/// from a [`PseudometricMatrix`] carry a flag enabling Kantorovich duals.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pseudometric: bool,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TransportError> {
        if data.len() != rows * cols {
            return Err(TransportError::CostShape {
                got: data.len(),
                expected: rows * cols,
            });
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = data[i * cols + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(TransportError::CostOutOfRange { i, j, value: v });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            data,
            pseudometric: false,
        })
    }

    pub fn from_pseudometric(m: &PseudometricMatrix) -> Self {
        Self {
            rows: m.len(),
            cols: m.len(),
            data: m.entries().to_vec(),
            pseudometric: true,
        }
    }

    /// Entrywise scaling by a factor in `[0, 1]`; pseudometric structure
    /// survives scaling.
    pub fn scale(&self, factor: f64) -> Result<Self, TransportError> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(TransportError::CostOutOfRange {
                i: 0,
                j: 0,
                value: factor,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
            pseudometric: self.pseudometric,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn is_pseudometric(&self) -> bool {
        self.pseudometric
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// Entrywise maximum, preserving the pseudometric flag only when both
    /// operands carry it (max of pseudometrics is a pseudometric).
    pub fn entrywise_max(&self, other: &Self) -> Result<Self, TransportError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TransportError::CostShape {
                got: other.data.len(),
                expected: self.data.len(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.max(*b))
                .collect(),
            pseudometric: self.pseudometric && other.pseudometric,
        })
    }
}

/// Feasible optimal coupling and its cost.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    plan: Vec<f64>,
    rows: usize,
    cols: usize,
    value: f64,
}

impl TransportPlan {
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.plan
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.plan[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.plan[i * self.cols + j]).sum())
            .collect()
    }

    /// Largest marginal residual against the stated marginals.
    pub fn marginal_residual(&self, mu: &Distribution, nu: &Distribution) -> f64 {
        let mut worst = 0.0f64;
        for (got, want) in self.row_sums().iter().zip(mu.weights()) {
            worst = worst.max((got - want).abs());
        }
        for (got, want) in self.col_sums().iter().zip(nu.weights()) {
            worst = worst.max((got - want).abs());
        }
        worst
    }
}

/// Kantorovich potential: a cost-Lipschitz function into `[0, 1]` whose mean
/// difference under the marginals equals the primal optimum.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    potential: Vec<f64>,
}

impl DualPotentials {
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `|∫h dμ − ∫h dν|` for this potential.
    pub fn objective(&self, mu: &Distribution, nu: &Distribution) -> f64 {
        let mut acc = 0.0;
        for (k, h) in self.potential.iter().enumerate() {
            acc += h * (mu.weights()[k] - nu.weights()[k]);
        }
        acc.abs()
    }

    /// Largest violation of `|h_i - h_j| <= cost(i, j)`.
    pub fn lipschitz_excess(&self, cost: &CostMatrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.potential.len() {
            for j in 0..self.potential.len() {
                worst = worst.max((self.potential[i] - self.potential[j]).abs() - cost.get(i, j));
            }
        }
        worst
    }
}

struct Solution {
    plan: Vec<f64>,
    value: f64,
    active_src: Vec<usize>,
    dual_u: Vec<f64>,
}

/// Minimum-cost coupling of `mu` and `nu` under `cost`.
pub fn solve_ot(
    mu: &Distribution,
    nu: &Distribution,
    cost: &CostMatrix,
) -> Result<TransportPlan, TransportError> {
    let sol = solve_inner(mu, nu, cost)?;
    Ok(TransportPlan {
        plan: sol.plan,
        rows: cost.rows,
        cols: cost.cols,
        value: sol.value,
    })
}

/// Feasible dual potentials certifying the primal optimum; requires a
/// pseudometric cost so that a single potential function suffices.
pub fn dual_certificate(
    mu: &Distribution,
    nu: &Distribution,
    cost: &CostMatrix,
) -> Result<DualPotentials, TransportError> {
    if !cost.pseudometric {
        return Err(TransportError::NotPseudometric);
    }
    let sol = solve_inner(mu, nu, cost)?;
    let n = cost.cols;
    // Lipschitz envelope of the source potentials: h(k) = max_i u_i - c(i,k)
    // is cost-Lipschitz, dominates u on sources and -v on sinks, so its mean
    // difference equals the optimum. Shift into [0, 1].
    let mut h = vec![0.0f64; n];
    for (k, slot) in h.iter_mut().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for (pos, &i) in sol.active_src.iter().enumerate() {
            best = best.max(sol.dual_u[pos] - cost.get(i, k));
        }
        *slot = best;
    }
    let low = h.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    for v in h.iter_mut() {
        *v = (*v - low).clamp(0.0, 1.0);
    }
    let duals = DualPotentials { potential: h };
    if (duals.objective(mu, nu) - sol.value).abs() > 1e-9 {
        return Err(TransportError::Unsolvable("dual certificate gap"));
    }
    Ok(duals)
}

/// Exact transport between two equal-weight empirical measures under a
/// pairwise sample cost.
pub fn empirical_ot<T, F>(
    samples_a: &[T],
    samples_b: &[T],
    mut cost_fn: F,
) -> Result<TransportPlan, TransportError>
where
    F: FnMut(&T, &T) -> f64,
{
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(TransportError::EmptySamples);
    }
    let rows = samples_a.len();
    let cols = samples_b.len();
    let mut data = Vec::with_capacity(rows * cols);
    for a in samples_a {
        for b in samples_b {
            data.push(cost_fn(a, b));
        }
    }
    let cost = CostMatrix::new(rows, cols, data)?;
    let mu = Distribution::uniform(rows);
    let nu = Distribution::uniform(cols);
    solve_ot(&mu, &nu, &cost)
}

/// Transport values along an entrywise-nondecreasing chain of costs. The
/// values are checked to be nondecreasing and the last to agree with the
/// value of the pointwise supremum cost.
pub fn monotone_cost_limit_check(
    mu: &Distribution,
    nu: &Distribution,
    costs: &[CostMatrix],
) -> Result<Vec<f64>, TransportError> {
    for (k, window) in costs.windows(2).enumerate() {
        let (lo, hi) = (&window[0], &window[1]);
        if lo.rows != hi.rows || lo.cols != hi.cols {
            return Err(TransportError::CostShape {
                got: hi.data.len(),
                expected: lo.data.len(),
            });
        }
        if lo.data.iter().zip(&hi.data).any(|(a, b)| b < a) {
            return Err(TransportError::NonMonotoneChain(k + 1));
        }
    }
    let values: Vec<f64> = costs
        .iter()
        .map(|c| solve_ot(mu, nu, c).map(|p| p.value()))
        .collect::<Result<_, _>>()?;
    for window in values.windows(2) {
        if window[1] < window[0] - 1e-9 {
            return Err(TransportError::Unsolvable(
                "monotone chain values decreased",
            ));
        }
    }
    if let Some(last) = costs.last() {
        let mut sup = last.clone();
        for c in costs {
            sup = sup.entrywise_max(c)?;
        }
        let sup_value = solve_ot(mu, nu, &sup)?.value();
        if (sup_value - values[values.len() - 1]).abs() > 1e-9 {
            return Err(TransportError::Unsolvable("chain limit mismatch"));
        }
    }
    Ok(values)
}

fn solve_inner(
    mu: &Distribution,
    nu: &Distribution,
    cost: &CostMatrix,
) -> Result<Solution, TransportError> {
    if mu.len() != cost.rows || nu.len() != cost.cols {
        return Err(TransportError::DimensionMismatch {
            rows: cost.rows,
            cols: cost.cols,
            mu: mu.len(),
            nu: nu.len(),
        });
    }
    // Zero-weight atoms leave the problem and come back as zero plan rows.
    let active_src = mu.support();
    let active_snk = nu.support();
    let m = active_src.len();
    let n = active_snk.len();
    if m == 0 || n == 0 {
        return Err(TransportError::Unsolvable("empty support"));
    }
    let supply: Vec<f64> = active_src.iter().map(|&i| mu.weights()[i]).collect();
    let demand: Vec<f64> = active_snk.iter().map(|&j| nu.weights()[j]).collect();
    let mut dense = Vec::with_capacity(m * n);
    for &i in &active_src {
        for &j in &active_snk {
            dense.push(cost.get(i, j));
        }
    }

    let mut simplex = Simplex::new(m, n, supply, demand, dense);
    simplex.run()?;
    let (flow, dual_u, value) = simplex.finish();

    let mut plan = vec![0.0; cost.rows * cost.cols];
    for (a, &i) in active_src.iter().enumerate() {
        for (b, &j) in active_snk.iter().enumerate() {
            plan[i * cost.cols + j] = flow[a * n + b];
        }
    }
    Ok(Solution {
        plan,
        value,
        active_src,
        dual_u,
    })
}

/// Transportation network simplex over the active bipartite graph.
/// Sources are nodes `0..m`, sinks are `m..m+n`.
struct Simplex {
    m: usize,
    n: usize,
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_basis: Vec<bool>,
    basis: Vec<(usize, usize)>,
    dual_u: Vec<f64>,
    dual_v: Vec<f64>,
    cursor: usize,
    degenerate_streak: usize,
}

impl Simplex {
    fn new(m: usize, n: usize, supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Self {
        let mut s = Self {
            m,
            n,
            supply,
            demand,
            cost,
            flow: vec![0.0; m * n],
            in_basis: vec![false; m * n],
            basis: Vec::with_capacity(m + n - 1),
            dual_u: vec![0.0; m],
            dual_v: vec![0.0; n],
            cursor: 0,
            degenerate_streak: 0,
        };
        s.northwest_corner();
        s
    }

    fn northwest_corner(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut i = 0;
        let mut j = 0;
        let mut a = self.supply[0];
        let mut b = self.demand[0];
        loop {
            let theta = a.min(b).max(0.0);
            self.flow[i * n + j] = theta;
            self.in_basis[i * n + j] = true;
            self.basis.push((i, j));
            if i == m - 1 && j == n - 1 {
                break;
            }
            if a <= b && i < m - 1 {
                b -= theta;
                i += 1;
                a = self.supply[i];
            } else if j < n - 1 {
                a -= theta;
                j += 1;
                b = self.demand[j];
            } else {
                b -= theta;
                i += 1;
                a = self.supply[i];
            }
        }
    }

    /// Rebuilds the basis tree rooted at node 0 and recomputes the duals.
    fn compute_duals(&mut self) -> Result<(), TransportError> {
        let (m, n) = (self.m, self.n);
        let nodes = m + n;
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        for (arc, &(i, j)) in self.basis.iter().enumerate() {
            adjacency[i].push((m + j, arc));
            adjacency[m + j].push((i, arc));
        }
        let mut seen = vec![false; nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.dual_u[0] = 0.0;
        let mut visited = 1;
        while let Some(node) = stack.pop() {
            for &(next, arc) in &adjacency[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                visited += 1;
                let (i, j) = self.basis[arc];
                if next >= m {
                    self.dual_v[next - m] = self.cost[i * n + j] - self.dual_u[i];
                } else {
                    self.dual_u[next] = self.cost[i * n + j] - self.dual_v[j];
                }
                stack.push(next);
            }
        }
        if visited != nodes {
            return Err(TransportError::Unsolvable("basis tree lost connectivity"));
        }
        Ok(())
    }

    #[inline]
    fn reduced(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j] - self.dual_u[i] - self.dual_v[j]
    }

    /// Block pivot search; under a degenerate stall, first-index (Bland)
    /// selection guarantees termination.
    fn entering_arc(&mut self) -> Option<(usize, usize)> {
        let arcs = self.m * self.n;
        if self.degenerate_streak > self.m + self.n {
            for idx in 0..arcs {
                let (i, j) = (idx / self.n, idx % self.n);
                if !self.in_basis[idx] && self.reduced(i, j) < -PIVOT_TOL {
                    return Some((i, j));
                }
            }
            return None;
        }
        let block = (crate::float::sqrt(arcs as f64) as usize).max(64).min(arcs);
        let mut scanned = 0;
        let mut best: Option<(usize, usize, f64)> = None;
        let mut idx = self.cursor;
        while scanned < arcs {
            let limit = block.min(arcs - scanned);
            for _ in 0..limit {
                if !self.in_basis[idx] {
                    let (i, j) = (idx / self.n, idx % self.n);
                    let r = self.reduced(i, j);
                    if r < -PIVOT_TOL && best.map(|(_, _, b)| r < b).unwrap_or(true) {
                        best = Some((i, j, r));
                    }
                }
                idx += 1;
                if idx == arcs {
                    idx = 0;
                }
            }
            scanned += limit;
            if let Some((i, j, _)) = best {
                self.cursor = idx;
                return Some((i, j));
            }
        }
        None
    }

    /// Path from every node to the root along the current basis tree.
    fn parents(&self) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), TransportError> {
        let (m, n) = (self.m, self.n);
        let nodes = m + n;
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        for (arc, &(i, j)) in self.basis.iter().enumerate() {
            adjacency[i].push((m + j, arc));
            adjacency[m + j].push((i, arc));
        }
        let mut parent = vec![usize::MAX; nodes];
        let mut parent_arc = vec![usize::MAX; nodes];
        let mut depth = vec![0usize; nodes];
        let mut seen = vec![false; nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &(next, arc) in &adjacency[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                parent[next] = node;
                parent_arc[next] = arc;
                depth[next] = depth[node] + 1;
                stack.push(next);
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(TransportError::Unsolvable("basis tree lost connectivity"));
        }
        Ok((parent, parent_arc, depth))
    }

    fn pivot(&mut self, enter: (usize, usize)) -> Result<(), TransportError> {
        let (m, n) = (self.m, self.n);
        let (parent, parent_arc, depth) = self.parents()?;

        // Tree path between the endpoints of the entering arc; signs
        // alternate starting with a decrease at each endpoint.
        let mut a = enter.0;
        let mut b = m + enter.1;
        let mut side_a: Vec<usize> = Vec::new();
        let mut side_b: Vec<usize> = Vec::new();
        while depth[a] > depth[b] {
            side_a.push(parent_arc[a]);
            a = parent[a];
        }
        while depth[b] > depth[a] {
            side_b.push(parent_arc[b]);
            b = parent[b];
        }
        while a != b {
            side_a.push(parent_arc[a]);
            a = parent[a];
            side_b.push(parent_arc[b]);
            b = parent[b];
        }

        let mut cycle: Vec<(usize, f64)> = Vec::with_capacity(side_a.len() + side_b.len());
        for (k, &arc) in side_a.iter().enumerate() {
            cycle.push((arc, if k % 2 == 0 { -1.0 } else { 1.0 }));
        }
        for (k, &arc) in side_b.iter().enumerate() {
            cycle.push((arc, if k % 2 == 0 { -1.0 } else { 1.0 }));
        }

        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for &(arc, sign) in &cycle {
            if sign < 0.0 {
                let (i, j) = self.basis[arc];
                let f = self.flow[i * n + j];
                let replace = match leaving {
                    None => true,
                    Some(prev) => f < theta || (f == theta && self.basis[arc] < self.basis[prev]),
                };
                if replace {
                    theta = f;
                    leaving = Some(arc);
                }
            }
        }
        let leaving = leaving.ok_or(TransportError::Unsolvable("unbounded pivot cycle"))?;

        if theta > 0.0 {
            for &(arc, sign) in &cycle {
                let (i, j) = self.basis[arc];
                let slot = &mut self.flow[i * n + j];
                *slot = (*slot + sign * theta).max(0.0);
            }
            self.degenerate_streak = 0;
        } else {
            self.degenerate_streak += 1;
        }

        let (li, lj) = self.basis[leaving];
        self.in_basis[li * n + lj] = false;
        self.flow[li * n + lj] = 0.0;
        self.basis[leaving] = enter;
        self.in_basis[enter.0 * n + enter.1] = true;
        self.flow[enter.0 * n + enter.1] = theta;
        Ok(())
    }

    fn run(&mut self) -> Result<(), TransportError> {
        let cap = 1000 + 200 * (self.m + self.n);
        for _ in 0..cap {
            self.compute_duals()?;
            match self.entering_arc() {
                None => return Ok(()),
                Some(enter) => self.pivot(enter)?,
            }
        }
        Err(TransportError::Unsolvable("pivot limit exceeded"))
    }

    /// Recomputes flows exactly from the final tree by leaf elimination,
    /// then reads off value and duals.
    fn finish(mut self) -> (Vec<f64>, Vec<f64>, f64) {
        let (m, n) = (self.m, self.n);
        let nodes = m + n;
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for (arc, &(i, j)) in self.basis.iter().enumerate() {
            incident[i].push(arc);
            incident[m + j].push(arc);
        }
        let mut degree: Vec<usize> = incident.iter().map(|v| v.len()).collect();
        let mut residual_supply = self.supply.clone();
        let mut residual_demand = self.demand.clone();
        let mut done = vec![false; self.basis.len()];
        let mut queue: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();
        while let Some(node) = queue.pop() {
            let Some(&arc) = incident[node].iter().find(|&&a| !done[a]) else {
                continue;
            };
            done[arc] = true;
            let (i, j) = self.basis[arc];
            let amount = if node < m {
                residual_supply[i]
            } else {
                residual_demand[j]
            }
            .max(0.0);
            self.flow[i * n + j] = amount;
            residual_supply[i] -= amount;
            residual_demand[j] -= amount;
            degree[i] -= 1;
            degree[m + j] -= 1;
            for &other in [i, m + j].iter() {
                if other != node && degree[other] == 1 {
                    queue.push(other);
                }
            }
        }
        let value = self
            .basis
            .iter()
            .map(|&(i, j)| self.flow[i * n + j] * self.cost[i * n + j])
            .sum();
        let _ = self.compute_duals();
        (self.flow, self.dual_u, value)
    }
}

/// Brute-force reference evaluator, fully independent of the simplex:
/// enumerates all spanning trees of the bipartite support graph (the basic
/// solutions of the transportation polytope), keeps the feasible ones, and
/// returns the minimum cost. Exponential; intended for test oracles on
/// instances with a handful of atoms per side.
pub mod reference {
    use super::{CostMatrix, TransportError};
    use crate::process::Distribution;
    use alloc::vec;
    use alloc::vec::Vec;

    pub fn optimal_value(
        mu: &Distribution,
        nu: &Distribution,
        cost: &CostMatrix,
    ) -> Result<f64, TransportError> {
        if mu.len() != cost.rows() || nu.len() != cost.cols() {
            return Err(TransportError::DimensionMismatch {
                rows: cost.rows(),
                cols: cost.cols(),
                mu: mu.len(),
                nu: nu.len(),
            });
        }
        let srcs = mu.support();
        let snks = nu.support();
        let m = srcs.len();
        let n = snks.len();
        let supply: Vec<f64> = srcs.iter().map(|&i| mu.weights()[i]).collect();
        let demand: Vec<f64> = snks.iter().map(|&j| nu.weights()[j]).collect();
        let arcs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let want = m + n - 1;
        if arcs.len() < want {
            return Err(TransportError::Unsolvable("degenerate support"));
        }

        let mut best = f64::INFINITY;
        let mut combo: Vec<usize> = (0..want).collect();
        loop {
            if let Some(value) = tree_cost(&combo, &arcs, m, n, &supply, &demand, |i, j| {
                cost.get(srcs[i], snks[j])
            }) {
                best = best.min(value);
            }
            // next lexicographic combination
            let mut k = want;
            loop {
                if k == 0 {
                    return if best.is_finite() {
                        Ok(best)
                    } else {
                        Err(TransportError::Unsolvable("no feasible basis"))
                    };
                }
                k -= 1;
                if combo[k] != arcs.len() - want + k {
                    break;
                }
            }
            combo[k] += 1;
            for pos in (k + 1)..want {
                combo[pos] = combo[pos - 1] + 1;
            }
        }
    }

    /// Flow cost of one candidate basis, or None when it is not a spanning
    /// tree or yields an infeasible (negative) flow.
    fn tree_cost<C>(
        combo: &[usize],
        arcs: &[(usize, usize)],
        m: usize,
        n: usize,
        supply: &[f64],
        demand: &[f64],
        cost_of: C,
    ) -> Option<f64>
    where
        C: Fn(usize, usize) -> f64,
    {
        let nodes = m + n;
        // Union-find spanning check.
        let mut root: Vec<usize> = (0..nodes).collect();
        fn find(root: &mut [usize], mut x: usize) -> usize {
            while root[x] != x {
                root[x] = root[root[x]];
                x = root[x];
            }
            x
        }
        for &a in combo {
            let (i, j) = arcs[a];
            let (ri, rj) = (find(&mut root, i), find(&mut root, m + j));
            if ri == rj {
                return None;
            }
            root[ri] = rj;
        }

        // Solve the tree system by repeatedly settling degree-one nodes.
        let mut residual: Vec<f64> = supply
            .iter()
            .copied()
            .chain(demand.iter().copied())
            .collect();
        let remaining: Vec<(usize, usize)> = combo.iter().map(|&a| arcs[a]).collect();
        let mut flows: Vec<f64> = vec![0.0; remaining.len()];
        let mut settled = vec![false; remaining.len()];
        for _ in 0..remaining.len() {
            let mut degree = vec![0usize; nodes];
            for (k, &(i, j)) in remaining.iter().enumerate() {
                if !settled[k] {
                    degree[i] += 1;
                    degree[m + j] += 1;
                }
            }
            let Some(k) = (0..remaining.len()).find(|&k| {
                !settled[k] && (degree[remaining[k].0] == 1 || degree[m + remaining[k].1] == 1)
            }) else {
                return None;
            };
            let (i, j) = remaining[k];
            let amount = if degree[i] == 1 {
                residual[i]
            } else {
                residual[m + j]
            };
            if amount < -1e-12 {
                return None;
            }
            flows[k] = amount;
            residual[i] -= amount;
            residual[m + j] -= amount;
            settled[k] = true;
        }
        Some(
            remaining
                .iter()
                .zip(&flows)
                .map(|(&(i, j), &f)| f.max(0.0) * cost_of(i, j))
                .sum(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn discrete(n: usize) -> CostMatrix {
        CostMatrix::from_pseudometric(&PseudometricMatrix::discrete(n))
    }

    #[test]
    fn identical_marginals_cost_zero() {
        let mu = Distribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        let plan = solve_ot(&mu, &mu, &discrete(3)).unwrap();
        assert!(plan.value().abs() < 1e-15);
        assert!(plan.marginal_residual(&mu, &mu) < 1e-12);
    }

    #[test]
    fn point_masses_pay_the_cost_entry() {
        let mu = Distribution::point_mass(3, 0);
        let nu = Distribution::point_mass(3, 2);
        let m = PseudometricMatrix::from_entries(
            3,
            vec![
                0.0, 0.3, 0.6, //
                0.3, 0.0, 0.3, //
                0.6, 0.3, 0.0,
            ],
        )
        .unwrap();
        let plan = solve_ot(&mu, &nu, &CostMatrix::from_pseudometric(&m)).unwrap();
        assert!((plan.value() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn half_split_against_point_mass() {
        // One-parameter coupling family by hand: value is 1/2.
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let nu = Distribution::new(vec![1.0, 0.0]).unwrap();
        let plan = solve_ot(&mu, &nu, &discrete(2)).unwrap();
        assert!((plan.value() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_atoms_return_zero_plan_rows() {
        let mu = Distribution::new(vec![0.0, 1.0]).unwrap();
        let nu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let plan = solve_ot(&mu, &nu, &discrete(2)).unwrap();
        assert_eq!(plan.get(0, 0), 0.0);
        assert_eq!(plan.get(0, 1), 0.0);
        assert!((plan.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dual_certificate_matches_primal() {
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let nu = Distribution::new(vec![1.0, 0.0]).unwrap();
        let cost = discrete(2);
        let duals = dual_certificate(&mu, &nu, &cost).unwrap();
        assert!((duals.objective(&mu, &nu) - 0.5).abs() < 1e-9);
        assert!(duals.lipschitz_excess(&cost) < 1e-12);
    }

    #[test]
    fn dual_certificate_requires_pseudometric() {
        let mu = Distribution::uniform(2);
        let cost = CostMatrix::new(2, 2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(
            dual_certificate(&mu, &mu, &cost),
            Err(TransportError::NotPseudometric)
        ));
    }

    #[test]
    fn matches_reference_on_small_instance() {
        let mu = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let nu = Distribution::new(vec![0.4, 0.4, 0.2]).unwrap();
        let cost =
            CostMatrix::new(3, 3, vec![0.1, 0.9, 0.4, 0.6, 0.2, 0.8, 0.3, 0.7, 0.05]).unwrap();
        let plan = solve_ot(&mu, &nu, &cost).unwrap();
        let brute = reference::optimal_value(&mu, &nu, &cost).unwrap();
        assert!((plan.value() - brute).abs() < 1e-12);
    }

    #[test]
    fn empirical_same_list_is_free() {
        let items = vec![0.0f64, 0.4, 0.9];
        let plan = empirical_ot(&items, &items, |a, b| (a - b).abs()).unwrap();
        assert!(plan.value().abs() < 1e-12);
    }

    #[test]
    fn empirical_singletons_pay_the_pair_cost() {
        let plan = empirical_ot(&[0.25f64], &[0.75f64], |a, b| (a - b).abs()).unwrap();
        assert!((plan.value() - 0.5).abs() < 1e-15);
        assert!(matches!(
            empirical_ot::<f64, _>(&[], &[0.5], |a, b| (a - b).abs()),
            Err(TransportError::EmptySamples)
        ));
    }

    #[test]
    fn monotone_chain_values_rise() {
        let mu = Distribution::new(vec![0.5, 0.5]).unwrap();
        let nu = Distribution::new(vec![1.0, 0.0]).unwrap();
        let base = discrete(2);
        let chain = vec![
            base.scale(0.25).unwrap(),
            base.scale(0.5).unwrap(),
            base.scale(1.0).unwrap(),
        ];
        let values = monotone_cost_limit_check(&mu, &nu, &chain).unwrap();
        assert!((values[0] - 0.125).abs() < 1e-12);
        assert!((values[1] - 0.25).abs() < 1e-12);
        assert!((values[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_monotone_chain() {
        let mu = Distribution::uniform(2);
        let base = discrete(2);
        let chain = vec![base.scale(0.5).unwrap(), base.scale(0.25).unwrap()];
        assert!(matches!(
            monotone_cost_limit_check(&mu, &mu, &chain),
            Err(TransportError::NonMonotoneChain(1))
        ));
    }
}
