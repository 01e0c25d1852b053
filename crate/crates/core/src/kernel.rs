//! The kernel distance: refine a state pseudometric by transporting the
//! time-indexed kernel rows at the worst discounted time, and iterate to the
//! least fixpoint above the observation distance.

use alloc::vec::Vec;

use crate::float;
use crate::process::{Distribution, ProcessSpec, SpecError};
use crate::pseudometric::{
    run_fixpoint, IterationReport, MetricConfig, MetricError, PseudometricMatrix,
};
use crate::transport::{solve_ot, CostMatrix};

/// Truncation tolerance for kernel rows fed to the transport solver.
pub const KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("transport failure: {0}")]
    Transport(#[from] crate::transport::TransportError),
}

/// Observation distance: entry `(x, y)` is `|obs(x) - obs(y)|`.
pub fn obs_metric(spec: &ProcessSpec) -> PseudometricMatrix {
    PseudometricMatrix::from_upper_fn(spec.len(), |i, j| (spec.obs(i) - spec.obs(j)).abs())
        .expect("absolute observation differences form a pseudometric")
}

/// Transport distance between two distributions under a pseudometric cost.
///
/// Computed in a canonical orientation (the lexicographically smaller weight
/// vector first) so the result is exactly symmetric in its arguments; point
/// masses short-circuit to a dot product.
pub fn wasserstein(m: &PseudometricMatrix, mu: &Distribution, nu: &Distribution) -> f64 {
    assert_eq!(m.len(), mu.len());
    assert_eq!(m.len(), nu.len());
    if mu.weights() == nu.weights() {
        return 0.0;
    }
    let swap = {
        let mut order = core::cmp::Ordering::Equal;
        for (a, b) in mu.weights().iter().zip(nu.weights()) {
            order = a.total_cmp(b);
            if order != core::cmp::Ordering::Equal {
                break;
            }
        }
        order == core::cmp::Ordering::Greater
    };
    let (a, b) = if swap { (nu, mu) } else { (mu, nu) };

    let sa = a.support();
    let sb = b.support();
    if sa.len() == 1 {
        let from = sa[0];
        return sb.iter().map(|&j| b.weights()[j] * m.get(from, j)).sum();
    }
    if sb.len() == 1 {
        let to = sb[0];
        return sa.iter().map(|&i| a.weights()[i] * m.get(i, to)).sum();
    }
    solve_ot(a, b, &CostMatrix::from_pseudometric(m))
        .expect("square pseudometric transport instances are solvable")
        .value()
}

/// Precomputed kernel rows on the time grid, shared across fixpoint
/// iterations (the kernels do not depend on the metric being refined).
struct KernelGrid {
    times: Vec<f64>,
    rows: Vec<Vec<Distribution>>,
}

impl KernelGrid {
    fn build(spec: &ProcessSpec, cfg: &MetricConfig) -> Result<Self, SpecError> {
        let horizon = cfg.horizon();
        let g = cfg.time_grid_points;
        let mut times = Vec::with_capacity(g);
        if cfg.theta_grid {
            // Uniform in theta = discount^t: fine resolution where the
            // discounted objective still matters, exact t = 0 first.
            let ln_c = float::ln(cfg.discount);
            for k in 0..g {
                let theta = 1.0 - (1.0 - cfg.time_tolerance) * k as f64 / (g - 1) as f64;
                let t = if k == 0 { 0.0 } else { float::ln(theta) / ln_c };
                times.push(t.min(horizon));
            }
        } else {
            for k in 0..g {
                times.push(horizon * k as f64 / (g - 1) as f64);
            }
        }
        let rows = times
            .iter()
            .map(|&t| spec.transition_matrix(t, KERNEL_TOL))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { times, rows })
    }
}

/// Discounted transport objective for one state pair at one time.
fn objective(
    spec: &ProcessSpec,
    m: &PseudometricMatrix,
    discount: f64,
    x: usize,
    y: usize,
    t: f64,
) -> f64 {
    let kernel = spec
        .transition_matrix(t, KERNEL_TOL)
        .expect("validated spec and tolerance");
    float::discount_pow(discount, t) * wasserstein(m, &kernel[x], &kernel[y])
}

/// Golden-section ascent on `[lo, hi]`; returns the best value seen.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, steps: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = f1.max(f2);
    for _ in 0..steps {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
        best = best.max(f1.max(f2));
    }
    best
}

fn step_with_grid(
    spec: &ProcessSpec,
    m: &PseudometricMatrix,
    cfg: &MetricConfig,
    grid: &KernelGrid,
) -> PseudometricMatrix {
    let n = spec.len();
    let upper = crate::map_pairs(n, |x, y| {
        let phi: Vec<f64> = grid
            .rows
            .iter()
            .zip(&grid.times)
            .map(|(rows, &t)| {
                float::discount_pow(cfg.discount, t) * wasserstein(m, &rows[x], &rows[y])
            })
            .collect();

        let mut best = 0.0f64;
        for &v in &phi {
            best = best.max(v);
        }

        // Refine around the strongest local maxima; the grid alone can
        // undershoot a smooth peak by O(grid spacing^2) per iteration,
        // which accumulates over hundreds of fixpoint steps.
        let g = phi.len();
        let mut peaks: Vec<(f64, usize)> = (0..g)
            .filter(|&k| (k == 0 || phi[k] >= phi[k - 1]) && (k + 1 == g || phi[k] >= phi[k + 1]))
            .map(|k| (phi[k], k))
            .collect();
        peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, k) in peaks.iter().take(3) {
            let lo = grid.times[k.saturating_sub(1)];
            let hi = grid.times[(k + 1).min(g - 1)];
            if hi > lo {
                let refined = golden_max(
                    |t| objective(spec, m, cfg.discount, x, y, t),
                    lo,
                    hi,
                    cfg.refine_steps,
                );
                best = best.max(refined);
            }
        }
        best
    });

    let mut next = PseudometricMatrix::from_upper_unchecked(n, &upper);
    next.repair();
    next
}

/// One application of the kernel refinement: for each state pair, the
/// supremum over time of the discounted transport distance between the
/// kernel rows, searched on a grid with golden-section refinement. The
/// result is repaired back into the pseudometric lattice and dominates `m`
/// entrywise (the search includes t = 0).
pub fn kernel_step(
    spec: &ProcessSpec,
    m: &PseudometricMatrix,
    cfg: &MetricConfig,
) -> Result<PseudometricMatrix, KernelError> {
    cfg.validate()?;
    let grid = KernelGrid::build(spec, cfg)?;
    let mut next = step_with_grid(spec, m, cfg, &grid);
    next.entrywise_max_assign(m);
    next.validate()?;
    Ok(next)
}

/// Iterates the kernel refinement from the observation distance until the
/// sup-norm change drops below the configured tolerance (or the iteration
/// cap), reporting per-pair convergence and Aitken-extrapolated limits.
pub fn kernel_fixpoint(
    spec: &ProcessSpec,
    cfg: &MetricConfig,
) -> Result<(PseudometricMatrix, IterationReport), KernelError> {
    cfg.validate()?;
    let grid = KernelGrid::build(spec, cfg)?;
    let start = obs_metric(spec);
    run_fixpoint(start, cfg, |m| {
        Ok::<_, KernelError>(step_with_grid(spec, m, cfg, &grid))
    })
}
