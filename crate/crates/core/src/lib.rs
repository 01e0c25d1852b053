//! Behavioural pseudometrics for finite-state continuous-time Markov processes.
//!
//! A process is given by exit rates and jump distributions over a finite state
//! set, together with a `[0,1]`-valued observable per state. From the derived
//! time-indexed kernels P_t and the trajectory laws, two discounted
//! behavioural distances are computed as least fixpoints:
//!
//! * the kernel distance, refined through optimal transport between the
//!   kernel rows at the worst discounted time (module [`kernel`]), and
//! * the trajectory distance, refined through optimal transport between
//!   trajectory laws under the discounted uniform path cost
//!   (module [`trajectory`]).
//!
//! A quantitative logic over states and trajectories ([`logic`]) produces
//! certified lower bounds on both distances, and [`example`] carries the
//! closed-form recurrences for the five-state learning process used as the
//! reference workload throughout the test suite.
//!
//! The crate is `no_std`-compatible (`alloc` required): disable default
//! features and enable `libm` for the math intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("ctbm-core requires either the `std` or the `libm` feature");

mod float;

pub mod example;
pub mod kernel;
pub mod logic;
pub mod process;
pub mod pseudometric;
pub mod trajectory;
pub mod transport;

pub use example::ExampleParams;
pub use kernel::{kernel_fixpoint, kernel_step, obs_metric, wasserstein};
pub use process::{Distribution, ProcessSpec, Trajectory};
pub use pseudometric::{IterationReport, MetricConfig, PseudometricMatrix};
pub use trajectory::{trajectory_fixpoint, trajectory_step_empirical, uniform_cost};
pub use transport::{solve_ot, CostMatrix, DualPotentials, TransportPlan};

use alloc::vec::Vec;

/// Unordered state pairs `(i, j)` with `i < j`, in row-major order.
pub(crate) fn pair_list(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Maps `f` over all unordered pairs, in parallel when the `parallel`
/// feature is enabled. Output order matches [`pair_list`].
pub(crate) fn map_pairs<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let pairs = pair_list(n);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pairs.par_iter().map(|&(i, j)| f(i, j)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairs.into_iter().map(|(i, j)| f(i, j)).collect()
    }
}
