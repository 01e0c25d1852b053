//! Subcommand implementations. Each returns a process exit code:
//! 0 success, 1 input error, 2 partial convergence, 3 ordering violation.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use ctbm_core::example::{
    self, exact_pairs, kernel_limit, learning_spec, oracle_fixpoint, recurrence_step,
    trajectory_limit, ExampleParams, KernelLimit,
};
use ctbm_core::kernel::{kernel_fixpoint, obs_metric};
use ctbm_core::logic::{
    distance_bound, enumerate_state_formulas, log_spaced_times, parse_state_formula, BoundConfig,
    Dialect, Evaluator, Rational, SampleBank,
};
use ctbm_core::process::ProcessSpec;
use ctbm_core::pseudometric::MetricConfig;
use ctbm_core::trajectory::trajectory_fixpoint;

use crate::formats::{
    read_spec, ComparisonReport, ComparisonRow, EstimatorKind, MatrixDocument, MatrixMetadata,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Discount factor e^-1, the default for unit-rate examples.
const DEFAULT_DISCOUNT: f64 = 0.36787944117144233;

#[derive(Debug, Args)]
pub struct MetricOpts {
    /// Discount factor in (0, 1).
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    pub discount: f64,
    /// Discounted mass below which times are ignored (sets the horizon).
    #[arg(long = "time-tol", default_value_t = 1e-6)]
    pub time_tolerance: f64,
    /// Sup-norm tolerance for fixpoint termination.
    #[arg(long = "tol", default_value_t = 1e-9)]
    pub fix_tolerance: f64,
    /// Iteration cap.
    #[arg(long = "max-iter", default_value_t = 500)]
    pub max_iterations: usize,
    /// Time-grid resolution for the supremum search.
    #[arg(long = "time-grid", default_value_t = 2048)]
    pub time_grid: usize,
    /// Golden-section refinement steps per winning grid cell.
    #[arg(long = "refine-steps", default_value_t = 40)]
    pub refine_steps: usize,
    /// Search on a uniform grid in discount^t instead of t.
    #[arg(long = "theta-grid", default_value_t = false)]
    pub theta_grid: bool,
}

impl MetricOpts {
    pub fn config(&self) -> Result<MetricConfig> {
        let mut cfg =
            MetricConfig::new(self.discount).map_err(|e| anyhow!("invalid configuration: {e}"))?;
        cfg.time_tolerance = self.time_tolerance;
        cfg.fix_tolerance = self.fix_tolerance;
        cfg.max_iterations = self.max_iterations;
        cfg.time_grid_points = self.time_grid;
        cfg.refine_steps = self.refine_steps;
        cfg.theta_grid = self.theta_grid;
        cfg.validate()
            .map_err(|e| anyhow!("invalid configuration: {e}"))?;
        Ok(cfg)
    }
}

fn named_pairs(spec: &ProcessSpec, pairs: &[(usize, usize)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|&(i, j)| (spec.name(i).to_string(), spec.name(j).to_string()))
        .collect()
}

fn emit_document(doc: &MatrixDocument, out: Option<&PathBuf>, csv: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => doc
            .write(path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{}", doc.to_json()),
    }
    if let Some(path) = csv {
        std::fs::write(path, doc.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct KernelMetricArgs {
    /// Process document (JSON).
    pub spec: PathBuf,
    #[command(flatten)]
    pub opts: MetricOpts,
    /// Output path for the matrix document (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Secondary CSV export path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn cmd_kernel_metric(args: &KernelMetricArgs) -> Result<i32> {
    let spec = read_spec(&args.spec)?;
    let cfg = args.opts.config()?;
    let (matrix, report) = kernel_fixpoint(&spec, &cfg)?;
    let metadata = MatrixMetadata {
        estimator: EstimatorKind::ExactKernel,
        discount: cfg.discount,
        time_tolerance: cfg.time_tolerance,
        fix_tolerance: cfg.fix_tolerance,
        iterations: report.iterations,
        converged: report.converged,
        unconverged_pairs: named_pairs(&spec, &report.unconverged_pairs()),
        seed: None,
        samples: None,
        reps: None,
    };
    let doc = MatrixDocument::new(
        spec.names().to_vec(),
        &matrix,
        Some(&report.extrapolated),
        metadata,
    )?;
    emit_document(&doc, args.out.as_ref(), args.csv.as_ref())?;
    if report.converged {
        Ok(EXIT_OK)
    } else {
        for (a, b) in &doc.metadata.unconverged_pairs {
            eprintln!("unconverged pair: ({a}, {b})");
        }
        Ok(EXIT_PARTIAL)
    }
}

#[derive(Debug, Args)]
pub struct TrajectoryMetricArgs {
    /// Process document (JSON).
    pub spec: PathBuf,
    #[command(flatten)]
    pub opts: MetricOpts,
    /// Trajectory samples per state and repetition.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    /// Repetitions averaged per pair (collapses when sampling is
    /// deterministic).
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Base seed for the per-(state, repetition, sample) substreams.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Use the closed-form recurrences instead of sampling; only the
    /// five-state learning family qualifies, and the discount is forced to
    /// e^-lambda.
    #[arg(long, default_value_t = false)]
    pub oracle: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn cmd_trajectory_metric(args: &TrajectoryMetricArgs) -> Result<i32> {
    let spec = read_spec(&args.spec)?;
    let (matrix, report, cfg, estimator) = if args.oracle {
        let (params, st) = example::detect(&spec)
            .ok_or_else(|| anyhow!("--oracle requires the five-state learning process"))?;
        let mut opts_cfg = args.opts.config()?;
        opts_cfg.discount = params.discount();
        let (matrix, mut report) = oracle_fixpoint(&spec, &opts_cfg)?;
        // The limit of the recurrences is known in closed form (including
        // the pair whose intermediate values are only bounded from below);
        // report it as the limit estimate.
        report.extrapolated = trajectory_limit(&params, &st);
        (matrix, report, opts_cfg, EstimatorKind::Oracle)
    } else {
        let cfg = args.opts.config()?;
        let (matrix, report) =
            trajectory_fixpoint(&spec, &cfg, args.samples, args.reps, args.seed)?;
        (matrix, report, cfg, EstimatorKind::EmpiricalTrajectory)
    };
    let metadata = MatrixMetadata {
        estimator,
        discount: cfg.discount,
        time_tolerance: cfg.time_tolerance,
        fix_tolerance: cfg.fix_tolerance,
        iterations: report.iterations,
        converged: report.converged,
        unconverged_pairs: named_pairs(&spec, &report.unconverged_pairs()),
        seed: (estimator == EstimatorKind::EmpiricalTrajectory).then_some(args.seed),
        samples: (estimator == EstimatorKind::EmpiricalTrajectory).then_some(args.samples),
        reps: (estimator == EstimatorKind::EmpiricalTrajectory).then_some(args.reps),
    };
    let doc = MatrixDocument::new(
        spec.names().to_vec(),
        &matrix,
        Some(&report.extrapolated),
        metadata,
    )?;
    emit_document(&doc, args.out.as_ref(), args.csv.as_ref())?;
    if report.converged {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_PARTIAL)
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Kernel-distance matrix document.
    pub kernel: PathBuf,
    /// Trajectory-distance matrix document.
    pub trajectory: PathBuf,
    /// Ordering slack: a pair is flagged when kernel > trajectory + tolerance.
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    /// Attach kernel-dialect logic lower bounds computed from this process
    /// document.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Enumeration depth for the attached logic bounds.
    #[arg(long, default_value_t = 3)]
    pub logic_depth: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let kernel_doc = MatrixDocument::read(&args.kernel)?;
    let trajectory_doc = MatrixDocument::read(&args.trajectory)?;
    if kernel_doc.states != trajectory_doc.states {
        bail!(
            "state sets differ: {:?} vs {:?}",
            kernel_doc.states,
            trajectory_doc.states
        );
    }
    let kernel = kernel_doc.best_estimate()?;
    let trajectory = trajectory_doc.best_estimate()?;

    let logic = match &args.spec {
        Some(path) => {
            let spec = read_spec(path)?;
            if spec.names() != kernel_doc.states.as_slice() {
                bail!("process states do not match the matrix documents");
            }
            let cfg = {
                let mut cfg = MetricConfig::new(kernel_doc.metadata.discount)
                    .map_err(|e| anyhow!("matrix metadata: {e}"))?;
                cfg.time_tolerance = kernel_doc.metadata.time_tolerance;
                cfg
            };
            let bcfg = BoundConfig::new(args.logic_depth.min(4), cfg.horizon());
            Some((spec, cfg, bcfg))
        }
        None => None,
    };

    let n = kernel_doc.states.len();
    let mut rows = Vec::new();
    let mut violations = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let k = kernel.get(i, j);
            let t = trajectory.get(i, j);
            let violation = k > t + args.tolerance;
            if violation {
                violations += 1;
            }
            let (logic_bound, logic_witness) = match &logic {
                Some((spec, cfg, bcfg)) => {
                    let (bound, witness) = distance_bound(spec, i, j, cfg, bcfg, Dialect::Lambda)?;
                    (Some(bound), Some(format!("{witness}")))
                }
                None => (None, None),
            };
            rows.push(ComparisonRow {
                a: kernel_doc.states[i].clone(),
                b: kernel_doc.states[j].clone(),
                kernel: k,
                trajectory: t,
                gap: t - k,
                violation,
                logic_bound,
                logic_witness,
            });
        }
    }
    let report = ComparisonReport {
        states: kernel_doc.states.clone(),
        tolerance: args.tolerance,
        violations,
        rows,
    };
    match &args.out {
        Some(path) => report.write(path)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("reports serialize")
        ),
    }
    if violations > 0 {
        eprintln!(
            "{violations} ordering violation(s) beyond tolerance {}",
            args.tolerance
        );
        Ok(EXIT_VIOLATION)
    } else {
        Ok(EXIT_OK)
    }
}

fn parse_dialect(name: &str) -> Result<Dialect> {
    match name {
        "lambda" => Ok(Dialect::Lambda),
        "sigma" => Ok(Dialect::Sigma),
        other => bail!("unknown dialect `{other}` (expected `lambda` or `sigma`)"),
    }
}

fn resolve_state(spec: &ProcessSpec, name: &str) -> Result<usize> {
    spec.state_index(name)
        .ok_or_else(|| anyhow!("unknown state `{name}`"))
}

fn resolve_pair(spec: &ProcessSpec, pair: &str) -> Result<(usize, usize)> {
    let (a, b) = pair
        .split_once(',')
        .ok_or_else(|| anyhow!("pair must be `state,state`"))?;
    Ok((
        resolve_state(spec, a.trim())?,
        resolve_state(spec, b.trim())?,
    ))
}

#[derive(Debug, Args)]
pub struct LogicEvalArgs {
    /// Process document (JSON).
    pub spec: PathBuf,
    /// Formula text.
    #[arg(long)]
    pub formula: String,
    /// `lambda` (kernel modality) or `sigma` (path integrals).
    #[arg(long, default_value = "lambda")]
    pub dialect: String,
    /// Evaluate at one state.
    #[arg(long, conflicts_with = "pair")]
    pub state: Option<String>,
    /// Evaluate the absolute difference across a pair `a,b`.
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    pub discount: f64,
    #[arg(long = "time-tol", default_value_t = 1e-6)]
    pub time_tolerance: f64,
    /// Trajectory samples per state for path integrals.
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

pub fn cmd_logic_eval(args: &LogicEvalArgs) -> Result<i32> {
    let spec = read_spec(&args.spec)?;
    let dialect = parse_dialect(&args.dialect)?;
    let parsed = parse_state_formula(&args.formula)?;
    let formula = match dialect {
        Dialect::Lambda => parsed,
        Dialect::Sigma => parsed.expand_sigma(),
    };
    formula.check_dialect(dialect)?;

    let mut cfg = MetricConfig::new(args.discount).map_err(|e| anyhow!("{e}"))?;
    cfg.time_tolerance = args.time_tolerance;
    let horizon = cfg.horizon();
    if let Some(max_t) = formula.max_time() {
        if max_t.to_f64() > horizon {
            eprintln!(
                "warning: time stamp {} exceeds the horizon {horizon:.3}; paths are frozen there",
                max_t
            );
        }
    }
    let bank = SampleBank::build(&spec, args.samples, horizon, args.seed)?;
    let evaluator = Evaluator::with_samples(&spec, args.discount, bank)?;

    match (&args.state, &args.pair) {
        (Some(state), None) => {
            let s = resolve_state(&spec, state)?;
            println!("{}", evaluator.eval_state(&formula, s)?);
        }
        (None, Some(pair)) => {
            let (a, b) = resolve_pair(&spec, pair)?;
            let va = evaluator.eval_state(&formula, a)?;
            let vb = evaluator.eval_state(&formula, b)?;
            println!("{}", (va - vb).abs());
        }
        _ => bail!("exactly one of --state or --pair is required"),
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Args)]
pub struct LogicBoundArgs {
    /// Process document (JSON).
    pub spec: PathBuf,
    /// State pair `a,b`.
    #[arg(long)]
    pub pair: String,
    #[arg(long, default_value = "lambda")]
    pub dialect: String,
    /// Enumeration depth (max 5).
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    /// Constants are multiples of 1/constant-grid.
    #[arg(long = "constant-grid", default_value_t = 8)]
    pub constant_grid: u32,
    /// Comma-separated rational time stamps; log-spaced defaults otherwise.
    #[arg(long)]
    pub times: Option<String>,
    /// Number of default log-spaced time stamps.
    #[arg(long = "time-count", default_value_t = 16)]
    pub time_count: usize,
    /// Cap on retained formulas per sort.
    #[arg(long = "max-formulas", default_value_t = 4000)]
    pub max_formulas: usize,
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
    pub discount: f64,
    #[arg(long = "time-tol", default_value_t = 1e-6)]
    pub time_tolerance: f64,
}

pub fn cmd_logic_bound(args: &LogicBoundArgs) -> Result<i32> {
    let spec = read_spec(&args.spec)?;
    let dialect = parse_dialect(&args.dialect)?;
    let (a, b) = resolve_pair(&spec, &args.pair)?;
    let mut cfg = MetricConfig::new(args.discount).map_err(|e| anyhow!("{e}"))?;
    cfg.time_tolerance = args.time_tolerance;

    let mut bcfg = BoundConfig::new(args.depth, cfg.horizon());
    bcfg.constant_grid = args.constant_grid;
    bcfg.max_state_formulas = args.max_formulas;
    bcfg.max_trajectory_formulas = args.max_formulas;
    bcfg.sample_budget = args.samples;
    bcfg.seed = args.seed;
    if let Some(times) = &args.times {
        bcfg.times = times
            .split(',')
            .map(|t| Rational::parse(t.trim()).ok_or_else(|| anyhow!("invalid time stamp `{t}`")))
            .collect::<Result<Vec<_>>>()?;
    } else {
        bcfg.times = log_spaced_times(args.time_count, cfg.horizon());
    }

    let (bound, witness) = distance_bound(&spec, a, b, &cfg, &bcfg, dialect)?;
    println!("bound: {bound}");
    println!("witness: {witness}");
    Ok(EXIT_OK)
}

#[derive(Debug, Args)]
pub struct ValidateExampleArgs {
    /// Common observation of the learning states.
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Jump rate; the discount is e^-lambda.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 512)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

struct Checklist {
    failures: usize,
}

impl Checklist {
    fn new() -> Self {
        Self { failures: 0 }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS {name}");
        } else {
            self.failures += 1;
            println!("FAIL {name}: {detail}");
        }
    }
}

/// Runs the full validation pipeline on the learning process: the kernel
/// distance against its closed-form table, the recurrence iteration against
/// its limits, the empirical trajectory refinement against the recurrences,
/// the ordering of the two distances, and the soundness of both logics.
pub fn cmd_validate_example(args: &ValidateExampleArgs) -> Result<i32> {
    let params = ExampleParams::new(args.r, args.lambda).map_err(|e| anyhow!("{e}"))?;
    let spec = learning_spec(&params);
    let (_, st) = example::detect(&spec).expect("generated spec is the learning process");
    let cfg = MetricConfig::new(params.discount()).map_err(|e| anyhow!("{e}"))?;
    let mut list = Checklist::new();

    // Kernel distance against the closed forms.
    let (kernel_raw, kernel_report) = kernel_fixpoint(&spec, &cfg)?;
    let kernel_best = &kernel_report.extrapolated;
    let mut worst_exact: f64 = 0.0;
    let mut worst_raw: f64 = 0.0;
    let mut interval_ok = true;
    for i in 0..5 {
        for j in (i + 1)..5 {
            match kernel_limit(&params, &st, i, j) {
                KernelLimit::Exact(want) => {
                    worst_exact = worst_exact.max((kernel_best.get(i, j) - want).abs());
                    worst_raw = worst_raw.max((kernel_raw.get(i, j) - want).abs());
                }
                KernelLimit::Interval(lo, hi) => {
                    let got = kernel_best.get(i, j);
                    interval_ok &= got >= lo - 0.01 && got <= hi + 0.01;
                }
            }
        }
    }
    list.check(
        "kernel distance matches the closed-form table",
        worst_exact <= 0.01 && worst_raw <= 0.02 && interval_ok,
        format!("worst extrapolated error {worst_exact:.4}, raw {worst_raw:.4}"),
    );

    // Recurrence iteration: exactness, monotonicity, and limit proximity.
    let d_limit = trajectory_limit(&params, &st);
    let mut d = obs_metric(&spec);
    let d0 = d.clone();
    let mut monotone = true;
    let mut identities = true;
    for _ in 0..200 {
        let next = recurrence_step(&d, &params, &st).map_err(|e| anyhow!("{e}"))?;
        for (i, j) in exact_pairs(&st) {
            monotone &= next.get(i, j) >= d.get(i, j) - 1e-15;
        }
        identities &= next.get(st.y, st.bot) == d0.get(st.y, st.bot)
            && next.get(st.x, st.zero) == d0.get(st.x, st.zero)
            && next.get(st.zero, st.bot) == d0.get(st.zero, st.bot)
            && next.get(st.zero, st.y) == d0.get(st.zero, st.y);
        d = next;
    }
    let mut worst_limit: f64 = 0.0;
    for (i, j) in exact_pairs(&st) {
        worst_limit = worst_limit.max(d_limit.get(i, j) - d.get(i, j));
    }
    list.check(
        "recurrence iteration is monotone with exact terminal entries",
        monotone && identities,
        "a recurrence entry decreased or a fixed entry moved".to_string(),
    );
    list.check(
        "recurrence iterates approach the closed-form limits",
        (0.0..=0.03).contains(&worst_limit),
        format!("worst limit gap {worst_limit:.4}"),
    );

    // Empirical refinement against the recurrences.
    let mut empirical = obs_metric(&spec);
    let mut oracle = obs_metric(&spec);
    let mut worst_mc: f64 = 0.0;
    for _ in 1..=5 {
        empirical = ctbm_core::trajectory::trajectory_step_empirical(
            &spec,
            &empirical,
            &cfg,
            args.samples,
            args.reps,
            args.seed,
        )?;
        oracle = recurrence_step(&oracle, &params, &st).map_err(|e| anyhow!("{e}"))?;
        for (i, j) in exact_pairs(&st) {
            worst_mc = worst_mc.max((empirical.get(i, j) - oracle.get(i, j)).abs());
        }
    }
    list.check(
        "empirical trajectory refinement tracks the recurrences",
        worst_mc <= 0.03,
        format!("worst iterate gap {worst_mc:.4}"),
    );

    // Ordering of the two distances.
    let mut worst_order = f64::NEG_INFINITY;
    for i in 0..5 {
        for j in (i + 1)..5 {
            worst_order = worst_order
                .max(kernel_best.get(i, j) - d_limit.get(i, j))
                .max(kernel_raw.get(i, j) - d_limit.get(i, j));
        }
    }
    list.check(
        "kernel distance is below the trajectory distance",
        worst_order <= 0.01,
        format!("worst ordering excess {worst_order:.4}"),
    );

    // Logic soundness, both dialects.
    let bcfg = {
        let mut bcfg = BoundConfig::new(3, cfg.horizon());
        bcfg.sample_budget = args.samples.min(256);
        bcfg.max_state_formulas = 2000;
        bcfg.max_trajectory_formulas = 2000;
        bcfg
    };
    let mut lambda_sound = true;
    for (_, values) in enumerate_state_formulas(&spec, &cfg, &bcfg, Dialect::Lambda)? {
        for i in 0..5 {
            for j in (i + 1)..5 {
                lambda_sound &= (values[i] - values[j]).abs() <= kernel_best.get(i, j) + 1e-9;
            }
        }
    }
    let (terminal_bound, _) = distance_bound(&spec, st.zero, st.bot, &cfg, &bcfg, Dialect::Lambda)?;
    list.check(
        "kernel-dialect formulas stay below the kernel distance",
        lambda_sound && (terminal_bound - 1.0).abs() <= 1e-9,
        format!("terminal bound {terminal_bound:.4}"),
    );

    let mut sigma_sound = true;
    for (_, values) in enumerate_state_formulas(&spec, &cfg, &bcfg, Dialect::Sigma)? {
        for i in 0..5 {
            for j in (i + 1)..5 {
                sigma_sound &= (values[i] - values[j]).abs() <= d_limit.get(i, j) + 0.03;
            }
        }
    }
    list.check(
        "trajectory-dialect formulas stay below the trajectory distance",
        sigma_sound,
        "a formula exceeded the distance".to_string(),
    );

    if list.failures == 0 {
        println!(
            "all checks passed (r = {}, lambda = {})",
            args.r, args.lambda
        );
        Ok(EXIT_OK)
    } else {
        println!("{} check(s) failed", list.failures);
        Ok(EXIT_INPUT)
    }
}

/// Maps library errors onto the input-error exit code.
pub fn run(result: Result<i32>) -> i32 {
    match result {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error:#}");
            EXIT_INPUT
        }
    }
}
