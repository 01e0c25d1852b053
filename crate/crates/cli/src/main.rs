use clap::{Parser, Subcommand};

use ctbm_cli::commands::{self, run};

/// Behavioural pseudometrics for finite-state continuous-time Markov
/// processes: kernel and trajectory fixpoint distances, logic bounds, and
/// the learning-process validation pipeline.
#[derive(Parser)]
#[command(name = "ctbm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the kernel fixpoint distance of a process.
    KernelMetric(commands::KernelMetricArgs),
    /// Compute the trajectory fixpoint distance (empirical or oracle).
    TrajectoryMetric(commands::TrajectoryMetricArgs),
    /// Evaluate one formula at a state or across a pair.
    LogicEval(commands::LogicEvalArgs),
    /// Enumerate formulas for a certified lower bound on a pair distance.
    LogicBound(commands::LogicBoundArgs),
    /// Compare two distance matrices and flag ordering violations.
    Compare(commands::CompareArgs),
    /// Run the end-to-end checks on the five-state learning process.
    ValidateExample(commands::ValidateExampleArgs),
}

fn main() {
    // CTBM_THREADS caps the worker pool used for pair-level parallelism.
    if let Ok(threads) = std::env::var("CTBM_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring unparsable CTBM_THREADS={threads}");
        }
    }

    let cli = Cli::parse();
    let code = match &cli.command {
        Command::KernelMetric(args) => run(commands::cmd_kernel_metric(args)),
        Command::TrajectoryMetric(args) => run(commands::cmd_trajectory_metric(args)),
        Command::LogicEval(args) => run(commands::cmd_logic_eval(args)),
        Command::LogicBound(args) => run(commands::cmd_logic_bound(args)),
        Command::Compare(args) => run(commands::cmd_compare(args)),
        Command::ValidateExample(args) => run(commands::cmd_validate_example(args)),
    };
    std::process::exit(code);
}
