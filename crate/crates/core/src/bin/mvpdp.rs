use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand as ClapSubcommand};

use mvpdp::bnb::{Branching, RelaxationPolicy};
use mvpdp::cli::{self, BenchArgs, CertifyArgs, GenArgs, RunConfig, Subcommand};
use mvpdp::convexify::GammaPolicy;

/// Exact multi-vehicle pickup-and-delivery routing.
///
/// Exit codes: 0 success (gap reached), 2 feasible but gap not reached,
/// 3 no feasible tour, 1 error. Set MVPDP_LOG (e.g. info, debug) for logs.
#[derive(Parser)]
#[command(name = "mvpdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Relative MIP gap at which the search stops.
    #[arg(long, global = true, default_value_t = 0.035)]
    gap: f64,
    /// Wall-clock limit in seconds.
    #[arg(long = "time-limit", global = true, default_value_t = 7200.0)]
    time_limit: f64,
    /// Convexification: auto (gamma 1.01 for symmetric costs), shift, or a number.
    #[arg(long, global = true, default_value = "auto")]
    gamma: GammaPolicy,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output file (solution JSON, instance JSON, SVG or bench report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON-lines search trace.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Generate an instance (random, from a demand CSV, or on a road graph).
    Gen {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        q: u32,
        #[arg(long)]
        demands: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Solve an instance by branch-and-bound.
    Solve {
        instance: PathBuf,
        /// Solution file used as the initial incumbent.
        #[arg(long)]
        guess: Option<PathBuf>,
        /// Also write an SVG of the solution.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Convex relaxation use: off, root, every, nodes:<max free binaries>.
        #[arg(long, default_value = "off")]
        relaxation: RelaxationPolicy,
        /// Branch on the most fractional relaxation bit instead of positions.
        #[arg(long)]
        fractional: bool,
        /// Seconds between progress log lines (shown with MVPDP_LOG=info).
        #[arg(long = "log-interval", default_value_t = 5.0)]
        log_interval: f64,
    },
    /// Check a solution file against an instance.
    Validate {
        instance: PathBuf,
        solution: PathBuf,
    },
    /// Exhaustive optimum for small instances.
    Oracle { instance: PathBuf },
    /// Certify convexity of an instance's model, or run the beta recursion.
    Certify {
        instance: Option<PathBuf>,
        /// Write the model in LP format.
        #[arg(long)]
        lp: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
    },
    /// Success/partial/failure table over seeded random instances.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "4,5")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        q: u32,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Render a solution as SVG.
    Plot {
        instance: PathBuf,
        solution: PathBuf,
    },
}

fn config(cli: Cli) -> RunConfig {
    let mut instance = None;
    let mut plot = None;
    let mut guess = None;
    let mut relaxation = RelaxationPolicy::Off;
    let mut branching = Branching::Placement;
    let mut log_interval_s = 5.0;
    let subcommand = match cli.command {
        Command::Gen {
            n,
            k,
            q,
            demands,
            graph,
        } => Subcommand::Gen(GenArgs {
            n,
            k,
            q,
            demands,
            graph,
        }),
        Command::Solve {
            instance: i,
            guess: g,
            plot: p,
            relaxation: r,
            fractional,
            log_interval,
        } => {
            log_interval_s = log_interval;
            instance = Some(i);
            guess = g;
            plot = p;
            relaxation = r;
            if fractional {
                branching = Branching::MostFractional;
            }
            Subcommand::Solve
        }
        Command::Validate {
            instance: i,
            solution,
        } => {
            instance = Some(i);
            Subcommand::Validate { solution }
        }
        Command::Oracle { instance: i } => {
            instance = Some(i);
            Subcommand::Oracle
        }
        Command::Certify {
            instance: i,
            lp,
            beta,
            steps,
        } => {
            instance = i;
            Subcommand::Certify(CertifyArgs {
                lp,
                beta0: beta,
                steps,
            })
        }
        Command::Bench {
            sizes,
            k,
            q,
            trials,
        } => Subcommand::Bench(BenchArgs {
            sizes,
            k,
            q,
            trials,
        }),
        Command::Plot {
            instance: i,
            solution,
        } => {
            instance = Some(i);
            Subcommand::Plot { solution }
        }
    };
    let c = cli.common;
    RunConfig {
        subcommand,
        instance,
        gap_target: c.gap,
        time_limit_s: c.time_limit,
        gamma: c.gamma,
        seed: c.seed,
        threads: c.threads,
        out: c.out,
        plot,
        trace: c.trace,
        guess,
        relaxation,
        branching,
        log_interval_s,
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    let cfg = config(cli);
    cli::run(&cfg).context("mvpdp failed")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MVPDP_LOG", "warn")).init();
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cli::EXIT_ERROR as u8)
        }
    }
}
