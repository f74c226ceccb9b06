#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Strong H-infinity norms of delay differential algebraic systems and
/// fixed-order controller design.
#[derive(Debug, Parser)]
#[command(name = "shinf", version, about)]
pub struct Cli {
    /// Worker threads for data-parallel steps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run every grid and multi-start loop sequentially.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct NormArgs {
    /// Relative tolerance of the level-set prediction.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    /// Spectral discretization order.
    #[arg(short = 'N', long = "order", default_value_t = 20)]
    pub order: usize,

    /// Double N until the prediction settles.
    #[arg(long = "auto-N")]
    pub auto_order: bool,

    /// Skip the strong-stability gate and report the on-axis peak anyway.
    #[arg(long)]
    pub no_stability_check: bool,
}

#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    /// System or interconnection file (JSON).
    pub input: PathBuf,

    /// Controller parameters for an interconnection file, comma separated.
    /// Overrides `params` in the file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,

    /// Write the result document here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strong H-infinity norm with its certificate.
    Norm {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Strong norm of the asymptotic transfer function only.
    TaNorm {
        #[command(flatten)]
        input: InputArgs,
        /// Grid points per effective delay angle.
        #[arg(long, default_value_t = 40)]
        grid: usize,
    },
    /// Singular values of T(j omega) on a frequency grid, as CSV.
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1e-2)]
        omega_min: f64,
        #[arg(long, default_value_t = 1e3)]
        omega_max: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        /// Linear instead of logarithmic spacing.
        #[arg(long)]
        linear: bool,
        /// Number of singular values per frequency.
        #[arg(long, default_value_t = 1)]
        singular_values: usize,
    },
    /// Minimize the closed-loop strong norm over the free controller entries.
    Synth {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 5)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random starts are drawn from [-box, box] per parameter.
        #[arg(long = "box", default_value_t = 10.0)]
        box_half: f64,
        /// BFGS iteration cap per start.
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Stationarity tolerance of the optimizer.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Compare the analytic gradient with central finite differences.
    GradCheck {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[command(flatten)]
        norm: NormArgs,
    },
    /// Check causality and strong stability.
    Check {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short = 'N', long = "order", default_value_t = 20)]
        order: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
