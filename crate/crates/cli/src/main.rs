//! `detpomdp`: generate, validate, solve and analyze deterministic POMDP models.
//!
//! Exit codes: 0 success, 1 usage error, 2 model error, 3 resource cap,
//! 4 internal invariant failure. Payloads go to standard output, diagnostics
//! to standard error.

mod commands;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use detpomdp::reachability::{DEFAULT_BELIEF_CAP, DEFAULT_CLOSURE_CAP};
use detpomdp::solver::DEFAULT_ORACLE_CAP;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "detpomdp", version, about = "Exact analysis of deterministic POMDPs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Model document (JSON).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Initial belief: a file or inline text, either `label:p/q,...` or a JSON object; overrides the model's.
    #[arg(long, global = true)]
    pub belief: Option<String>,
    /// Worker threads for the backward pass (0 picks the number of cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Maximum number of distinct beliefs enumerated.
    #[arg(long, global = true, default_value_t = DEFAULT_BELIEF_CAP)]
    pub cap_beliefs: usize,
    /// Maximum number of distinct composed mappings.
    #[arg(long, global = true, default_value_t = DEFAULT_CLOSURE_CAP)]
    pub cap_closure: usize,
    /// Maximum oracle search-space size `(|U|·|O|)^T`.
    #[arg(long, global = true, default_value_t = DEFAULT_ORACLE_CAP)]
    pub cap_oracle: u128,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model document and list every issue.
    Validate,
    /// Write a generated model document.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
        /// Output path; standard output when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Solve the belief-space dynamic program and print the optimal value.
    Solve,
    /// Per-layer counts of reachable beliefs.
    Reachable {
        #[arg(long, value_enum, default_value_t = BranchingArg::All)]
        branching: BranchingArg,
        /// Last layer enumerated; defaults to the horizon.
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Theoretical bounds next to the empirical reachable counts.
    Bounds,
    /// Classify the model as separated or not.
    CheckSeparated {
        /// Deepest composition explored; defaults to `T − 1`.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Closed-loop rollout of the optimal policy from a true initial state.
    Simulate {
        /// Label of the true initial state.
        #[arg(long)]
        x0: String,
    },
    /// Compare the dynamic program with the brute-force oracle.
    OracleCheck {
        /// Number of generated instances; ignored when --model is given.
        #[arg(long, default_value_t = 200)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_states: usize,
        #[arg(long, default_value_t = 2)]
        max_controls: usize,
        #[arg(long, default_value_t = 2)]
        max_observations: usize,
        #[arg(long, default_value_t = 3)]
        max_horizon: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchingArg {
    All,
    Admissible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "instance-1")]
    Instance1,
    #[value(name = "instance-2")]
    Instance2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdmissibilityArg {
    Full,
    Random,
    Restrictive,
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Water tank with threshold observations.
    Tank {
        #[arg(long, value_enum, default_value_t = Preset::Instance1)]
        preset: Preset,
        /// Shorter horizon, truncating the price sequence.
        #[arg(long)]
        horizon: Option<usize>,
        /// Negate the prices, rewarding withdrawals.
        #[arg(long)]
        negate_prices: bool,
        /// Seed of the generic initial belief.
        #[arg(long, default_value_t = 0)]
        belief_seed: u64,
    },
    /// The cyclic family whose reachable count meets the separated bound.
    TightBound {
        #[arg(long)]
        n: usize,
    },
    /// A seeded random model.
    Random {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        controls: usize,
        #[arg(long, default_value_t = 2)]
        observations: usize,
        #[arg(long, default_value_t = 3)]
        horizon: usize,
        #[arg(long, conflicts_with = "product")]
        affine: bool,
        #[arg(long)]
        product: bool,
        #[arg(long, value_enum, default_value_t = AdmissibilityArg::Full)]
        admissibility: AdmissibilityArg,
        /// Probability that a cost entry is +inf.
        #[arg(long, default_value_t = 0.0)]
        inf_prob: f64,
        #[arg(long)]
        stationary: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    let out = commands::dispatch(&cli)?;
    print!("{out}");
    Ok(())
}
