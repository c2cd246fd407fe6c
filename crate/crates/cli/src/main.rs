//! `permtest`: run the permanent-oracle tester, serve reference oracles over
//! the wire protocol, and estimate the statistics the tester relies on.
//!
//! Exit codes: 0 on success or Accept, 1 on Reject or a violated invariant,
//! 2 on usage, parameter or protocol errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permtest::{OracleSpec, RunMode};

use output::Format;

pub const VERSION: &str = env!("PERMTEST_VERSION");

#[derive(Parser, Debug)]
#[command(name = "permtest", version = VERSION, about = "Tester for approximate permanent oracles over the complex Gaussian ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the tester against an oracle family
    Test(TestArgs),
    /// Answer oracle queries over stdio or TCP
    Serve(ServeArgs),
    /// Estimate the first, second and fourth moments of the permanent
    Moments(MomentsArgs),
    /// Estimate permanent tail probabilities against the fourth-moment bound
    Tails(TailsArgs),
    /// Indicator rates, conditional squared error and trimmed RMS error of an oracle
    Diagnose(DiagnoseArgs),
    /// Worst-case number of oracle queries of a full run
    Budget(BudgetArgs),
    /// Re-run a saved JSON report and compare the results
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Root seed of the Gaussian sampler and the oracle hash
    #[arg(long, env = "PERMTEST_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    workers: Option<usize>,
    /// Write to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    ShortCircuit,
    RunToCompletion,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ShortCircuit => RunMode::ShortCircuit,
            ModeArg::RunToCompletion => RunMode::RunToCompletion,
        }
    }
}

fn parse_oracle(s: &str) -> Result<OracleSpec, String> {
    s.parse().map_err(|e: permtest::OracleError| e.to_string())
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    c: f64,
    /// Oracle spec, e.g. exact, noise:0.5, scaled:2, remote:tcp:127.0.0.1:7000
    #[arg(long, value_parser = parse_oracle)]
    oracle: OracleSpec,
    /// Override the number of sub-tests per stage
    #[arg(long)]
    d: Option<u64>,
    /// Override the tail threshold
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::ShortCircuit)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Keep every normalized residual in the report
    #[arg(long)]
    record_residuals: bool,
    /// Per-query timeout for remote oracles
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, value_parser = parse_oracle)]
    oracle: OracleSpec,
    /// Listen on this TCP port instead of stdio (0 picks a free port)
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Largest dimension announced in the handshake
    #[arg(long)]
    max_dim: Option<usize>,
    /// Tail threshold for heavy-tail oracles that do not fix one
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long, env = "PERMTEST_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TailsArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    k: Vec<usize>,
    #[arg(long = "T", value_delimiter = ',', default_value = "1.5,2,3,5")]
    t: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long, value_parser = parse_oracle)]
    oracle: OracleSpec,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    c: f64,
    #[arg(long = "T")]
    t: Option<f64>,
    /// Dimensions to examine (default 1..=min(n, 10))
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Fraction of worst inputs discarded by the trimmed RMS error
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BudgetArgs {
    #[arg(long)]
    n: usize,
    /// Sub-tests per stage; derived from delta and c when absent
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Emit a one-row table instead of the bare number
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    report: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(a) => commands::test(a),
        Command::Serve(a) => commands::serve(a),
        Command::Moments(a) => commands::moments(a),
        Command::Tails(a) => commands::tails(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Budget(a) => commands::budget(a),
        Command::Replay(a) => commands::replay(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("permtest: {err}");
            ExitCode::from(2)
        }
    }
}
