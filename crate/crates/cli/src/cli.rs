use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use dvao_core::Method;

/// Multi-reward group-relative advantage estimation: verification,
/// desk-scale training and weight sweeps.
#[derive(Debug, Parser)]
#[command(name = "dvao", version)]
pub struct Cli {
    /// Flat `key = value` config file; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Defaults to `<output-root>/<subcommand>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "DVAO_OUTPUT_ROOT", default_value = "runs")]
    pub output_root: PathBuf,
    /// Overrides `seed` (train, sweep) or `verify.seed` (verify).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `combiner`.
    #[arg(long, global = true, value_parser = parse_method)]
    pub combiner: Option<Method>,
    /// Overwrite outputs that already exist.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
        .map_err(|e: dvao_core::combiners::UnknownMethod| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the randomized identity suites and write verify.json.
    Verify {
        /// Deliberately break the statistics to show the suites catch it.
        #[arg(long, value_enum)]
        fault: Option<Fault>,
    },
    /// Train one policy and write train.csv, paired.csv and train_summary.json.
    Train {
        /// Log real elapsed milliseconds instead of zeros.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Train across the weight grid for each combiner and write sweep.csv.
    Sweep,
    /// Compare closed-form and finite-difference sensitivities on a stored group.
    Sensitivity {
        /// JSON file with `rewards` (rows are rollouts) and optional `weights`.
        #[arg(long)]
        group: PathBuf,
    },
    /// Check a run directory against its manifest and summarize it.
    Report {
        /// Directory holding a manifest.json.
        run: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify { .. } => "verify",
            Command::Train { .. } => "train",
            Command::Sweep => "sweep",
            Command::Sensitivity { .. } => "sensitivity",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Divide by `G - 1` instead of `G` in every standard deviation.
    SampleStd,
}

impl Fault {
    pub fn name(self) -> &'static str {
        match self {
            Fault::SampleStd => "sample-std",
        }
    }
}
