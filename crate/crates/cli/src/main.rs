//! `ftcp`: batch entry point for transfer-window solves, sweeps, stability
//! reports, rating builds and data conversion.

mod data;
mod output;
mod rate;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftcp_milp::{Emphasis, SolveStatus, SolverParams};
use ftcp_rating::Mode;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ftcp", version, about = "Squad planning for a transfer window under a chance-constrained team-value target")]
struct Cli {
    /// Worker threads for sweeps and stability runs.
    #[arg(long, env = "FTCP_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the solution, a results row and the solve log.
    Solve(SolveArgs),
    /// Solve every alpha x growth x formation cell on one pinned sample.
    Sweep(SweepArgs),
    /// Repeat the solve over independent samples and score each solution out of sample.
    Stability(StabilityArgs),
    /// Fit player ratings from match segment logs.
    Rate(rate::RateArgs),
    /// Score a fitted rating model on held-out matches.
    Evaluate(rate::EvaluateArgs),
    /// Write synthetic instances or match corpora.
    Generate(data::GenerateArgs),
    /// Convert a flat player table into an instance bundle.
    Import(data::ImportArgs),
    /// Write the sampled program as LP text.
    ExportLp(ExportLpArgs),
    /// Fit the one-year value model from a history table.
    FitValues(data::FitValuesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmphasisArg {
    /// Explore until the bound meets the incumbent.
    Prove,
    /// Stop once the incumbent is within the gap.
    Feasible,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InstanceArgs {
    /// Instance bundle (JSON).
    #[arg(long)]
    pub instance: PathBuf,
    /// Value model (JSON); defaults to the one stored in the bundle.
    #[arg(long)]
    pub value_model: Option<PathBuf>,
    /// Scenarios sampled for the chance constraint.
    #[arg(long, default_value_t = 70)]
    pub scenarios: usize,
    /// Seed of the scenario sample.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    /// Relative optimality gap.
    #[arg(long, default_value_t = 0.005)]
    pub gap: f64,
    /// Wall-clock limit per solve, seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub time_limit: f64,
    #[arg(long, value_enum, default_value_t = EmphasisArg::Prove)]
    pub emphasis: EmphasisArg,
}

impl SolverArgs {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            relative_gap: self.gap,
            time_limit_secs: self.time_limit,
            emphasis: match self.emphasis {
                EmphasisArg::Prove => Emphasis::ProveOptimality,
                EmphasisArg::Feasible => Emphasis::FindFeasible,
            },
            ..SolverParams::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Overrides {
    /// Chance level; defaults to the bundle's.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Required value growth R; defaults to the bundle's.
    #[arg(long)]
    pub growth: Option<f64>,
    /// Formation preset or `free`; defaults to the bundle's.
    #[arg(long)]
    pub formation: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Fresh scenarios for the out-of-sample probability; 0 skips it.
    #[arg(long, default_value_t = 1000)]
    pub oos: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Chance levels, comma separated; defaults to the bundle's.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Growth factors, comma separated; defaults to the bundle's.
    #[arg(long, value_delimiter = ',')]
    pub growth: Vec<f64>,
    /// Formations, comma separated; defaults to the bundle's.
    #[arg(long, value_delimiter = ',')]
    pub formation: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub oos: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Independent samples.
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 1000)]
    pub oos: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExportLpArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[command(flatten)]
    pub overrides: Overrides,
    /// LP file to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code of a finished solve.
pub fn status_code(status: SolveStatus) -> ExitCode {
    ExitCode::from(match status {
        SolveStatus::OptimalWithinGap => 0,
        SolveStatus::Infeasible => 2,
        SolveStatus::FeasibleTimeLimit => 3,
        SolveStatus::Unbounded => 4,
    })
}

pub fn rating_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn pool(workers: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        anyhow::ensure!(n > 0, "FTCP_WORKERS must be at least 1");
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve(a) => solve::solve(&a),
        Command::Sweep(a) => pool(cli.workers)?.install(|| solve::sweep(&a)),
        Command::Stability(a) => pool(cli.workers)?.install(|| solve::stability(&a)),
        Command::Rate(a) => rate::rate(&a),
        Command::Evaluate(a) => rate::evaluate(&a),
        Command::Generate(a) => data::generate(&a),
        Command::Import(a) => data::import(&a),
        Command::ExportLp(a) => solve::export_lp(&a),
        Command::FitValues(a) => data::fit_values(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the generic failure code; 2 means infeasible here.
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
