//! Experiment runner and oracle CLI.
//!
//! Exit codes: 0 on success, 2 on validation errors, 3 when an exact
//! oracle's enumeration cap is exceeded, 1 on I/O failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use demem_core::error::Error;
use demem_core::frontier::{self, SetCoverInstance};
use demem_core::model::RewardTable;
use demem_harness::{config_digest, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "demem",
    version,
    about = "Decision-centric budgeted-memory experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed range `a..b` overriding the config's seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cumulative regret of every method at one operating point.
    Regret(RunArgs),
    /// Memory-distortion tradeoff over the budget grid.
    BudgetSweep(RunArgs),
    /// Final regret over the mismatch grid.
    MismatchSweep(RunArgs),
    /// Induced partition distortion vs final regret point cloud.
    PartitionValidation(RunArgs),
    /// Greedy certified distortion vs the exact frontier oracle.
    OracleValidation(RunArgs),
    /// Anytime certificate violation frequencies.
    CertificateAudit(RunArgs),
    /// Fixed-restart wrapper vs plain run.
    Nonstationary(RunArgs),
    /// Slot-runtime invariants and the bridge decomposition.
    SlotAudit(RunArgs),
    /// Exact oracles over reward-table files.
    Oracle {
        #[command(subcommand)]
        op: OracleOp,
    },
}

#[derive(Subcommand)]
enum OracleOp {
    /// Exact frontier value with a witness partition.
    EpsStarInf {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Exact average-case frontier under the uniform distribution.
    EpsStarAvg {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Decision covering number.
    Covering {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Decision packing number.
    Packing {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Information floor in bits.
    InfoFloor {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Covering/packing sandwich clauses at one (eps, K).
    Sandwich {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        k: usize,
    },
    /// Exhaustive forgetting-boundary equivalence check.
    VerifyForgetting {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Reduce a Set-Cover instance to a reward table.
    SetcoverToTable {
        #[arg(long)]
        instance: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CliError::Domain(e) if e.is_capacity() => ExitCode::from(3),
                CliError::Domain(_) => ExitCode::from(2),
                CliError::Io(_) => ExitCode::from(1),
            }
        }
    }
}

enum CliError {
    Domain(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Regret(args) => run(args, ExperimentKind::Regret),
        Command::BudgetSweep(args) => run(args, ExperimentKind::BudgetSweep),
        Command::MismatchSweep(args) => run(args, ExperimentKind::MismatchSweep),
        Command::PartitionValidation(args) => run(args, ExperimentKind::PartitionValidation),
        Command::OracleValidation(args) => run(args, ExperimentKind::OracleValidation),
        Command::CertificateAudit(args) => run(args, ExperimentKind::CertificateAudit),
        Command::Nonstationary(args) => run(args, ExperimentKind::Nonstationary),
        Command::SlotAudit(args) => run(args, ExperimentKind::SlotAudit),
        Command::Oracle { op } => oracle(op),
    }
}

fn parse_seed_range(spec: &str) -> Result<Vec<u64>, Error> {
    let parts: Vec<&str> = spec.split("..").collect();
    let bad = || Error::InvalidParameter {
        name: "seeds",
        message: format!("expected a..b, got {spec}"),
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: u64 = parts[0].parse().map_err(|_| bad())?;
    let b: u64 = parts[1].parse().map_err(|_| bad())?;
    if b <= a {
        return Err(bad());
    }
    Ok((a..b).collect())
}

fn run(args: RunArgs, kind: ExperimentKind) -> Result<(), CliError> {
    let raw = fs::read_to_string(&args.config)?;
    let mut config = ExperimentConfig::from_json(&raw)?;
    config.kind = kind;
    if let Some(spec) = &args.seeds {
        config.seeds = parse_seed_range(spec)?;
    }
    config.validate()?;
    demem_harness::experiments::run_experiment(&config, &args.out, args.threads)?;
    println!(
        "{} -> {} (digest {})",
        kind.as_str(),
        args.out.display(),
        config_digest(&config)
    );
    Ok(())
}

fn load_table(path: &PathBuf) -> Result<RewardTable, CliError> {
    let raw = fs::read_to_string(path)?;
    let table: RewardTable =
        serde_json::from_str(&raw).map_err(|e| Error::InvalidData(format!("table: {e}")))?;
    Ok(table)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn oracle(op: OracleOp) -> Result<(), CliError> {
    match op {
        OracleOp::EpsStarInf { table, k } => {
            let report = frontier::eps_star_inf(&load_table(&table)?, k)?;
            print_json(&report);
        }
        OracleOp::EpsStarAvg { table, k } => {
            let table = load_table(&table)?;
            let n = table.num_contexts();
            let dist = vec![1.0 / n as f64; n];
            let value = frontier::eps_star_avg(&table, &dist, k)?;
            print_json(&serde_json::json!({ "eps_star_avg": value, "k": k }));
        }
        OracleOp::Covering { table, eps } => {
            let value = frontier::covering_number(&load_table(&table)?, eps)?;
            print_json(&serde_json::json!({ "covering_number": value, "eps": eps }));
        }
        OracleOp::Packing { table, eps } => {
            let value = frontier::packing_number(&load_table(&table)?, eps)?;
            print_json(&serde_json::json!({ "packing_number": value, "eps": eps }));
        }
        OracleOp::InfoFloor { table, eps } => {
            let value = frontier::info_floor(&load_table(&table)?, eps)?;
            print_json(&serde_json::json!({ "info_floor_bits": value, "eps": eps }));
        }
        OracleOp::Sandwich { table, eps, k } => {
            let report = frontier::sandwich_check(&load_table(&table)?, eps, k)?;
            print_json(&report);
        }
        OracleOp::VerifyForgetting { table, eps } => {
            let report = frontier::verify_forgetting_boundary(&load_table(&table)?, eps)?;
            print_json(&report);
        }
        OracleOp::SetcoverToTable { instance, out } => {
            let raw = fs::read_to_string(&instance)?;
            let sc: SetCoverInstance = serde_json::from_str(&raw)
                .map_err(|e| Error::InvalidData(format!("instance: {e}")))?;
            let table: RewardTable = frontier::setcover_to_memory(&sc)?;
            let json = serde_json::to_string_pretty(&table).expect("table serializes");
            match out {
                Some(path) => fs::write(path, json)?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}
