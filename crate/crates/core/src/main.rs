use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aircomp::cli::{self, CliError, CliResult, Figure, RunConfig};
use aircomp::montecarlo::SweepTable;
use aircomp::precoder::Design;

#[derive(Debug, Parser)]
#[command(
    name = "aircomp",
    version,
    about = "Precoder design and Monte Carlo sweeps for over-the-air computation"
)]
struct Args {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Channel draws T per operating point (overrides the config file).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file (overrides `output_path`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo trials; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one channel and write the precoder blocks as JSON.
    Design {
        #[arg(long, default_value = "proposed")]
        method: String,
    },
    /// Run the sweep in the config's [sweep] section and write CSV.
    Sweep,
    /// Regenerate one of the built-in figure sweeps as CSV.
    Reproduce { figure: String },
}

fn load_config(args: &Args) -> CliResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.channels = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_path(args: &Args, cfg: &RunConfig, fallback: &str) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn emit_table(table: &SweepTable, path: &Path) -> CliResult<()> {
    for warning in table.warnings() {
        eprintln!("warning: {warning}");
    }
    cli::write_file(path, &cli::csv_string(table))?;
    eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}

fn run(args: &Args) -> CliResult<()> {
    match &args.command {
        Command::Design { method } => {
            let cfg = load_config(args)?;
            let design: Design = method.parse()?;
            let report = cli::cmd_design(&cfg, design)?;
            let path = output_path(args, &cfg, "precoder.json");
            cli::write_file(&path, &report.to_json())?;
            println!("design_tag = {}", report.design_tag);
            println!("predicted_mse = {}", cli::format_sig10(report.predicted_mse));
            println!(
                "transmit_power = {} (target {})",
                cli::format_sig10(report.transmit_power),
                report.p0
            );
            Ok(())
        }
        Command::Sweep => {
            let cfg = load_config(args)?;
            let table = cli::cmd_sweep(&cfg)?;
            emit_table(&table, &output_path(args, &cfg, "sweep.csv"))
        }
        Command::Reproduce { figure } => {
            let fig: Figure = figure.parse()?;
            let cfg = fig.config(args.seed.unwrap_or(0), args.trials);
            cfg.validate()?;
            let table = cli::cmd_sweep(&cfg)?;
            emit_table(&table, &output_path(args, &cfg, &format!("{figure}.csv")))
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.workers {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| run(&args)),
            Err(e) => Err(CliError::Validation(format!("cannot start {threads} workers: {e}"))),
        },
        None => run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
