use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use ris_bsum::harness::{self, ExperimentConfig, OutputFormat, SizeSweep, SummaryRow};
use ris_bsum::Error;

#[derive(Parser)]
#[command(name = "ris-bsum", version, about = "Active-RIS sum-rate experiments with the BSUM solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (M, N, P_max) point of the config for all trials.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Mean runtime versus problem size at the first configured P_max.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Dimension to vary.
        #[arg(long, value_enum)]
        vary: Dimension,
        /// Size of the dimension held fixed.
        #[arg(long)]
        fixed: usize,
        /// Comma-separated sizes of the varied dimension.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// Base channel seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_antenna: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Dimension {
    /// Sweep M at fixed N.
    Antennas,
    /// Sweep N at fixed M.
    Elements,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.per_antenna |= self.per_antenna;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fails early on an unwritable destination instead of after the solves.
fn check_writable(path: &Path) -> Result<(), Failure> {
    File::create(path).map(drop).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_summary(rows: &[SummaryRow], format: Format, path: &Path) -> Result<(), Failure> {
    let mut out = BufWriter::new(File::create(path).map_err(Error::from)?);
    match format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(&mut out);
            for row in rows {
                wtr.serialize(row).map_err(Error::from)?;
            }
            wtr.flush().map_err(Error::from)?;
        }
        Format::Json => serde_json::to_writer_pretty(&mut out, rows).map_err(Error::from)?,
    }
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, format } => {
            let cfg = common.resolve()?;
            check_writable(&common.out)?;
            let result = harness::run_experiment(&cfg)?;
            for s in &result.summary {
                info!(
                    "M={} N={} K={} P={} dBm: {:.3} bits ({:.1} ms)",
                    s.m, s.n, s.k, s.p_max_dbm, s.mean_sum_rate, s.mean_runtime_ms
                );
            }
            harness::emit(&cfg, &result, format.into(), &common.out)?;
        }
        Command::Sweep { common, vary, fixed, values, format } => {
            let cfg = common.resolve()?;
            let sweep = match vary {
                Dimension::Antennas => SizeSweep::Antennas { n: fixed, m_values: values },
                Dimension::Elements => SizeSweep::Elements { m: fixed, n_values: values },
            };
            check_writable(&common.out)?;
            let rows = harness::sweep_sizes(&cfg, &sweep)?;
            write_summary(&rows, format, &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
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
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
