use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use soma_cli::commands::{self, parse_range};
use soma_cli::{config, exit, Checkpoint, CliError, CliResult};
use soma_core::bench::ProtocolConfig;
use soma_core::AdapterKind;

/// Minor singular component adaptation: checkpoints, adapters, diagnostics and benchmarks.
#[derive(Debug, Parser)]
#[command(name = "soma", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the singular values of one tensor as `index,sigma` CSV.
    Svd {
        #[arg(long)]
        input: PathBuf,
        /// Name of a 2-D tensor in the checkpoint.
        #[arg(long)]
        tensor: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Split every 2-D tensor into a frozen residual plus low-rank factors.
    Init {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: AdapterKind,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fold adapter tensors back into dense weights.
    Merge {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Singular modulation ratios of a tuned checkpoint against its base.
    Smr {
        /// Base checkpoint.
        #[arg(long)]
        input: PathBuf,
        /// Tuned checkpoint (plain or adapter).
        #[arg(long)]
        tuned: PathBuf,
        #[arg(long, default_value_t = 4)]
        groups: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Pretrain a foundation and fine-tune it once; writes checkpoints and a report.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the method comparison over all configured seeds.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Remove singular components `start:end` from every 2-D tensor.
    Truncate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        range: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print (or write) the default configuration file.
    Config {
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<AdapterKind, String> {
    match s.parse::<AdapterKind>() {
        Ok(AdapterKind::None) | Err(_) => Err(format!("`{s}` is not one of soma, pissa, lora")),
        Ok(kind) => Ok(kind),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ProtocolConfig> {
    match path {
        None => Ok(ProtocolConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(config::parse(&text)?)
        }
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    soma_cli::write_atomic(path, text.as_bytes())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Svd { input, tensor, output } => {
            let csv = commands::spectrum_csv(&Checkpoint::load(&input)?, &tensor)?;
            write(&output, &csv)
        }
        Command::Init { input, kind, rank, seed, output } => {
            commands::init_checkpoint(&Checkpoint::load(&input)?, kind, rank, seed)?.save(&output)
        }
        Command::Merge { input, output } => commands::merge_checkpoint(&Checkpoint::load(&input)?)?.save(&output),
        Command::Smr { input, tuned, groups, output } => {
            let report = commands::smr_report(&Checkpoint::load(&input)?, &Checkpoint::load(&tuned)?, groups)?;
            write(&output, &soma_cli::report::to_json(&report)?)
        }
        Command::Train { config, output } => {
            let cfg = load_config(config.as_deref())?;
            let r = commands::train_run(&cfg, &output)?;
            println!(
                "{}: source {:.4}  target {:.4}  retention {:.4}  top-group SMR {:.5}",
                r.method, r.source_acc, r.target_mean, r.retention_acc, r.smr_top_group
            );
            Ok(())
        }
        Command::Bench { config, output } => {
            let cfg = load_config(config.as_deref())?;
            let c = commands::bench_run(&cfg, &output)?;
            print!("{}", commands::summary_table(&c));
            Ok(())
        }
        Command::Truncate { input, range, output } => {
            let range = parse_range(&range)?;
            commands::truncate_checkpoint(&Checkpoint::load(&input)?, range)?.save(&output)
        }
        Command::Config { output } => {
            let text = config::serialize(&ProtocolConfig::default());
            match output {
                Some(p) => write(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::USAGE,
            };
            return ExitCode::from(code as u8);
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
