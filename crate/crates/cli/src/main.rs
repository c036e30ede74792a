use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qps_cli::{parse_config, run_to_dir, CliError, Format, ParsedConfig, SCHEMA_VERSION};

const OUT_DIR_ENV: &str = "QPS_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "qps-out";

#[derive(Parser)]
#[command(name = "qps", about = "Phase-space decoherence runs from JSON configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write CSV / JSON artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config and QPS_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of csv,json,gnuplot.
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<Format>>,
        #[arg(long)]
        verbose: bool,
    },
    /// Parse and validate a configuration without running it.
    Validate { config: PathBuf },
    /// Print the tool and report schema versions.
    Version,
}

fn load(path: &Path) -> Result<ParsedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("qps: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Version => {
            println!("qps {} (report schema {SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(p) => {
                println!("{}: valid {} configuration", config.display(), p.config.mode.as_str());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            out,
            format,
            verbose,
        } => {
            let parsed = match load(&config) {
                Ok(p) => p,
                Err(e) => return fail(&e),
            };
            let dir = out
                .or_else(|| parsed.config.output.directory.clone())
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            let formats: BTreeSet<Format> = format
                .or_else(|| parsed.config.output.formats.clone())
                .unwrap_or_else(|| vec![Format::Csv, Format::Json])
                .into_iter()
                .collect();
            match run_to_dir(&parsed, &dir, &formats, verbose) {
                Ok(report) => {
                    print!("{}", report.summary());
                    let code = report.exit_code();
                    if let Some(e) = &report.error {
                        eprintln!("qps: {}", e.message);
                    }
                    ExitCode::from(code as u8)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
