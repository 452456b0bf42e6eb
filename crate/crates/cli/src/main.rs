use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};
use qwsim_cli::{cmd_analyze, cmd_check, cmd_evolve, cmd_sweep, load_config, Command, ConfigError, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    Evolve,
    Sweep,
    Analyze,
    Check,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Evolve => Command::Evolve,
            Subcommand::Sweep => Command::Sweep,
            Subcommand::Analyze => Command::Analyze,
            Subcommand::Check => Command::Check,
        }
    }
}

/// Density-matrix simulator for pulse-driven population transfer in an
/// asymmetric double quantum well.
#[derive(Debug, Parser)]
#[command(name = "qwsim", version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Named parameter set; replaces any `preset` key in the file.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override one key after the file is read; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file (default: standard output). Metadata goes to FILE.meta.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Sweep worker threads.
    #[arg(long, env = "QWSIM_THREADS", value_name = "N")]
    threads: Option<usize>,
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

fn write_outputs(out: Option<&Path>, data: &str, metadata: Option<&str>) -> Result<(), RunError> {
    match out {
        Some(path) => {
            fs::write(path, data).map_err(|e| io_error(path, e))?;
            if let Some(meta) = metadata {
                let mut sidecar = path.as_os_str().to_owned();
                sidecar.push(".meta");
                let sidecar = PathBuf::from(sidecar);
                fs::write(&sidecar, meta).map_err(|e| io_error(&sidecar, e))?;
            }
            Ok(())
        }
        None => std::io::stdout().lock().write_all(data.as_bytes()).map_err(|e| RunError::Io(format!("stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| io_error(path, e))?,
        None => String::new(),
    };
    let mut config = load_config(&text, cli.preset.as_deref(), &cli.set)?;
    config.command = Some(cli.command.into());
    let threads = match cli.threads {
        Some(0) => {
            return Err(ConfigError::Range { key: "threads".into(), message: "must be at least 1".into() }.into());
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let out = cli.out.as_deref();
    match cli.command {
        Subcommand::Evolve => {
            let o = cmd_evolve(&config)?;
            write_outputs(out, &o.csv, Some(&o.metadata))
        }
        Subcommand::Sweep => {
            let o = cmd_sweep(&config, threads)?;
            write_outputs(out, &o.csv, Some(&o.metadata))
        }
        Subcommand::Analyze => {
            let o = cmd_analyze(&config)?;
            write_outputs(out, &o.csv, Some(&o.metadata))
        }
        Subcommand::Check => {
            let report = cmd_check(&config);
            write_outputs(out, &report.to_text(), None)?;
            if report.passed() {
                Ok(())
            } else {
                Err(RunError::InvariantBreach(format!("failed checks: {}", report.failures().join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = RunError::Config(ConfigError::Parse { line: 0, message: e.kind().to_string() });
            eprintln!("{}", err.error_line());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.error_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
