//! Scenario-driven front end for the multi-species Boltzmann toolkit:
//! config parsing, report/CSV emission, and the CLI subcommands.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

/// Parsed command line.
#[derive(Debug, Clone)]
pub struct CliArgs {
    pub command: Command,
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Povzner,
    Relax { positive: bool },
    Splitting,
    KernelCheck,
}

/// Exit status semantics: 0 pass, 1 check failure, 2 configuration error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

pub fn parse_args<I: Iterator<Item = String>>(mut args: I) -> Result<CliArgs, String> {
    let command = match args.next().as_deref() {
        Some("spectrum") => Command::Spectrum,
        Some("povzner") => Command::Povzner,
        Some("relax") => Command::Relax { positive: false },
        Some("splitting") => Command::Splitting,
        Some("kernel-check") => Command::KernelCheck,
        Some(other) => return Err(format!("unknown subcommand `{other}`")),
        None => {
            return Err(
                "usage: boltzmix <spectrum|povzner|relax|splitting|kernel-check> \
                 --config PATH [--out DIR] [--seed N] [--threads N] [--positive]"
                    .into(),
            )
        }
    };
    let mut command = command;
    let mut config = None;
    let mut out_dir = PathBuf::from("out");
    let mut seed = None;
    let mut threads = 1usize;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => {
                config = Some(PathBuf::from(
                    args.next().ok_or("--config needs a path")?,
                ))
            }
            "--out" => out_dir = PathBuf::from(args.next().ok_or("--out needs a path")?),
            "--seed" => {
                seed = Some(
                    args.next()
                        .ok_or("--seed needs a value")?
                        .parse()
                        .map_err(|e| format!("bad seed: {e}"))?,
                )
            }
            "--threads" => {
                threads = args
                    .next()
                    .ok_or("--threads needs a value")?
                    .parse()
                    .map_err(|e| format!("bad thread count: {e}"))?;
                if threads == 0 {
                    return Err("--threads must be at least 1".into());
                }
            }
            "--positive" => match command {
                Command::Relax { .. } => command = Command::Relax { positive: true },
                _ => return Err("--positive only applies to `relax`".into()),
            },
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    let config = config.ok_or("missing --config PATH")?;
    Ok(CliArgs {
        command,
        config,
        out_dir,
        seed,
        threads,
    })
}

/// Run a parsed command; returns the process exit code.
pub fn run(args: &CliArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return EXIT_CONFIG_ERROR;
        }
    };
    let cfg = match config::ScenarioFile::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid config: {e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        eprintln!("error: cannot create output directory: {e}");
        return EXIT_CONFIG_ERROR;
    }
    let result = match args.command {
        Command::Spectrum => commands::spectrum::run(&cfg, args),
        Command::Povzner => commands::povzner::run(&cfg, args),
        Command::Relax { positive } => commands::relax::run(&cfg, args, positive),
        Command::Splitting => commands::splitting::run(&cfg, args),
        Command::KernelCheck => commands::kernel_check::run(&cfg, args),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(commands::CommandError::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG_ERROR
        }
        Err(commands::CommandError::Io(e)) => {
            eprintln!("error: io: {e}");
            EXIT_CONFIG_ERROR
        }
        Err(commands::CommandError::Core(e)) => {
            eprintln!("error: {e}");
            EXIT_CHECK_FAILED
        }
    }
}
