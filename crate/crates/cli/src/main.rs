mod args;
mod config;
mod output;
mod run;

use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Format};
use output::Meta;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config file: exit 1.
    Usage(String),
    /// Failed precondition or validation: exit 2.
    Invalid(String),
    /// Size caps: exit 3.
    Resource(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Invalid(_) | CliError::Io(_) | CliError::Internal(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Resource(m) => write!(f, "resource limit: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<pspin::Error> for CliError {
    fn from(e: pspin::Error) -> Self {
        if e.is_resource() {
            CliError::Resource(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

fn command() -> clap::Command {
    fn override_all(cmd: clap::Command) -> clap::Command {
        cmd.args_override_self(true).mut_subcommands(override_all)
    }
    override_all(Cli::command())
}

fn parse() -> Result<Cli, CliError> {
    let cmd = command();
    let argv = config::expand(std::env::args_os().collect(), &cmd)?;
    let matches = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            return Err(CliError::Usage(e.render().to_string()));
        }
    };
    Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))
}

fn main_inner() -> Result<(), CliError> {
    let cli = parse()?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let start = Instant::now();
    let outcome = run::run(&cli.command, cli.format)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let bytes = match cli.format {
        Format::Csv => outcome.csv,
        Format::Json => {
            let meta = Meta {
                command: cli.command.name(),
                seed: cli.command.seed(),
                config: cli.command.echo(),
                wall_time: (!cli.no_wall_time).then(|| start.elapsed().as_secs_f64()),
                warnings: &outcome.warnings,
            };
            output::json_report(&meta, outcome.json)?
        }
    };
    output::emit(&bytes, cli.report.as_deref())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprint!("{}", if m.ends_with('\n') { m.clone() } else { format!("{e}\n") }),
                _ => eprintln!("{e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
