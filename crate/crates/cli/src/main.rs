//! `vortexlab` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure or
//! a failed verification.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use thiserror::Error;

use config::{CommandSpec, Params, COMMANDS, OUT_KEY};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Environment variable naming the output directory; below `--out`, above
/// the config file.
pub const OUT_ENV: &str = "VXLAB_OUT_DIR";
pub const DEFAULT_OUT: &str = "vortexlab-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn build_cli() -> Command {
    let mut root = Command::new("vortexlab")
        .about("Beltrami fields, Navier-Stokes runs and vortex-line topology on the 3-torus")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("key = value file with [subcommand] sections"),
        )
        .arg(
            Arg::new(OUT_KEY)
                .long(OUT_KEY)
                .value_name("DIR")
                .global(true)
                .help(format!("output directory [env: {OUT_ENV}] [default: {DEFAULT_OUT}]")),
        );
    for spec in COMMANDS {
        root = root.subcommand(subcommand(spec));
    }
    root
}

fn subcommand(spec: &CommandSpec) -> Command {
    let mut c = Command::new(spec.name).about(spec.about);
    for k in spec.keys {
        let help = match k.default {
            Some("") => format!("{} [default: empty]", k.help),
            Some(d) => format!("{} [default: {d}]", k.help),
            None => format!("{} [required]", k.help),
        };
        c = c.arg(
            Arg::new(k.name)
                .long(k.name)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_hyphen_values(true)
                .help(help),
        );
    }
    c
}

fn run(spec: &'static CommandSpec, root: &ArgMatches, sub: &ArgMatches) -> Result<(), CliError> {
    let mut flags = BTreeMap::new();
    for k in spec.keys {
        if let Some(v) = sub.get_one::<String>(k.name) {
            flags.insert(k.name, v.clone());
        }
    }
    let config_path = sub.get_one::<String>("config").or_else(|| root.get_one::<String>("config"));
    let sections = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            config::parse_config(&text).map_err(|e| match e {
                CliError::Validation(m) => CliError::Validation(format!("{path}: {m}")),
                other => other,
            })?
        }
        None => BTreeMap::new(),
    };
    let section = sections.get(spec.name);
    let params = Params::resolve(spec, &flags, section)?;
    let out = sub
        .get_one::<String>(OUT_KEY)
        .or_else(|| root.get_one::<String>(OUT_KEY))
        .cloned()
        .or_else(|| std::env::var(OUT_ENV).ok().filter(|s| !s.is_empty()))
        .or_else(|| section.and_then(|s| s.get(OUT_KEY)).map(|(v, _)| v.clone()))
        .unwrap_or_else(|| DEFAULT_OUT.to_string());
    commands::dispatch(&params, PathBuf::from(out))
}

fn main() -> ExitCode {
    let matches = match build_cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let spec = config::spec(name).expect("subcommands come from the schema");
    match run(spec, &matches, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vortexlab {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
