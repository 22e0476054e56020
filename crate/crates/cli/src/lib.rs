//! Command-line front end: `heatsource <command> [--config PATH] [--key value ...]`.
//!
//! Every configuration key is also a long flag (`--n_x 6`, or `--n-x 6`).
//! Flags override values from the config file.

pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction};

pub use config::{Command, RawConfig, RunConfig};
pub use error::CliError;
pub use run::{dispatch, RunOutput};

fn cli() -> clap::Command {
    let mut cmd = clap::Command::new("heatsource")
        .about("Reconstructs a heat source F(t) and initial temperature u0(x) from final-time and sensor data")
        .version(env!("CARGO_PKG_VERSION"))
        .arg(
            Arg::new("command")
                .value_name("COMMAND")
                .help("forward | invert | sweep | sensitivity (or `command` in the config file)"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("PATH")
                .value_parser(clap::value_parser!(PathBuf))
                .help("flat key=value configuration file"),
        );
    for &key in config::KEYS.iter().filter(|k| **k != "command") {
        let mut arg = Arg::new(key)
            .long(key)
            .value_name("VALUE")
            .action(ArgAction::Set)
            .allow_hyphen_values(true);
        if key.contains('_') {
            arg = arg.alias(key.replace('_', "-"));
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Parses arguments (including the program name) into a configuration.
pub fn parse_args<I, T>(args: I, env_out_dir: Option<&str>) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = cli()
        .try_get_matches_from(args)
        .map_err(|e| match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                CliError::Help(e.render().to_string())
            }
            _ => CliError::Usage(e.render().to_string()),
        })?;
    let mut raw = RawConfig::default();
    if let Some(path) = matches.get_one::<PathBuf>("config") {
        raw.read_file(path)?;
    }
    if let Some(c) = matches.get_one::<String>("command") {
        raw.set("command", c, config::Origin::Flag)?;
    }
    for &key in config::KEYS.iter().filter(|k| **k != "command") {
        if let Some(v) = matches.get_one::<String>(key) {
            raw.set(key, v, config::Origin::Flag)?;
        }
    }
    RunConfig::resolve(&raw, env_out_dir)
}

/// Full run: parse, dispatch, report. Returns the process exit code.
pub fn run<I, T>(args: I, env_out_dir: Option<&str>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = parse_args(args, env_out_dir).and_then(|cfg| {
        let out = dispatch(&cfg)?;
        for (k, v) in &out.results {
            println!("{k}={v}");
        }
        println!("summary={}", out.summary.display());
        match out.not_converged {
            Some((iterations, cost)) => Err(CliError::NotConverged { iterations, cost }),
            None => Ok(()),
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(CliError::Help(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
