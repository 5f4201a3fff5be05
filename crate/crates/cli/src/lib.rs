//! Command-line front end for the `ffst` library.
//!
//! Every subcommand writes CSV tables and JSON summaries into `--out`, plus a
//! `<command>.meta.json` sidecar with the only run-dependent data (time,
//! arguments). Exit codes: 0 success, 1 configuration error, 2 numeric failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::Settings;
use error::CliError;
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "ffst", version, about = "Free-fermion state transfer experiments")]
pub struct Cli {
    /// Config file: `key = value` lines with `[command]` sections, or JSON.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for disorder and sampled ensembles; overrides the config `seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "ffst-out")]
    pub out: PathBuf,
    /// Worker threads, 0 = all cores.
    #[arg(long, global = true, value_name = "INT", default_value_t = 0)]
    pub threads: usize,
    /// Override a config key; repeatable, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Eigenmode table of one chain.
    Modes,
    /// Infidelity versus g/κ: analytic, bound, leakage and oracle.
    SweepG,
    /// Minimum transfer time versus chain length.
    Scaling,
    /// Disorder ensemble, compensation study and localization profile.
    Disorder,
    /// Jordan-Wigner spectrum and propagator checks against the spin oracle.
    OracleCompare,
    /// Encoded transfer through an infinite-temperature chain.
    Encoded,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::SweepG => "sweep-g",
            Command::Scaling => "scaling",
            Command::Disorder => "disorder",
            Command::OracleCompare => "oracle-compare",
            Command::Encoded => "encoded",
        }
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for item in &cli.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        out.push(("seed".into(), seed.to_string()));
    }
    Ok(out)
}

/// Runs a parsed command line; returns the files written.
pub fn execute(cli: &Cli, args: &[String]) -> Result<Vec<String>, CliError> {
    let file = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Io(p.display().to_string(), e))?),
        None => None,
    };
    let name = cli.command.name();
    let settings = Settings::load(name, file.as_deref(), &overrides(cli)?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut out = OutDir::new(&cli.out);
    pool.install(|| match cli.command {
        Command::Modes => commands::modes(&settings, &mut out),
        Command::SweepG => commands::sweep_g(&settings, &mut out),
        Command::Scaling => commands::scaling(&settings, &mut out),
        Command::Disorder => commands::disorder(&settings, &mut out),
        Command::OracleCompare => commands::oracle_compare(&settings, &mut out),
        Command::Encoded => commands::encoded(&settings, &mut out),
    })?;
    out.write_metadata(name, args, pool.current_num_threads())?;
    Ok(out.written().to_vec())
}

/// Full entry point: parses `args` (including the program name) and returns
/// the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, &args[1..]) {
        Ok(files) => {
            for f in files {
                println!("{}", cli.out.join(f).display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
