//! `seqlab` — experiment runner. Subcommands cover the decoding experiments
//! (analytic and learned), the residual diagnostic suites, the complexity
//! calculator, the concept-oracle verifications, language training, and the
//! target-network existence check. Every run resolves its configuration from
//! flags, an optional key=value file, and built-in defaults, then writes CSV
//! (plus optional SVG) into the output directory.

mod cliargs;
mod config;
mod output;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cliargs::{Cli, Cmd};
use config::{resolve, resolve_flag, FileConfig};

/// Failure classes with their process exit codes: configuration problems
/// exit 2, numerical failures exit 3, environment failures (I/O, thread
/// pool) exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Failure(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Failure(_) => "failure",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Failure(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Failure(_) => 1,
        }
    }
}

impl From<seqlab_core::Error> for CliError {
    fn from(e: seqlab_core::Error) -> CliError {
        match e {
            seqlab_core::Error::InvalidArgument(_) | seqlab_core::Error::DimensionMismatch(_) => {
                CliError::Config(e.to_string())
            }
            seqlab_core::Error::NonFinite(_) | seqlab_core::Error::Numeric(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

/// Options shared by every subcommand, after precedence resolution. The
/// config file handle rides along so each runner can consume (and thereby
/// validate) its own keys.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub plot: bool,
    pub jobs: usize,
    pub file: Option<FileConfig>,
}

impl Ctx {
    /// Every runner calls this after taking its keys; leftovers are typos.
    pub fn check_unused(&mut self) -> Result<(), CliError> {
        match self.file.take() {
            Some(f) => f.finish(),
            None => Ok(()),
        }
    }
}

fn build_ctx(cmd: &Cmd) -> Result<Ctx, CliError> {
    let common = cmd.common();
    let mut file = match &common.config {
        Some(path) => Some(FileConfig::load(path)?),
        None => None,
    };
    let mut seed = resolve(&mut file, "seed", common.seed, 42)?;
    if let Ok(env_seed) = std::env::var("SEQLAB_SEED") {
        seed = env_seed.trim().parse().map_err(|_| {
            CliError::Config(format!("SEQLAB_SEED must be an unsigned integer, got {env_seed:?}"))
        })?;
    }
    let out = resolve(&mut file, "out", common.out.clone(), PathBuf::from("."))?;
    let plot = resolve_flag(&mut file, "plot", common.plot, false)?;
    let jobs = resolve(&mut file, "jobs", common.jobs, 1)?;
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", out.display())))?;
    Ok(Ctx { seed, out, plot, jobs, file })
}

fn dispatch(cmd: &Cmd, ctx: &mut Ctx) -> Result<(), CliError> {
    match cmd {
        Cmd::InvertAnalytic(a) => runs::invert_analytic(a, ctx),
        Cmd::InvertLearn(a) => runs::invert_learn(a, ctx),
        Cmd::LemmaCheck(a) => runs::lemma_check(a, ctx),
        Cmd::Complexity(a) => runs::complexity(a, ctx),
        Cmd::ConceptVerify(a) => runs::concept_verify(a, ctx),
        Cmd::AdditiveImpossibility(a) => runs::additive_impossibility(a, ctx),
        Cmd::LangTrain(a) => runs::lang_train(a, ctx),
        Cmd::ExistenceCheck(a) => runs::existence_check(a, ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("{{\"error\":\"config\",\"message\":\"{}\"}}", json_escape(&e.to_string()));
            return ExitCode::from(2);
        }
    };

    let result = build_ctx(&cli.cmd).and_then(|mut ctx| dispatch(&cli.cmd, &mut ctx));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{{\"error\":\"{}\",\"message\":\"{}\",\"subcommand\":\"{}\"}}",
                e.kind(),
                json_escape(e.message()),
                cli.cmd.name()
            );
            ExitCode::from(e.exit_code())
        }
    }
}
