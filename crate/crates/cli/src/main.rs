mod check;
mod config;
mod error;
mod family;
mod gen;
mod run;
mod subseq;
mod trace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdcam::problems::Instance;

use error::{Classify, CmdResult, Failure};
use family::FamilyArgs;
use subseq::Column;

/// Single-loop successive DC approximation solver for min f + g + h(c(x)).
#[derive(Debug, Parser)]
#[command(name = "sdcam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a problem instance file and print its sha256 digest.
    Gen {
        #[command(subcommand)]
        family: FamilyArgs,
        /// Output path; defaults to <family>-seed<seed>.json.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Solve from JSON run configs, writing a trace CSV and a summary JSON.
    Run {
        /// Run config file.
        #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
        config: Option<PathBuf>,
        /// Several run configs solved in parallel, each with its own outputs.
        #[arg(long, num_args = 1..)]
        sweep: Vec<PathBuf>,
    },
    /// Verify derivative oracles, prox operators and schedules on an instance.
    Check {
        #[command(subcommand)]
        family: Option<FamilyArgs>,
        /// Check an instance file instead of generating one.
        #[arg(long, global = true)]
        instance: Option<PathBuf>,
        /// Perturb one gradient coordinate so the gradient check must fail.
        #[arg(long, global = true, hide = true)]
        corrupt_gradient: bool,
    },
    /// Extract the running-average subsequence from a trace CSV.
    Subseq {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        column: Column,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging() {
    let level = match std::env::var("SDCAM_LOG_LEVEL") {
        Ok(v) if ["error", "info", "debug"].contains(&v.as_str()) => v,
        Ok(v) => {
            eprintln!("warning: SDCAM_LOG_LEVEL={v} not one of error, info, debug; using info");
            "info".into()
        }
        Err(_) => "info".into(),
    };
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Gen { family, out } => gen::cmd_gen(&family, out.as_deref()),
        Command::Run { config, sweep } => {
            let configs: Vec<PathBuf> = config.into_iter().chain(sweep).collect();
            run::cmd_run(&configs)
        }
        Command::Check {
            family,
            instance,
            corrupt_gradient,
        } => {
            let inst = match (family, instance) {
                (Some(_), Some(_)) => return Err(Failure::usage("give a family or --instance, not both")),
                (None, None) => return Err(Failure::usage("give a family (qcqp, mimo, mlp) or --instance")),
                (Some(f), None) => f.generate().usage()?,
                (None, Some(path)) => Instance::read(&path).usage()?,
            };
            check::cmd_check(&inst, corrupt_gradient)
        }
        Command::Subseq { trace, column, out } => subseq::cmd_subseq(&trace, column, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit_code()
        }
    }
}
