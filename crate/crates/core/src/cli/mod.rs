//! Command-line front end: scenario files in, report files out.
//!
//! Exit codes: 2 parse error, 3 invalid model on load, 4 failed analysis
//! precondition, 5 tolerance breach in a required check.

mod report;
mod run;
mod scenario;
mod selftest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use report::{emit_report, Cell, ReportMeta, Table, SCHEMA};
pub use run::{
    execute, run_scenario, Outcome, RunError, RunOptions, EXIT_BREACH, EXIT_LOAD, EXIT_PARSE,
    EXIT_PRECONDITION,
};
pub use scenario::{
    format_complex, matrix_from_spec, matrix_to_spec, parse_complex, Analysis, AppendixFamily,
    ComponentSpec, ConsistencyArgs, Cx, EventSpec, FactorArgs, FactorSpec, Format, FragmentArgs,
    GateSpec, IdentityArgs, InlineModel, MatrixSpec, ModelSpec, OutputSpec, ProbeArgs,
    PtCheckArgs, RecordArgs, RedundancyArgs, Scenario, SegmentSpec, StateSpec, TimeArgs,
    TracedArgs,
};
pub use selftest::{selftest, Check};

#[derive(Parser)]
#[command(name = "histcon", version, about = "Consistent histories and redundant records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis in a scenario file.
    Run {
        scenario: PathBuf,
        /// Report directory; overrides the scenario's `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `json-lines` or `csv`.
        #[arg(long)]
        format: Option<String>,
        #[arg(long = "tol-override", value_name = "KEY=VAL")]
        tol_override: Vec<String>,
    },
    /// List the model builders usable in scenario files.
    ListModels,
    /// Run the built-in invariant checks.
    Selftest,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, out, format, tol_override } => {
            let opts = RunOptions {
                out,
                format,
                tol_overrides: tol_override,
            };
            match run_scenario(&scenario, &opts) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {}", e.error);
                    e.code
                }
            }
        }
        Command::ListModels => {
            for (name, about) in crate::models::MODEL_NAMES {
                println!("{name:<18}{about}");
            }
            println!("{:<18}explicit space, schedule, families and initial state", "inline");
            0
        }
        Command::Selftest => {
            let checks = selftest();
            let mut ok = true;
            for c in &checks {
                println!("{} {:<36}{}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                0
            } else {
                EXIT_BREACH
            }
        }
    }
}
